"""Two-stage set-abstraction feature extractor.

Each stage picks centers by farthest point sampling, gathers a capped
ball-query neighborhood, runs shared linear+ReLU layers on neighbor
coordinates *relative to the center* (concatenated with neighbor
features past stage one), and max-pools over the neighborhood.

Because the layers only ever see relative coordinates, features are
exactly translation invariant; that is what makes reusing stored frame
features across a moving canonical frame well defined. Rotation
invariance is deliberately not provided: reused features are an
approximation whenever the reference heading drifts between frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .geom import ball_query, farthest_point_sample
from .params import Params, add_linear, apply_linear
from .tensor import Tensor


@dataclass(frozen=True)
class BackboneConfig:
    input_points: int = 1024
    stage_points: tuple[int, ...] = (512, 128)
    stage_radii: tuple[float, ...] = (0.3, 0.5)
    neighbor_cap: int = 32
    stage_channels: tuple[tuple[int, ...], ...] = ((32, 64), (64, 64))

    def __post_init__(self):
        if len(self.stage_points) != len(self.stage_radii) or len(self.stage_points) != len(
            self.stage_channels
        ):
            raise ValueError("BackboneConfig: stage_points, stage_radii, stage_channels lengths differ")
        counts = (self.input_points,) + self.stage_points
        if any(b >= a for a, b in zip(counts[:-1], counts[1:])):
            raise ValueError(f"BackboneConfig: stage counts must strictly decrease, got {counts}")
        if self.neighbor_cap < 1:
            raise ValueError("BackboneConfig: neighbor_cap must be >= 1")

    @property
    def num_sampled(self) -> int:
        return self.stage_points[-1]

    @property
    def feature_dim(self) -> int:
        return self.stage_channels[-1][-1]


@dataclass
class FrameFeatures:
    """Sampled coordinates (reported in the input frame) plus features."""

    coords: np.ndarray
    feats: Tensor

    def __post_init__(self):
        if len(self.coords) != self.feats.shape[0]:
            raise ValueError("FrameFeatures: coords/feats row mismatch")


def init_backbone_params(params: Params, prefix: str, rng: np.random.Generator, cfg: BackboneConfig) -> None:
    in_dim = 3
    for s, widths in enumerate(cfg.stage_channels):
        din = in_dim
        for i, dout in enumerate(widths):
            add_linear(params, f"{prefix}.stage{s}.lin{i}", rng, din, dout)
            din = dout
        in_dim = 3 + widths[-1]


def extract(points: np.ndarray, cfg: BackboneConfig, params: Params, prefix: str = "backbone") -> FrameFeatures:
    """Run the set-abstraction stages on one frame of points."""
    coords = np.asarray(points, dtype=np.float64)
    if len(coords) < cfg.stage_points[0]:
        raise ValueError(
            f"extract: need at least {cfg.stage_points[0]} points, got {len(coords)}"
        )
    feats: Tensor | None = None
    for s, (count, radius, widths) in enumerate(
        zip(cfg.stage_points, cfg.stage_radii, cfg.stage_channels)
    ):
        center_idx = farthest_point_sample(coords, count)
        centers = coords[center_idx]
        neighborhoods = ball_query(coords, centers, radius, cfg.neighbor_cap)
        # pad ragged neighbor lists by repeating the nearest neighbor; the
        # max-pool is unaffected by duplicates
        nbr = np.empty((count, cfg.neighbor_cap), dtype=np.intp)
        for row, idx in enumerate(neighborhoods):
            nbr[row, : len(idx)] = idx
            nbr[row, len(idx) :] = idx[0]
        rel = coords[nbr] - centers[:, None, :]
        if feats is None:
            x = Tensor(rel)
        else:
            x = T.concat([Tensor(rel), T.gather(feats, nbr)], axis=-1)
        for i in range(len(widths)):
            x = T.relu(apply_linear(params, f"{prefix}.stage{s}.lin{i}", x))
        feats = T.max_along(x, axis=1)
        coords = centers
    return FrameFeatures(coords=coords, feats=feats)
