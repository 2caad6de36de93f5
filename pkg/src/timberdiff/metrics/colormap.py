"""Distance heatmap colouring."""

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParameter, LengthMismatch

BLUE_GREEN_RED = ((0.0, (0.0, 0.0, 1.0)), (0.5, (0.0, 1.0, 0.0)), (1.0, (1.0, 0.0, 0.0)))


@dataclass(frozen=True)
class ColorMap:
    """Piecewise-linear gradient from distance to RGB.

    ``mode="adaptive"`` stretches the gradient over each call's
    [min, max]; ``mode="fixed"`` uses ``bounds`` (meters) and clamps.
    """

    mode: str = "adaptive"
    bounds: tuple | None = None
    stops: tuple = BLUE_GREEN_RED

    def __post_init__(self):
        if self.mode not in ("adaptive", "fixed"):
            raise InvalidParameter(f"unknown colormap mode {self.mode!r}")
        if self.mode == "fixed":
            if self.bounds is None or not self.bounds[0] < self.bounds[1]:
                raise InvalidParameter("fixed mode needs bounds (low, high) with low < high")
        pos = [s[0] for s in self.stops]
        if pos[0] != 0.0 or pos[-1] != 1.0 or any(b <= a for a, b in zip(pos, pos[1:])):
            raise InvalidParameter("stops must increase strictly from 0 to 1")

    def __call__(self, distances):
        """Return (colors (n, 3), clamped mask)."""
        d = np.asarray(distances, dtype=np.float64)
        if len(d) == 0:
            return np.zeros((0, 3)), np.zeros(0, dtype=bool)
        if self.mode == "adaptive":
            lo, hi = float(d.min()), float(d.max())
            clamped = np.zeros(len(d), dtype=bool)
        else:
            lo, hi = self.bounds
            clamped = (d < lo) | (d > hi)
        if hi <= lo:
            return np.tile(self.stops[0][1], (len(d), 1)).astype(np.float64), clamped
        s = np.clip((d - lo) / (hi - lo), 0.0, 1.0)
        pos = np.array([p for p, _ in self.stops])
        cols = np.array([c for _, c in self.stops], dtype=np.float64)
        rgb = np.column_stack([np.interp(s, pos, cols[:, ch]) for ch in range(3)])
        return rgb, clamped


def colorize(cloud, distances, cmap=None, report=None):
    """Colour ``cloud`` by ``distances``; adds the clamp count to ``report`` if given."""
    cmap = cmap or ColorMap()
    d = np.asarray(distances, dtype=np.float64)
    if len(d) != len(cloud):
        raise LengthMismatch(f"{len(d)} distances for {len(cloud)} points")
    rgb, clamped = cmap(d)
    if report is not None:
        report.n_clamped += int(clamped.sum())
    return cloud.with_colors(rgb)
