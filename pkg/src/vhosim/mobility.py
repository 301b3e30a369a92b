"""Field-sweep mobility: boustrophedon rows with ping-pong retrace at the path ends."""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field


@dataclass
class TractorPath:
    """Piecewise-linear path over a rectangular field.

    The node traverses a row from x1 to x2 at y1, steps by (y2-y1)/row_count,
    traverses back, and so on for row_count rows. Past the last vertex the
    path is retraced in reverse (ping-pong), so the position is defined for
    arbitrarily long runs.
    """

    x1: float
    y1: float
    x2: float
    y2: float
    row_count: int
    speed: float
    _vertices: list[tuple[float, float]] = field(init=False, repr=False)
    _cum: list[float] = field(init=False, repr=False)

    def __post_init__(self):
        if self.row_count < 1:
            raise ValueError("row_count must be >= 1")
        if self.speed <= 0:
            raise ValueError("speed must be > 0")
        dy = (self.y2 - self.y1) / self.row_count
        pts = [(self.x1, self.y1)]
        xa, xb = self.x1, self.x2
        y = self.y1
        for r in range(self.row_count):
            pts.append((xb, y))
            if r < self.row_count - 1:
                y += dy
                pts.append((xb, y))
            xa, xb = xb, xa
        self._vertices = pts
        cum = [0.0]
        for (ax, ay), (bx, by) in zip(pts, pts[1:]):
            cum.append(cum[-1] + math.hypot(bx - ax, by - ay))
        self._cum = cum

    @property
    def length(self) -> float:
        """One-way path length in meters."""
        return self._cum[-1]

    def position(self, t: float) -> tuple[float, float]:
        if t < 0:
            raise ValueError("t must be >= 0")
        total = self._cum[-1]
        if total == 0.0:
            return self._vertices[0]
        s = math.fmod(self.speed * t, 2.0 * total)
        if s > total:
            s = 2.0 * total - s
        i = bisect_right(self._cum, s) - 1
        if i >= len(self._vertices) - 1:
            return self._vertices[-1]
        (ax, ay), (bx, by) = self._vertices[i], self._vertices[i + 1]
        seg = self._cum[i + 1] - self._cum[i]
        f = (s - self._cum[i]) / seg
        return (ax + f * (bx - ax), ay + f * (by - ay))
