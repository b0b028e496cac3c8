"""Closed-form solutions used to drive and check the solvers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Boundary, Grid


@dataclass(frozen=True)
class CosineDecay:
    """``z = exp(-kappa (k1^2 + k2^2) t) cos(k1 x + p1) cos(k2 y + p2)``.

    Solves ``dz/dt = kappa Laplace(z)`` exactly; ``robin_trace`` gives the
    boundary data ``dz/dn + z`` that makes it the solution of the Robin
    problem as well.
    """

    kappa: float
    k1: float = np.pi
    k2: float = np.pi
    p1: float = 0.3
    p2: float = -0.2

    @property
    def rate(self):
        return self.kappa * (self.k1**2 + self.k2**2)

    def value(self, t, x, y):
        return np.exp(-self.rate * t) * np.cos(self.k1 * x + self.p1) * np.cos(self.k2 * y + self.p2)

    def on_grid(self, grid: Grid, t):
        X, Y = grid.centers()
        return self.value(t, X, Y)

    def _grad(self, t, x, y):
        e = np.exp(-self.rate * t)
        cx, sx = np.cos(self.k1 * x + self.p1), np.sin(self.k1 * x + self.p1)
        cy, sy = np.cos(self.k2 * y + self.p2), np.sin(self.k2 * y + self.p2)
        return -e * self.k1 * sx * cy, -e * self.k2 * cx * sy

    def robin_trace(self, grid: Grid, t):
        xc = (np.arange(grid.nx) + 0.5) * grid.hx
        yc = (np.arange(grid.ny) + 0.5) * grid.hy
        zero_y, lx_y = np.zeros(grid.ny), np.full(grid.ny, grid.lx)
        zero_x, ly_x = np.zeros(grid.nx), np.full(grid.nx, grid.ly)
        if grid.boundary_kind == "dirichlet":
            return Boundary(
                self.value(t, zero_y, yc),
                self.value(t, lx_y, yc),
                self.value(t, xc, zero_x),
                self.value(t, xc, ly_x),
            )
        west = -self._grad(t, zero_y, yc)[0] + self.value(t, zero_y, yc)
        east = self._grad(t, lx_y, yc)[0] + self.value(t, lx_y, yc)
        south = -self._grad(t, xc, zero_x)[1] + self.value(t, xc, zero_x)
        north = self._grad(t, xc, ly_x)[1] + self.value(t, xc, ly_x)
        return Boundary(west, east, south, north)


MANUFACTURED = {"cos-decay": CosineDecay}
