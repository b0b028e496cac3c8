"""Time integration of the eps-dependent transport problem.

    dz/dt - eps^-i div(A_eps grad z) = eps^-i div(C_eps)    in Omega
    dz/dn + z = g                                          on dOmega

with ``i = 1`` (short and mean regimes) or ``i = 2`` (long regime).  Each
step is backward Euler with the coefficients frozen at the new time level,
and the symmetric positive definite system is solved by Jacobi-PCG.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from . import grid as fv
from .coeffs import FluxLaw, ModelConstants, TidalForcing, check_constants, face_coefficients
from .errors import ContractError, SolverError
from .grid import Boundary, FaceField, Grid
from .linalg import pcg

logger = logging.getLogger(__name__)

BoundarySpec = Union[Boundary, Callable[[float], Boundary], str, None]


@dataclass
class EpsProblem:
    """Everything needed to march ``z`` from ``z0`` to ``T_final``.

    ``g_boundary`` is a :class:`Boundary`, a callable ``t -> Boundary``, the
    string ``"trace"`` (boundary data equal to the current trace, i.e. no
    diffusive boundary flux) or ``None`` for ``g = 0``.  ``dt=None`` selects
    ``min(0.1 eps^i, T_final / 256)``.
    """

    grid: Grid
    consts: ModelConstants
    law: FluxLaw
    forcing: TidalForcing
    z0: np.ndarray
    T_final: float = 1.0
    dt: Optional[float] = None
    g_boundary: BoundarySpec = None
    i_exponent: Optional[int] = None
    store_every: int = 1
    cg_rtol: float = 1e-10

    def __post_init__(self):
        if self.i_exponent is None:
            self.i_exponent = 2 if self.forcing.regime == "long" else 1
        if self.i_exponent not in (1, 2):
            raise ValueError("i_exponent must be 1 or 2")
        if self.T_final < 0:
            raise ValueError("T_final must be nonnegative")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.store_every < 1:
            raise ValueError("store_every must be >= 1")
        self.z0 = np.asarray(self.z0, dtype=float)
        if self.z0.shape != self.grid.shape:
            raise ValueError(f"z0 has shape {self.z0.shape}, grid is {self.grid.shape}")
        if not np.all(np.isfinite(self.z0)):
            raise ContractError("z0 contains non-finite values")
        if tuple(self.forcing.extent) != tuple(self.grid.extent):
            raise ValueError(f"forcing extent {self.forcing.extent} differs from grid extent {self.grid.extent}")
        check_constants(self.consts, self.forcing)
        if self.time_step > self.dt_max:
            logger.debug("dt=%.3g exceeds the accuracy guard %.3g", self.time_step, self.dt_max)

    @property
    def scale(self):
        """``eps^i``, the factor dividing the spatial operator."""
        return self.consts.epsilon**self.i_exponent

    @property
    def dt_max(self):
        return self.scale * self.grid.cell_area / (4.0 * self.consts.a * self.law.d) * 10.0

    @property
    def time_step(self):
        if self.T_final == 0:
            return 0.0
        dt = self.dt if self.dt is not None else min(0.1 * self.scale, self.T_final / 256)
        n = max(1, math.ceil(self.T_final / dt - 1e-9))
        return self.T_final / n

    @property
    def n_steps(self):
        return 0 if self.T_final == 0 else round(self.T_final / self.time_step)

    def fast_times(self, t):
        eps = self.consts.epsilon
        tau = t / math.sqrt(eps) if self.forcing.regime == "mean" else 0.0
        return tau, t / eps

    def coefficients(self, t):
        """``(A_eps + nu, C_eps)`` on the faces at physical time ``t``."""
        tau, theta = self.fast_times(t)
        A, C = face_coefficients(self.consts, self.law, self.forcing, self.grid, t, tau, theta)
        if self.consts.nu:
            A = A + self.consts.nu
        return A, C

    def boundary(self, t, z=None):
        g = self.g_boundary
        if g is None:
            return Boundary.zero(self.grid)
        if isinstance(g, str):
            if g != "trace":
                raise ValueError(f"unknown boundary spec {g!r}")
            return Boundary.trace(self.grid, z)
        if callable(g):
            return g(t)
        return g


def _stencil_for(problem, A):
    if isinstance(problem.g_boundary, str):
        # g equal to the trace: the diffusive boundary flux vanishes identically
        A = FaceField(A.x.copy(), A.y.copy())
        A.x[0] = A.x[-1] = 0.0
        A.y[:, 0] = A.y[:, -1] = 0.0
    return fv.DiffusionStencil(problem.grid, A), A


def step_implicit(problem: EpsProblem, z_n, t_n, dt=None, info=None):
    """One backward-Euler step from ``(t_n, z_n)`` to ``t_n + dt``.

    Solves ``(I - k L) z = z_n + k (source(g) + div C)`` with
    ``k = dt / eps^i`` and coefficients at ``t_n + dt``.
    """
    dt = problem.time_step if dt is None else dt
    t1 = t_n + dt
    A, C = problem.coefficients(t1)
    stencil, _ = _stencil_for(problem, A)
    g = problem.boundary(t1, z_n) if not isinstance(problem.g_boundary, str) else Boundary.zero(problem.grid)
    k = dt / problem.scale
    # Solve for the increment so the CG tolerance is relative to the change
    # itself; this keeps the discrete mass identity tight near steady states.
    rhs = k * (stencil.apply(z_n) + stencil.source(g) + fv.divergence_of_drift(problem.grid, C))
    diag = 1.0 - k * stencil.diagonal
    dz, hist = pcg(lambda v: v - k * stencil.apply(v), rhs, diag=diag, rtol=problem.cg_rtol)
    z = z_n + dz
    if not np.all(np.isfinite(z)):
        raise ContractError(f"non-finite values after the step to t={t1:.6g}")
    if info is not None:
        info["cg_history"] = hist
        info["A"], info["C"], info["g"] = A, C, g
    return z


@dataclass
class SolveRun:
    """Trajectory plus per-step diagnostics.

    ``diagnostics`` holds one entry per time level (including ``t = 0``) for
    the keys ``t, l2, h1, mass, boundary_flux, identity_gap, cg_residual``.
    ``boundary_flux`` is the discrete boundary integral of ``A dz/dn + C.n``
    (not yet divided by ``eps^i``); ``identity_gap`` is the relative mismatch
    between the mass change and that flux.
    """

    grid: Grid
    times: np.ndarray
    snapshots: np.ndarray
    diagnostics: dict
    epsilon: float
    scale: float
    dt: float

    def __len__(self):
        return len(self.times)


def _diag_row(grid, t, z, A, C, g, z_prev, dt, scale, cg_res):
    bfi = fv.boundary_flux_integral(grid, A, z, g, C)
    if z_prev is None:
        gap = 0.0
    else:
        dmass = fv.mass(grid, z) - fv.mass(grid, z_prev)
        raw = dmass / dt - bfi / scale
        terms = fv.boundary_flux_terms(grid, A, z, g, C)
        ref = max(
            np.sum(np.abs(z - z_prev)) * grid.cell_area / dt,
            sum(np.sum(np.abs(t_)) for t_ in terms) / scale,
        )
        # below the rounding level of the mass difference the gap is not measurable
        rounding = 64.0 * np.finfo(float).eps * np.sum(np.abs(z) + np.abs(z_prev)) * grid.cell_area / dt
        if abs(raw) <= rounding:
            gap = 0.0
        else:
            gap = abs(raw) / ref if ref > 0 else abs(raw)
    return dict(
        t=t,
        l2=fv.l2_norm(grid, z),
        h1=fv.h1_seminorm(grid, z),
        mass=fv.mass(grid, z),
        boundary_flux=bfi,
        identity_gap=gap,
        cg_residual=cg_res,
    )


def solve(problem: EpsProblem) -> SolveRun:
    """March from ``z0`` to ``T_final``; deterministic for identical inputs."""
    grid = problem.grid
    dt = problem.time_step
    n = problem.n_steps
    z = problem.z0.copy()
    A0, C0 = problem.coefficients(0.0)
    _, A0 = _stencil_for(problem, A0)
    g0 = problem.boundary(0.0, z)
    rows = [_diag_row(grid, 0.0, z, A0, C0, g0, None, dt, problem.scale, 0.0)]
    times = [0.0]
    snaps = [z.copy()]
    for k in range(n):
        t_n = k * dt
        info: dict = {}
        try:
            z_new = step_implicit(problem, z, t_n, dt, info)
        except SolverError as err:
            err.step = k + 1
            raise SolverError(f"step {k + 1} (t={t_n + dt:.6g}): {err}", err.history, step=k + 1) from err
        except ContractError as err:
            raise ContractError(f"step {k + 1}: {err}") from err
        t1 = (k + 1) * dt
        _, A_eff = _stencil_for(problem, info["A"])
        g = info["g"] if not isinstance(problem.g_boundary, str) else Boundary.trace(grid, z_new)
        rows.append(_diag_row(grid, t1, z_new, A_eff, info["C"], g, z, dt, problem.scale, info["cg_history"][-1]))
        z = z_new
        if (k + 1) % problem.store_every == 0 or k + 1 == n:
            times.append(t1)
            snaps.append(z.copy())
    diagnostics = {key: np.array([r[key] for r in rows]) for key in rows[0]}
    return SolveRun(
        grid=grid,
        times=np.array(times),
        snapshots=np.array(snaps),
        diagnostics=diagnostics,
        epsilon=problem.consts.epsilon,
        scale=problem.scale,
        dt=dt,
    )


def with_epsilon(problem: EpsProblem, epsilon, **changes) -> EpsProblem:
    """Copy of ``problem`` with a new eps (the time step rule is re-applied)."""
    return replace(problem, consts=replace(problem.consts, epsilon=epsilon), **changes)


@dataclass
class BoundStudy:
    epsilons: np.ndarray
    sup_l2: np.ndarray
    ratios: np.ndarray = field(init=False)

    def __post_init__(self):
        s = np.asarray(self.sup_l2, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(s[:-1] > 0, s[1:] / np.where(s[:-1] > 0, s[:-1], 1.0), np.where(s[1:] > 0, np.inf, 1.0))
        self.ratios = r

    @property
    def max_sup(self):
        return float(np.max(self.sup_l2))

    def table(self):
        rows = []
        for k, (e, s) in enumerate(zip(self.epsilons, self.sup_l2)):
            rows.append((float(e), float(s), float(self.ratios[k - 1]) if k else float("nan")))
        return rows


def uniform_bound_study(template: EpsProblem, eps_ladder) -> BoundStudy:
    """``sup_t ||z^eps||_2`` for each eps of a strictly decreasing ladder."""
    eps_ladder = [float(e) for e in eps_ladder]
    if not eps_ladder or any(not 0 < e < 1 for e in eps_ladder):
        raise ValueError("eps ladder entries must lie in (0, 1)")
    if any(b >= a for a, b in zip(eps_ladder, eps_ladder[1:])):
        raise ValueError("eps ladder must be strictly decreasing")
    sups = []
    for eps in eps_ladder:
        try:
            run = solve(with_epsilon(template, eps))
        except SolverError as err:
            raise SolverError(f"eps={eps:g}: {err}", err.history, err.step) from err
        sups.append(float(np.max(run.diagnostics["l2"])))
    return BoundStudy(np.array(eps_ladder), np.array(sups))


@dataclass
class MassBalance:
    t: np.ndarray
    raw_drift: np.ndarray
    flux_rate: np.ndarray
    identity_gap: np.ndarray

    @property
    def max_gap(self):
        return float(np.max(self.identity_gap)) if self.identity_gap.size else 0.0

    @property
    def max_raw_drift(self):
        return float(np.max(np.abs(self.raw_drift))) if self.raw_drift.size else 0.0


def mass_balance_report(run: SolveRun) -> MassBalance:
    """Per-step mass change rate, boundary flux rate and their relative gap.

    The raw drift ``d/dt int z`` is reported as is; it vanishes only when the
    boundary flux does.
    """
    d = run.diagnostics
    if len(d["t"]) < 2:
        raise ValueError("mass balance needs at least two time levels")
    dt = np.diff(d["t"])
    raw = np.diff(d["mass"]) / dt
    return MassBalance(
        t=d["t"][1:],
        raw_drift=raw,
        flux_rate=d["boundary_flux"][1:] / run.scale,
        identity_gap=d["identity_gap"][1:],
    )


def gaussian_bump(grid: Grid, center=(0.5, 0.5), width=0.15, amplitude=1.0):
    """A dune-shaped initial bed profile."""
    X, Y = grid.centers()
    cx, cy = center[0] * grid.lx, center[1] * grid.ly
    return amplitude * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2.0 * width**2))
