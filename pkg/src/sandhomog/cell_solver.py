"""Theta-periodic cell problems and the homogenized limit equations.

The regularized cell problem at frozen ``(t, tau)`` reads

    mu S + dS/dtheta - eps^-i div((A + nu) grad S) = eps^-i div(C)
    dS/dn + S = g,       S(theta + 1) = S(theta)

with ``i`` in {0, 1}.  With the eps-coefficients ``A_eps, C_eps`` this is the
regularized problem; with the two-scale limits ``A_tilde, C_tilde``,
``mu = nu = 0`` and ``i = 0`` it is the short-term homogenized equation.
Periodicity is found as the fixed point of the period map (march one period,
feed the end state back), accelerated with Anderson mixing.

The long-term limit drops the theta-derivative: an elliptic problem at each
active theta, with ``U`` held constant across the threshold set where
``A_tilde < G_thr_tilde``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import grid as fv
from .coeffs import FluxLaw, ModelConstants, TidalForcing, face_coefficients
from .errors import ContractError, ConvergenceError, SolverError
from .grid import Boundary, FaceField, Grid
from .linalg import pcg

CoefficientHook = Callable[[float], "tuple[FaceField, FaceField]"]


@dataclass
class CellProblem:
    """A theta-periodic problem at frozen slow time ``t`` (and ``tau``).

    ``limit`` selects the two-scale limit coefficients instead of the
    eps-coefficients.  ``coefficients`` optionally replaces the tide-derived
    fields altogether: a callable ``theta -> (A, C)`` on faces.
    ``theta_scheme`` is ``"euler"`` (backward Euler) or ``"cn"``
    (Crank-Nicolson).
    """

    grid: Grid
    consts: ModelConstants
    law: FluxLaw
    forcing: TidalForcing
    t: float = 0.0
    tau: float = 0.0
    i_exponent: Optional[int] = None
    theta_steps: int = 128
    g_boundary: Union[Boundary, Callable[[float], Boundary], None] = None
    tol_periodic: float = 1e-9
    max_periods: int = 500
    limit: bool = False
    coefficients: Optional[CoefficientHook] = None
    theta_scheme: str = "euler"
    anderson_depth: int = 5
    cg_rtol: float = 1e-10

    def __post_init__(self):
        if self.i_exponent is None:
            self.i_exponent = 1 if (self.forcing.regime == "long" and not self.limit) else 0
        if self.i_exponent not in (0, 1):
            raise ValueError("cell problems take i_exponent 0 or 1")
        if self.theta_steps < 32:
            raise ValueError("theta_steps must be at least 32")
        if self.theta_scheme not in ("euler", "cn"):
            raise ValueError("theta_scheme must be 'euler' or 'cn'")
        if not self.tol_periodic > 0 or self.max_periods < 1:
            raise ValueError("need tol_periodic > 0 and max_periods >= 1")
        if self.consts.mu > 0 and not self.consts.nu > 0:
            raise ValueError("the mu-penalized problem needs nu > 0")
        if tuple(self.forcing.extent) != tuple(self.grid.extent):
            raise ValueError("forcing extent differs from grid extent")

    @property
    def scale(self):
        return self.consts.epsilon**self.i_exponent

    @property
    def thetas(self):
        return np.arange(self.theta_steps) / self.theta_steps

    def faces(self, theta):
        """``(A + nu, C)`` on faces at fast time ``theta``."""
        if self.coefficients is not None:
            A, C = self.coefficients(theta)
        else:
            A, C = face_coefficients(
                self.consts, self.law, self.forcing, self.grid, self.t, self.tau, theta, limit=self.limit
            )
        if self.consts.nu:
            A = A + self.consts.nu
        return A, C

    def boundary(self, theta):
        g = self.g_boundary
        if g is None:
            return Boundary.zero(self.grid)
        return g(theta) if callable(g) else g


@dataclass
class PeriodicProfile:
    """Values at ``theta_k = k / N`` over one period, plus diagnostics.

    ``periodic_residual`` is ``||S(1) - S(0)||_2`` of the final period march.
    """

    grid: Grid
    thetas: np.ndarray
    values: np.ndarray
    periodic_residual: float = 0.0
    residual_history: list = field(default_factory=list)
    periods: int = 0
    threshold_flags: Optional[np.ndarray] = None
    increments: list = field(default_factory=list)
    norms: dict = field(default_factory=dict)
    elliptic_residuals: Optional[np.ndarray] = None
    problem: Optional[CellProblem] = None

    def __post_init__(self):
        if self.threshold_flags is None:
            self.threshold_flags = np.zeros(len(self.thetas), dtype=bool)

    @property
    def theta_steps(self):
        return len(self.thetas)

    def at(self, theta):
        """Linear interpolation in theta with periodic wrap."""
        n = self.theta_steps
        s = np.mod(theta, 1.0) * n
        k = int(math.floor(s)) % n
        w = s - math.floor(s)
        return (1.0 - w) * self.values[k] + w * self.values[(k + 1) % n]


# ---------------------------------------------------------------------------
# the period march


class _PeriodMarch:
    """Cached stencils and right-hand sides for one period."""

    def __init__(self, problem: CellProblem):
        self.p = problem
        n = problem.theta_steps
        self.h = 1.0 / n
        self.stencils = []
        self.forcing = []
        for k in range(n):
            A, C = problem.faces(k * self.h)
            st = fv.DiffusionStencil(problem.grid, A)
            self.stencils.append(st)
            self.forcing.append(st.source(problem.boundary(k * self.h)) + fv.divergence_of_drift(problem.grid, C))

    def run(self, S0, keep=False):
        """March from ``S0`` at theta=0 to theta=1; returns (S(1), nodes)."""
        p, h = self.p, self.h
        n = p.theta_steps
        mu, inv = p.consts.mu, 1.0 / p.scale
        nodes = [S0] if keep else None
        S = S0
        cn = p.theta_scheme == "cn"
        w = 0.5 * h if cn else h
        for k in range(1, n + 1):
            j = k % n
            st = self.stencils[j]
            rhs = S + w * inv * self.forcing[j]
            if cn:
                prev = self.stencils[k - 1]
                rhs = rhs - w * mu * S + w * inv * (prev.apply(S) + self.forcing[k - 1])
            k_diag = 1.0 + w * mu
            diag = k_diag - w * inv * st.diagonal
            S, _ = pcg(lambda v: k_diag * v - w * inv * st.apply(v), rhs, x0=S, diag=diag, rtol=p.cg_rtol)
            if not np.all(np.isfinite(S)):
                raise ContractError(f"non-finite values at theta={k * h:.6g}")
            if keep and k < n:
                nodes.append(S)
        return S, nodes


def _fixed_point(march: _PeriodMarch, S0, tol, max_periods, depth):
    """Anderson-accelerated Picard iteration on the period map."""
    grid = march.p.grid
    x = np.array(S0, dtype=float)
    hist = []
    dxs, dfs = [], []
    x_prev = f_prev = None
    best = (math.inf, x)
    for it in range(1, max_periods + 1):
        Px, _ = march.run(x)
        f = Px - x
        res = fv.l2_norm(grid, f)
        hist.append(res)
        if not math.isfinite(res):
            break
        if res <= tol:
            return x, hist, it
        if res < best[0]:
            best = (res, x)
        elif res > 1e3 * best[0]:
            # mixing went astray: restart from the best iterate
            dxs, dfs, x_prev, f_prev = [], [], None, None
            x = best[1]
            continue
        if x_prev is not None and depth > 0:
            dxs.append((x - x_prev).ravel())
            dfs.append((f - f_prev).ravel())
            if len(dxs) > depth:
                dxs.pop(0)
                dfs.pop(0)
        x_prev, f_prev = x, f
        if dxs:
            DF = np.array(dfs).T
            DX = np.array(dxs).T
            gamma, *_ = np.linalg.lstsq(DF, f.ravel(), rcond=None)
            x = (x.ravel() + f.ravel() - (DX + DF) @ gamma).reshape(x.shape)
        else:
            x = Px
    raise ConvergenceError(
        f"no periodic solution within {max_periods} periods "
        f"(last residual {hist[-1]:.3e}, target {tol:.1e})",
        hist,
    )


def _solve_periodic(problem: CellProblem, initial=None) -> PeriodicProfile:
    march = _PeriodMarch(problem)
    S0 = problem.grid.zeros() if initial is None else np.asarray(initial, dtype=float)
    x, hist, periods = _fixed_point(march, S0, problem.tol_periodic, problem.max_periods, problem.anderson_depth)
    S1, nodes = march.run(x, keep=True)
    return PeriodicProfile(
        grid=problem.grid,
        thetas=problem.thetas,
        values=np.array(nodes),
        periodic_residual=fv.l2_norm(problem.grid, S1 - x),
        residual_history=hist,
        periods=periods,
        problem=problem,
    )


def solve_periodic(problem: CellProblem, initial=None) -> PeriodicProfile:
    """Periodic solution for whatever mu, nu the problem carries.

    Converges whenever the period map contracts, e.g. when the diffusivity
    is positive somewhere in the period or mu > 0.
    """
    return _solve_periodic(problem, initial)


def solve_mu_nu(problem: CellProblem, initial=None) -> PeriodicProfile:
    """Periodic solution of the mu- and nu-regularized cell problem."""
    if not (problem.consts.mu > 0 and problem.consts.nu > 0):
        raise ValueError("solve_mu_nu needs mu > 0 and nu > 0")
    return _solve_periodic(problem, initial)


def _max_l2_gap(grid, p, q):
    return max(fv.l2_norm(grid, a - b) for a, b in zip(p.values, q.values))


def _continue(problem: CellProblem, key, ladder):
    ladder = [float(v) for v in ladder]
    if not ladder:
        raise ValueError("empty ladder")
    if any(v <= 0 for v in ladder):
        raise ValueError(f"{key} ladder entries must be positive")
    prev = None
    increments = []
    for v in ladder:
        p = replace(problem, consts=replace(problem.consts, **{key: v}))
        try:
            prof = _solve_periodic(p, None if prev is None else prev.values[0])
        except SolverError as err:
            raise ConvergenceError(f"{key}={v:g}: {err}", err.history) from err
        if prev is not None:
            increments.append(_max_l2_gap(problem.grid, prof, prev))
        prev = prof
    for k in range(1, len(increments)):
        if increments[k] > increments[k - 1] * (1 + 1e-9) + 1e-14:
            raise ConvergenceError(f"{key}-continuation increments grew: {increments}", increments)
    prev.increments = increments
    prev.norms["continuation_converged"] = bool(
        not increments or increments[-1] <= 10.0 * problem.tol_periodic
    )
    return prev


def continue_mu_to_zero(problem: CellProblem, mu_ladder=(1e-1, 1e-2, 1e-3, 1e-4)) -> PeriodicProfile:
    """Warm-started ``solve_mu_nu`` along a decreasing mu ladder.

    ``profile.increments`` holds ``max_theta ||S_k - S_{k+1}||_2``; the
    ``continuation_converged`` norm entry records whether the last increment is
    within ``10 tol_periodic``.
    """
    if not problem.consts.nu > 0:
        raise ValueError("mu continuation needs nu > 0")
    return _continue(problem, "mu", mu_ladder)


def continue_nu_to_zero(problem: CellProblem, nu_ladder=(1e-1, 1e-2, 1e-3)) -> PeriodicProfile:
    """Warm-started periodic solves along a decreasing nu ladder.

    Uses the problem's own mu (0 is fine: the Robin term keeps each nu-problem
    coercive).  The returned norms include the parameter derivative in ``t``.
    """
    prof = _continue(problem, "nu", nu_ladder)
    prof.norms.update(norm_certificates(prof, with_t_derivative=True))
    return prof


def solve_homogenized_short(problem: CellProblem, initial=None) -> PeriodicProfile:
    """``dU/dtheta - div(A_tilde grad U) = div(C_tilde)``, theta-periodic."""
    p = replace(problem, consts=replace(problem.consts, mu=0.0, nu=0.0), i_exponent=0, limit=True)
    try:
        return _solve_periodic(p, initial)
    except ConvergenceError as err:
        raise ConvergenceError(
            f"{err}; the limit problem may be fully degenerate, retry with nu > 0", err.history
        ) from err


# ---------------------------------------------------------------------------
# long-term limit


@dataclass
class ThresholdSet:
    """``mask[j, k]`` is true where ``A_tilde(t_j, theta_k) < g_thr_tilde``."""

    t_values: np.ndarray
    thetas: np.ndarray
    mask: np.ndarray
    g_thr_tilde: float
    a_tilde: np.ndarray


def limit_diffusivity(consts, law, forcing, t, theta, tau=0.0):
    """``A_tilde`` at the domain centre (spatially uniform in the long regime)."""
    from .coeffs import coefficient_arrays

    lx, ly = forcing.extent
    out = coefficient_arrays(consts, law, forcing, t, tau, np.asarray(theta, float), 0.5 * lx, 0.5 * ly)
    return np.asarray(out[3], dtype=float) * np.ones(np.shape(theta))


def threshold_set(consts, law, forcing, t_values=(0.0,), thetas=None, g_thr_tilde=None, theta_steps=128):
    """Sample the threshold set; ``g_thr_tilde`` defaults to ``a G_thr``."""
    if forcing.regime != "long":
        raise ValueError("the threshold set is defined for the long regime")
    thetas = np.arange(theta_steps) / theta_steps if thetas is None else np.asarray(thetas, float)
    g = consts.a * law.g_thr if g_thr_tilde is None else float(g_thr_tilde)
    t_values = np.atleast_1d(np.asarray(t_values, dtype=float))
    a_t = np.array([limit_diffusivity(consts, law, forcing, t, thetas) for t in t_values])
    return ThresholdSet(t_values, thetas, a_t < g, g, a_t)


def solve_homogenized_long(problem: CellProblem, threshold: Optional[ThresholdSet] = None) -> PeriodicProfile:
    """``-div(A_tilde grad U) = div(C_tilde)`` off the threshold set.

    On threshold nodes U keeps the value of the most recent active node,
    wrapping around the period.
    """
    p = replace(problem, consts=replace(problem.consts, mu=0.0, nu=0.0), i_exponent=0, limit=True)
    thetas = p.thetas
    if threshold is None:
        threshold = threshold_set(p.consts, p.law, p.forcing, (p.t,), thetas)
    j = int(np.argmin(np.abs(threshold.t_values - p.t)))
    if len(threshold.thetas) != len(thetas) or not np.allclose(threshold.thetas, thetas):
        raise ValueError("threshold set sampled on different theta nodes")
    mask = np.array(threshold.mask[j], dtype=bool)
    if mask.all():
        raise ContractError("the threshold set covers the whole period: no active value to hold")
    grid = p.grid
    values = np.zeros((len(thetas),) + grid.shape)
    residuals = np.zeros(len(thetas))
    for k, th in enumerate(thetas):
        if mask[k]:
            continue
        A, C = p.faces(th)
        st = fv.DiffusionStencil(grid, A)
        rhs = st.source(p.boundary(th)) + fv.divergence_of_drift(grid, C)
        diag = -st.diagonal
        if np.any(diag <= 0):
            raise ContractError(f"elliptic operator singular at theta={th:.6g}")
        U, hist = pcg(lambda v: -st.apply(v), rhs, diag=diag, rtol=p.cg_rtol)
        values[k] = U
        bn = float(np.linalg.norm(rhs))
        residuals[k] = float(np.linalg.norm(-st.apply(U) - rhs)) / bn if bn > 0 else 0.0
    first_active = int(np.flatnonzero(~mask)[0])
    n = len(thetas)
    for s in range(1, n + 1):
        k = (first_active + s) % n
        if mask[k]:
            values[k] = values[(k - 1) % n]
    return PeriodicProfile(
        grid=grid,
        thetas=thetas,
        values=values,
        threshold_flags=mask,
        elliptic_residuals=residuals,
        problem=p,
    )


# ---------------------------------------------------------------------------
# diagnostics


def norm_certificates(profile: PeriodicProfile, with_t_derivative=False, t_step=1e-4) -> dict:
    """Discrete versions of the norms bounded in the cell-problem estimates.

    All theta-averages are rectangle sums over the periodic nodes.  The
    ``dS/dt`` norm perturbs the frozen parameter ``t``; it is exactly zero
    when neither the forcing nor the boundary data depend on ``t``.
    """
    grid = profile.grid
    V = profile.values
    n = len(V)
    h = 1.0 / n
    l2 = np.array([fv.l2_norm(grid, v) for v in V])
    h1 = np.array([fv.h1_seminorm(grid, v) for v in V])
    dth = np.array([fv.l2_norm(grid, (V[k] - V[k - 1]) / h) for k in range(n)])
    p = profile.problem
    ones = FaceField.constant(grid, 1.0)
    lap = []
    for k, v in enumerate(V):
        g = p.boundary(profile.thetas[k]) if p is not None else Boundary.zero(grid)
        lap.append(fv.l2_norm(grid, fv.divergence_of_diffusive_flux(grid, ones, v, g)))
    lap = np.array(lap)
    out = {
        "L2sharp_L2": float(np.sqrt(np.mean(l2**2))),
        "L2sharp_H1": float(np.sqrt(np.mean(l2**2 + h1**2))),
        "Linf_L2": float(np.max(l2)),
        "Linf_H1": float(np.max(np.sqrt(l2**2 + h1**2))),
        "L2sharp_dtheta": float(np.sqrt(np.mean(dth**2))),
        "L2sharp_laplacian": float(np.sqrt(np.mean(lap**2))),
        "sup_abs_mass": float(max(abs(fv.mass(grid, v)) for v in V)),
        "periodic_residual": float(profile.periodic_residual),
    }
    if with_t_derivative and p is not None:
        if p.forcing.depends_on_t or p.coefficients is not None:
            shifted = _solve_periodic(replace(p, t=p.t + t_step), initial=V[0])
            out["Linf_dt_L2"] = max(fv.l2_norm(grid, (a - b) / t_step) for a, b in zip(shifted.values, V))
        else:
            out["Linf_dt_L2"] = 0.0
    return out


def stationary_robin_solution(grid: Grid, A: FaceField, C: FaceField, g: Boundary, rtol=1e-12):
    """Solve ``-div(A grad U) = div(C)`` with ``dU/dn + U = g``."""
    st = fv.DiffusionStencil(grid, A)
    rhs = st.source(g) + fv.divergence_of_drift(grid, C)
    U, _ = pcg(lambda v: -st.apply(v), rhs, diag=-st.diagonal, rtol=rtol)
    return U
