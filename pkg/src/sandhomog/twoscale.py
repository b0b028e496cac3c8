"""Two-scale pairings, eps-ladder convergence studies and corrector norms.

A sequence ``z_eps(t, x)`` two-scale converges to ``U(t, theta, x)`` when

    int int z_eps(t, x) psi(t, t/eps, x) dt dx
        -> int int int U(t, theta, x) psi(t, theta, x) dtheta dt dx

for every admissible ``psi``.  We test this against a finite battery of
separable functions ``psi = phi_t(t) phi_theta(theta) phi_x(x)``.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import grid as fv
from .cell_solver import (
    CellProblem,
    PeriodicProfile,
    solve_homogenized_long,
    solve_homogenized_short,
)
from .eps_solver import EpsProblem, SolveRun, solve, with_epsilon
from .errors import ContractError, SolverError
from .grid import Grid

THETA_FACTORS = ("1", "sin1", "cos1", "sin2", "cos2")
SPACE_FACTORS = ("1", "x", "y", "sinsin")


@dataclass(frozen=True)
class TestFunction:
    """Separable ``psi(t, theta, x) = t^t_power * phi_theta(theta) * phi_x(x)``.

    ``theta_factor`` is ``"1"``, ``"sinK"`` or ``"cosK"`` (meaning
    ``sin(2 pi K theta)``); ``space_factor`` is one of ``1, x, y, sinsin``.
    ``compact`` multiplies by ``sin^2(pi t / T)`` and ``sin(pi x) sin(pi y)``
    (scaled to the domain), which vanish on the boundary of ``(0,T) x Omega``.
    """

    __test__ = False  # not a pytest class

    t_power: int = 0
    theta_factor: str = "1"
    space_factor: str = "1"
    compact: bool = False

    def __post_init__(self):
        if self.t_power < 0:
            raise ValueError("t_power must be >= 0")
        _theta_spec(self.theta_factor)
        if self.space_factor not in SPACE_FACTORS:
            raise ValueError(f"space_factor must be one of {SPACE_FACTORS}")

    @property
    def psi_id(self):
        s = f"t{self.t_power}|{self.theta_factor}|{self.space_factor}"
        return s + "|c" if self.compact else s

    def phi_t(self, t, T=1.0):
        t = np.asarray(t, dtype=float)
        out = t**self.t_power
        if self.compact:
            out = out * np.sin(np.pi * t / T) ** 2
        return out

    def phi_theta(self, theta):
        kind, k = _theta_spec(self.theta_factor)
        theta = np.mod(np.asarray(theta, dtype=float), 1.0)
        if kind == "1":
            return np.ones_like(theta)
        fn = np.sin if kind == "sin" else np.cos
        return fn(2.0 * np.pi * k * theta)

    def phi_x(self, grid: Grid):
        X, Y = grid.centers()
        sf = self.space_factor
        if sf == "1":
            out = np.ones(grid.shape)
        elif sf == "x":
            out = X.copy()
        elif sf == "y":
            out = Y.copy()
        else:
            out = np.sin(np.pi * X / grid.lx) * np.sin(np.pi * Y / grid.ly)
        if self.compact and sf != "sinsin":
            out = out * np.sin(np.pi * X / grid.lx) * np.sin(np.pi * Y / grid.ly)
        return out


def _theta_spec(name):
    if name == "1":
        return "1", 0
    for kind in ("sin", "cos"):
        if name.startswith(kind) and name[3:].isdigit() and int(name[3:]) > 0:
            return kind, int(name[3:])
    raise ValueError(f"theta factor {name!r} is not '1', 'sinK' or 'cosK'")


def default_battery():
    """{1, sin 2pi theta, cos 2pi theta, sin 4pi theta} x {1, x, y, sinsin} x {1, t}."""
    return [
        TestFunction(tp, th, sp)
        for th in ("1", "sin1", "cos1", "sin2")
        for sp in SPACE_FACTORS
        for tp in (0, 1)
    ]


# ---------------------------------------------------------------------------
# pairings


def _trapezoid_weights(t):
    t = np.asarray(t, dtype=float)
    w = np.zeros_like(t)
    if len(t) > 1:
        d = np.diff(t)
        w[:-1] += 0.5 * d
        w[1:] += 0.5 * d
    return w


def pair_sequence(run: SolveRun, psi: TestFunction, epsilon) -> float:
    """Trapezoid in t, midpoint in x, ``phi_theta`` evaluated at ``t/eps mod 1``."""
    t = np.asarray(run.times, dtype=float)
    if len(t) > 1 and np.max(np.diff(t)) > epsilon / 16.0 * (1.0 + 1e-9):
        raise ContractError(
            f"snapshot spacing {np.max(np.diff(t)):.3g} exceeds eps/16 = {epsilon / 16:.3g}; "
            "the fast scale would alias"
        )
    T = t[-1] if len(t) else 0.0
    space = np.tensordot(run.snapshots, psi.phi_x(run.grid), axes=([1, 2], [0, 1])) * run.grid.cell_area
    w = _trapezoid_weights(t) * psi.phi_t(t, T if T > 0 else 1.0) * psi.phi_theta(t / epsilon)
    return float(np.dot(w, space))


@dataclass
class HomogenizedFamily:
    """Periodic profiles at slow-time nodes, linearly interpolated in t."""

    t_nodes: np.ndarray
    profiles: list

    def __post_init__(self):
        self.t_nodes = np.asarray(self.t_nodes, dtype=float)
        if len(self.t_nodes) != len(self.profiles) or not len(self.profiles):
            raise ValueError("need one profile per t node")

    def at(self, t, theta):
        if len(self.profiles) == 1:
            return self.profiles[0].at(theta)
        j = int(np.clip(np.searchsorted(self.t_nodes, t) - 1, 0, len(self.t_nodes) - 2))
        t0, t1 = self.t_nodes[j], self.t_nodes[j + 1]
        w = float(np.clip((t - t0) / (t1 - t0), 0.0, 1.0))
        return (1 - w) * self.profiles[j].at(theta) + w * self.profiles[j + 1].at(theta)


def _as_family(profile):
    if isinstance(profile, HomogenizedFamily):
        return profile
    return HomogenizedFamily(np.array([0.0]), [profile])


def pair_limit(profile, psi: TestFunction, T=1.0, n_t=257) -> float:
    """Tensor quadrature of ``U psi`` over ``(0,T) x [0,1) x Omega``.

    Rectangle rule over the periodic theta nodes, midpoint in x, trapezoid in t
    (exact in t when the profile is t-independent and ``phi_t`` is a monomial).
    """
    fam = _as_family(profile)
    p0 = fam.profiles[0]
    if p0.theta_steps < 32:
        raise ValueError("profile theta resolution must be at least 32")
    grid = p0.grid
    phx = psi.phi_x(grid)
    pth = psi.phi_theta(p0.thetas)

    def slice_integral(prof):
        space = np.tensordot(prof.values, phx, axes=([1, 2], [0, 1])) * grid.cell_area
        return float(np.mean(pth * space))

    if len(fam.profiles) == 1:
        inner = slice_integral(p0)
        if not psi.compact:
            return inner * T ** (psi.t_power + 1) / (psi.t_power + 1)
        t = np.linspace(0.0, T, n_t)
        return inner * float(np.dot(_trapezoid_weights(t), psi.phi_t(t, T)))
    t = np.linspace(0.0, T, n_t)
    vals = []
    for tk in t:
        j = int(np.clip(np.searchsorted(fam.t_nodes, tk) - 1, 0, len(fam.t_nodes) - 2))
        t0, t1 = fam.t_nodes[j], fam.t_nodes[j + 1]
        w = float(np.clip((tk - t0) / (t1 - t0), 0.0, 1.0))
        vals.append((1 - w) * slice_integral(fam.profiles[j]) + w * slice_integral(fam.profiles[j + 1]))
    return float(np.dot(_trapezoid_weights(t) * psi.phi_t(t, T), vals))


# ---------------------------------------------------------------------------
# studies


@dataclass
class TwoScaleReport:
    """Pairing table (``pairings[i, j]`` for eps_i and psi_j) and corrector norms."""

    epsilons: np.ndarray
    psi_ids: list = field(default_factory=list)
    pairings: Optional[np.ndarray] = None
    limits: Optional[np.ndarray] = None
    errors: Optional[np.ndarray] = None
    rates: Optional[np.ndarray] = None
    monotone: Optional[np.ndarray] = None
    sup_corrector: Optional[np.ndarray] = None
    corrector_ratios: Optional[np.ndarray] = None
    corrector_pairings: Optional[np.ndarray] = None

    @property
    def monotone_decrease(self):
        return None if self.monotone is None else bool(np.all(self.monotone))

    @property
    def corrector_bounded(self):
        if self.corrector_ratios is None:
            return None
        return bool(np.all(self.corrector_ratios <= 1.25))

    def summary(self):
        out = {"epsilons": [float(e) for e in self.epsilons]}
        if self.errors is not None:
            out["monotone_decrease"] = self.monotone_decrease
            out["max_abs_error_last"] = float(np.max(self.errors[-1]))
            out["rates"] = {p: _finite(r) for p, r in zip(self.psi_ids, self.rates)}
        if self.sup_corrector is not None:
            out["corrector_bounded"] = self.corrector_bounded
            out["sup_corrector_l2"] = [float(v) for v in self.sup_corrector]
            out["corrector_ratios"] = [float(v) for v in self.corrector_ratios]
        return out


def _finite(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _fit_rate(eps, err):
    m = err > 0
    if m.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(eps[m]), np.log(err[m]), 1)[0])


def _check_ladder(eps_ladder, minimum):
    eps = [float(e) for e in eps_ladder]
    if len(eps) < minimum:
        raise ValueError(f"the eps ladder needs at least {minimum} entries")
    if any(not 0 < e < 1 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("the eps ladder must be strictly decreasing inside (0, 1)")
    return np.array(eps)


def homogenized_profile(template: EpsProblem, theta_steps=128, threshold=None, t=0.0) -> PeriodicProfile:
    """The limit profile matching ``template``'s regime at slow time ``t``."""
    g = template.g_boundary
    if isinstance(g, str):
        raise ValueError("trace boundary data has no homogenized counterpart")
    if callable(g):
        g = g(t)
    cell = CellProblem(
        template.grid, template.consts, template.law, template.forcing,
        t=t, theta_steps=theta_steps, g_boundary=g, limit=True,
    )
    if template.forcing.regime == "short":
        return solve_homogenized_short(cell)
    if template.forcing.regime == "long":
        return solve_homogenized_long(cell, threshold)
    raise ValueError("two-scale studies cover the short and long regimes (tau is not resolved)")


def _fast_run(template, eps, theta_steps, z0=None):
    # dt = eps / theta_steps: 'theta = t/eps' lands on the profile's nodes
    changes = dict(dt=eps / theta_steps, store_every=1)
    if z0 is not None:
        changes["z0"] = z0
    try:
        return solve(with_epsilon(template, eps, **changes))
    except SolverError as err:
        raise SolverError(f"eps={eps:g}: {err}", err.history, err.step) from err


def _monotone_tail(err, limits, n_tail=3):
    # strictly decreasing over the last entries; exact zeros (to round-off) count as converged
    floor = 1e-10 * np.maximum(1.0, np.abs(limits))
    tail = err[-n_tail:]
    ok = np.ones(err.shape[1], dtype=bool)
    for a, b in zip(tail[:-1], tail[1:]):
        ok &= (b < a) | ((a <= floor) & (b <= floor))
    return ok


def convergence_study(template: EpsProblem, battery: Sequence[TestFunction], eps_ladder,
                      theta_steps=128, profile=None) -> TwoScaleReport:
    """Pair ``z_eps`` against the homogenized profile along an eps ladder."""
    battery = list(battery)
    if not battery:
        raise ValueError("empty test-function battery")
    eps = _check_ladder(eps_ladder, 3)
    profile = homogenized_profile(template, theta_steps) if profile is None else profile
    T = template.T_final
    limits = np.array([pair_limit(profile, psi, T) for psi in battery])
    pairings = np.zeros((len(eps), len(battery)))
    for i, e in enumerate(eps):
        run = _fast_run(template, e, theta_steps)
        pairings[i] = [pair_sequence(run, psi, e) for psi in battery]
    errors = np.abs(pairings - limits)
    return TwoScaleReport(
        epsilons=eps,
        psi_ids=[p.psi_id for p in battery],
        pairings=pairings,
        limits=limits,
        errors=errors,
        rates=np.array([_fit_rate(eps, errors[:, j]) for j in range(len(battery))]),
        monotone=_monotone_tail(errors, limits),
    )


def corrector_sequence(run: SolveRun, profile, epsilon):
    """``W_eps(t_n) = (z_eps(t_n) - U(t_n, t_n/eps)) / eps`` at every snapshot."""
    fam = _as_family(profile)
    return np.array([(z - fam.at(t, t / epsilon)) / epsilon for t, z in zip(run.times, run.snapshots)])


def corrector_study(template: EpsProblem, eps_ladder, battery=None, theta_steps=128,
                    profile=None, well_prepared=True) -> TwoScaleReport:
    """Sup-in-time L2 norms of the first-order corrector along an eps ladder.

    ``well_prepared`` starts every run from ``U(0, 0, .)``; otherwise the
    initial mismatch alone makes ``W_eps(0)`` grow like ``1/eps``.
    """
    if template.forcing.regime != "short":
        raise ValueError("the corrector study is stated for the short regime")
    eps = _check_ladder(eps_ladder, 1)
    if profile is None:
        profile = homogenized_profile(template, theta_steps)
    if not isinstance(profile, (PeriodicProfile, HomogenizedFamily)):
        raise ContractError("corrector_study needs a homogenized profile")
    battery = default_battery() if battery is None else list(battery)
    z0 = _as_family(profile).at(0.0, 0.0) if well_prepared else None
    sups = np.zeros(len(eps))
    wpair = np.zeros((len(eps), len(battery)))
    for i, e in enumerate(eps):
        run = _fast_run(template, e, theta_steps, z0)
        W = corrector_sequence(run, profile, e)
        sups[i] = max(fv.l2_norm(run.grid, w) for w in W)
        wrun = replace(run, snapshots=W)
        wpair[i] = [pair_sequence(wrun, psi, e) for psi in battery]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(sups[:-1] > 0, sups[1:] / np.where(sups[:-1] > 0, sups[:-1], 1.0), 1.0)
    return TwoScaleReport(
        epsilons=eps,
        psi_ids=[p.psi_id for p in battery],
        sup_corrector=sups,
        corrector_ratios=ratios,
        corrector_pairings=wpair,
    )


def synthetic_run(grid: Grid, times, snapshots, epsilon) -> SolveRun:
    """Wrap precomputed snapshots (e.g. closed-form fields) as a :class:`SolveRun`."""
    times = np.asarray(times, dtype=float)
    snaps = np.asarray(snapshots, dtype=float)
    diag = {"t": times, "l2": np.array([fv.l2_norm(grid, z) for z in snaps])}
    dt = float(times[1] - times[0]) if len(times) > 1 else 0.0
    return SolveRun(grid, times, snaps, diag, float(epsilon), float(epsilon), dt)


# ---------------------------------------------------------------------------
# output


def write_twoscale_csv(report: TwoScaleReport, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["psi_id", "epsilon", "pairing", "limit_pairing", "abs_error"])
        for i, e in enumerate(report.epsilons):
            for j, pid in enumerate(report.psi_ids):
                w.writerow([pid, repr(float(e)), repr(float(report.pairings[i, j])),
                            repr(float(report.limits[j])), repr(float(report.errors[i, j]))])


def write_corrector_csv(report: TwoScaleReport, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epsilon", "sup_corrector_l2", "ladder_ratio"])
        for i, e in enumerate(report.epsilons):
            ratio = "" if i == 0 else repr(float(report.corrector_ratios[i - 1]))
            w.writerow([repr(float(e)), repr(float(report.sup_corrector[i])), ratio])


def write_summary(summary: dict, path):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def oscillating_perturbation(grid: Grid):
    """``V(t, theta, x) = (1 + t) cos(2 pi theta) sin(pi x) sin(pi y)``, a bounded fixture."""
    X, Y = grid.centers()
    shape = np.sin(np.pi * X / grid.lx) * np.sin(np.pi * Y / grid.ly)
    return lambda t, theta: (1.0 + t) * np.cos(2.0 * np.pi * theta) * shape


def synthetic_corrector_study(template: EpsProblem, eps_ladder, theta_steps=128, profile=None,
                              perturbation=None) -> TwoScaleReport:
    """Corrector study on ``z_eps = U(t, t/eps) + eps V(t, t/eps)`` built in closed form.

    The measured ``sup ||W_eps||`` must reproduce ``sup ||V||`` for every eps.
    """
    eps = _check_ladder(eps_ladder, 1)
    if profile is None:
        profile = homogenized_profile(template, theta_steps)
    fam = _as_family(profile)
    grid = fam.profiles[0].grid
    V = oscillating_perturbation(grid) if perturbation is None else perturbation
    sups = np.zeros(len(eps))
    for i, e in enumerate(eps):
        n = max(1, round(template.T_final * theta_steps / e))
        times = np.arange(n + 1) * (template.T_final / n)
        snaps = [fam.at(t, t / e) + e * V(t, t / e) for t in times]
        W = corrector_sequence(synthetic_run(grid, times, snaps, e), profile, e)
        sups[i] = max(fv.l2_norm(grid, w) for w in W)
    ratios = sups[1:] / np.where(sups[:-1] > 0, sups[:-1], 1.0)
    return TwoScaleReport(epsilons=eps, sup_corrector=sups, corrector_ratios=ratios)
