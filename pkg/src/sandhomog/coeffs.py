"""Flux laws, tidal forcing and the assembled transport coefficients.

The sand flux laws ``g_a`` (diffusive part) and ``g_c`` (drift part) are
smooth functions of the water speed.  The tide supplies a velocity field
``U(t, tau, theta, x)`` and a height variation ``M(t, tau, theta, x)``, both
1-periodic in the fast variables.  From them we build

    A_eps = a (1 - b f(eps) M) g_a(|U|)
    C_eps = c (1 - b f(eps) M) g_c(|U|) U / |U|

with ``f(eps) = eps`` for the short and long regimes and ``sqrt(eps)`` for
the mean regime, together with the two-scale limits ``A_tilde = a g_a(|U|)``
and ``C_tilde = c g_c(|U|) U/|U|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

REGIMES = ("short", "mean", "long")


# ---------------------------------------------------------------------------
# smooth ramps


def smoothstep3(s):
    """Cubic smoothstep on [0, 1], clamped outside."""
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def _smoothstep3_inverse(y):
    # closed-form inverse of 3s^2 - 2s^3 on [0, 1]
    return 0.5 - math.sin(math.asin(1.0 - 2.0 * y) / 3.0)


def smoothstep7(s):
    """Septic smoothstep: C^3 at both ends, so flat to third order at 0."""
    s = np.clip(s, 0.0, 1.0)
    s4 = s**4
    return s4 * (35.0 - 84.0 * s + 70.0 * s * s - 20.0 * s**3)


def _soft_floor(s):
    # Antiderivative of smoothstep7 from 0: zero for s <= 0, s - 1/2 for s >= 1.
    s = np.asarray(s, dtype=float)
    c = np.clip(s, 0.0, 1.0)
    inner = c**5 * (7.0 - 14.0 * c + 10.0 * c * c - 2.5 * c**3)
    return np.where(s >= 1.0, s - 0.5, inner)


# ---------------------------------------------------------------------------
# flux laws


@dataclass(frozen=True)
class FluxLaw:
    """Smoothstep flux law.

    ``g_a(u) = d * sigma((u - u0) / ramp_width)`` where ``sigma`` is the cubic
    smoothstep mapped onto [-1, 1].  ``u0`` is fixed so that
    ``g_a(u_thr) == g_thr``.  ``g_a`` vanishes identically for
    ``u <= u0 - ramp_width``, which is the degenerate window.
    ``g_c(u) = g_a(u) u^2 / (u^2 + u_thr^2)``.
    """

    d: float = 5.0
    u_thr: float = 1.0
    g_thr: float = 2.5
    ramp_width: float = 0.8
    u0: float = field(init=False)

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError(f"d must be positive, got {self.d}")
        if not self.u_thr > 0:
            raise ValueError(f"u_thr must be positive, got {self.u_thr}")
        if not self.ramp_width > 0:
            raise ValueError(f"ramp_width must be positive, got {self.ramp_width}")
        if not self.g_thr > 0:
            raise ValueError(f"g_thr must be positive, got {self.g_thr}")
        if self.g_thr > self.d:
            raise ValueError(f"g_thr={self.g_thr} exceeds the bound d={self.d}")
        s = _smoothstep3_inverse(self.g_thr / self.d)
        object.__setattr__(self, "u0", self.u_thr - self.ramp_width * (2.0 * s - 1.0))

    @classmethod
    def unchecked(cls, d=5.0, u_thr=1.0, g_thr=2.5, ramp_width=0.8):
        """Build without the parameter checks, so a validator can report them.

        ``u0`` is calibrated with ``g_thr / d`` clipped to [0, 1].
        """
        law = object.__new__(cls)
        for k, v in dict(d=d, u_thr=u_thr, g_thr=g_thr, ramp_width=ramp_width).items():
            object.__setattr__(law, k, float(v))
        s = _smoothstep3_inverse(min(max(g_thr / d, 0.0), 1.0))
        object.__setattr__(law, "u0", u_thr - ramp_width * (2.0 * s - 1.0))
        return law

    @property
    def foot(self):
        """Speed below which ``g_a`` (and ``g_c``) vanish identically."""
        return self.u0 - self.ramp_width

    def ga(self, u):
        u = _nonnegative(u)
        out = self.d * smoothstep3(0.5 * ((u - self.u0) / self.ramp_width + 1.0))
        return out if np.ndim(out) else float(out)

    def gc(self, u):
        u = _nonnegative(u)
        damp = u * u / (u * u + self.u_thr**2)
        out = self.ga(u) * damp
        return out if np.ndim(out) else float(out)


def _nonnegative(u):
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or not np.all(np.isfinite(u)):
        raise ValueError("flux laws are defined for finite u >= 0 only")
    return u


def eval_ga(law: FluxLaw, u):
    return law.ga(u)


def eval_gc(law: FluxLaw, u):
    return law.gc(u)


# ---------------------------------------------------------------------------
# tidal forcing


@dataclass(frozen=True)
class TidalForcing:
    """Sinusoidal tide with an optional freeze below a speed level.

    The signed along-flow speed is

        s = (mean_flow . direction + u_peak w(tau) sin(2 pi theta)) m(x)

    with ``w(tau) = 1 + spring_neap sin(2 pi tau)`` in the mean regime and 1
    otherwise.  When ``freeze`` is set, ``s`` is replaced by the C^3 soft floor
    ``level + width * rho((s - level) / width)``, which equals ``level``
    wherever ``s <= level``; the height ``M = m_peak chi cos(2 pi theta)``
    carries the matching activity weight ``chi`` so it is constant there too.

    In the long regime the velocity is ``U0(theta) + eps U1 + eps^2 U2`` and the
    height ``M1(theta) + eps^2 M2``; ``U0`` and ``M1`` are the fields above
    without spatial modulation, the optional callables ``u1(theta, x, y)``,
    ``u2(t, theta, x, y)`` and ``m2(t, theta, x, y)`` supply the rest.
    """

    regime: str = "short"
    u_peak: float = 0.6
    m_peak: float = 0.15
    mean_flow: tuple = (1.4, 0.0)
    direction: tuple = (1.0, 0.0)
    theta_alpha: float = 0.1
    theta_omega: float = 0.4
    spatial_modulation: Optional[Callable] = None
    freeze: bool = True
    freeze_level: float = 1.0
    freeze_width: float = 0.5
    spring_neap: float = 0.15
    tide_period: float = 1.0
    extent: tuple = (1.0, 1.0)
    u1: Optional[Callable] = None
    u2: Optional[Callable] = None
    m2: Optional[Callable] = None

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if self.u_peak < 0:
            raise ValueError("u_peak must be nonnegative")
        if self.m_peak < 0:
            raise ValueError("m_peak must be nonnegative")
        if not (0.0 <= self.theta_alpha <= 1.0 and 0.0 <= self.theta_omega <= 1.0):
            raise ValueError("theta_alpha and theta_omega must lie in [0, 1]")
        if not self.theta_alpha < self.theta_omega:
            raise ValueError(
                f"need theta_alpha < theta_omega, got "
                f"{self.theta_alpha} >= {self.theta_omega}"
            )
        dnorm = math.hypot(*self.direction)
        if abs(dnorm - 1.0) > 1e-12:
            raise ValueError(f"direction must be a unit vector, |direction|={dnorm}")
        if self.freeze and not self.freeze_width > 0:
            raise ValueError("freeze_width must be positive")
        if not self.tide_period > 0:
            raise ValueError("tide_period must be positive")
        object.__setattr__(self, "mean_flow", tuple(float(v) for v in self.mean_flow))
        object.__setattr__(self, "direction", tuple(float(v) for v in self.direction))
        object.__setattr__(self, "extent", tuple(float(v) for v in self.extent))

    @property
    def depends_on_t(self):
        return self.regime == "long" and (self.u2 is not None or self.m2 is not None)

    def _check_domain(self, x, y):
        lx, ly = self.extent
        tol = 1e-12 * max(lx, ly)
        if (
            np.any(x < -tol)
            or np.any(x > lx + tol)
            or np.any(y < -tol)
            or np.any(y > ly + tol)
        ):
            raise ValueError(f"point outside the domain [0,{lx}]x[0,{ly}]")

    def _speed_and_weight(self, s):
        if not self.freeze:
            return s, np.ones_like(s)
        y = (s - self.freeze_level) / self.freeze_width
        return self.freeze_level + self.freeze_width * _soft_floor(y), smoothstep7(y)

    def evaluate(self, t, tau, theta, x, y, epsilon=0.0):
        """Return ``(ux, uy, m)`` broadcast over the inputs."""
        t, tau, theta, x, y = np.broadcast_arrays(
            *(np.asarray(v, dtype=float) for v in (t, tau, theta, x, y))
        )
        self._check_domain(x, y)
        phase = np.mod(theta / self.tide_period, 1.0)
        dx, dy = self.direction
        along = self.mean_flow[0] * dx + self.mean_flow[1] * dy
        swing = np.sin(2.0 * np.pi * phase)
        if self.regime == "mean":
            swing = swing * (1.0 + self.spring_neap * np.sin(2.0 * np.pi * np.mod(tau, 1.0)))
        s = along + self.u_peak * swing
        if self.spatial_modulation is not None and self.regime != "long":
            s = s * self.spatial_modulation(x, y)
        speed, chi = self._speed_and_weight(s)
        ux = dx * speed
        uy = dy * speed
        m = self.m_peak * chi * np.cos(2.0 * np.pi * phase)
        if self.regime == "long":
            if self.u1 is not None:
                v1x, v1y = self.u1(theta, x, y)
                ux = ux + epsilon * v1x
                uy = uy + epsilon * v1y
            if self.u2 is not None:
                v2x, v2y = self.u2(t, theta, x, y)
                ux = ux + epsilon**2 * v2x
                uy = uy + epsilon**2 * v2y
            if self.m2 is not None:
                m = m + epsilon**2 * self.m2(t, theta, x, y)
        return ux, uy, m

    def sup_height(self, n=257):
        """Sampled sup of |M| over one period (and the spatial modulation)."""
        lx, ly = self.extent
        th = np.linspace(0.0, 1.0, n)
        tau = np.linspace(0.0, 1.0, 17) if self.regime == "mean" else np.zeros(1)
        xs = np.linspace(0.0, lx, 9)
        ys = np.linspace(0.0, ly, 9)
        T, TA, TH, X, Y = np.meshgrid([0.0], tau, th, xs, ys, indexing="ij")
        _, _, m = self.evaluate(T, TA, TH, X, Y)
        return float(np.max(np.abs(m)))


def eval_forcing(f: TidalForcing, t, tau, theta, x, epsilon=0.0):
    """Velocity (2-vector) and height at a single point ``x = (x1, x2)``."""
    ux, uy, m = f.evaluate(t, tau, theta, x[0], x[1], epsilon=epsilon)
    return np.array([float(ux), float(uy)]), float(m)


# ---------------------------------------------------------------------------
# coefficients


@dataclass(frozen=True)
class ModelConstants:
    a: float = 1.0
    b: float = 1.0
    c: float = 0.5
    epsilon: float = 1.0 / 16.0
    nu: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("a must be positive")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.nu < 0 or self.mu < 0:
            raise ValueError("nu and mu must be nonnegative")


@dataclass(frozen=True)
class CoefficientSample:
    A: float
    C: np.ndarray
    A_tilde: float
    C_tilde: np.ndarray


def eps_factor(regime, epsilon):
    return math.sqrt(epsilon) if regime == "mean" else epsilon


def check_constants(consts: ModelConstants, f: TidalForcing):
    """Raise unless ``eps |b| sup|M| < 1`` (keeps A_eps nonnegative)."""
    margin = eps_factor(f.regime, consts.epsilon) * abs(consts.b) * f.sup_height()
    if margin >= 1.0:
        raise ValueError(
            f"eps*|b|*sup|M| = {margin:.4g} >= 1; the diffusivity could turn negative"
        )


def _direction(ux, uy, speed):
    # U/|U| with the convention 0 at |U| = 0 (g_c vanishes there anyway)
    safe = np.where(speed > 0, speed, 1.0)
    return np.where(speed > 0, ux / safe, 0.0), np.where(speed > 0, uy / safe, 0.0)


def coefficient_arrays(consts, law, f, t, tau, theta, x, y):
    """Vectorised coefficients: ``(A, Cx, Cy, A_tilde, Ctx, Cty)``.

    The limits are evaluated at eps = 0, which for the long regime reduces the
    velocity to ``U0(theta)``.
    """
    eps = consts.epsilon
    ux, uy, m = f.evaluate(t, tau, theta, x, y, epsilon=eps)
    speed = np.hypot(ux, uy)
    damp = 1.0 - consts.b * eps_factor(f.regime, eps) * m
    nx_, ny_ = _direction(ux, uy, speed)
    A = consts.a * damp * law.ga(speed)
    gc = law.gc(speed)
    Cx = consts.c * damp * gc * nx_
    Cy = consts.c * damp * gc * ny_

    if f.regime == "long":
        ux0, uy0, _ = f.evaluate(t, tau, theta, x, y, epsilon=0.0)
        speed0 = np.hypot(ux0, uy0)
    else:
        ux0, uy0, speed0 = ux, uy, speed
    n0x, n0y = _direction(ux0, uy0, speed0)
    At = consts.a * law.ga(speed0)
    gc0 = law.gc(speed0)
    return A, Cx, Cy, At, consts.c * gc0 * n0x, consts.c * gc0 * n0y


def face_coefficients(consts, law, f, grid, t, tau, theta, limit=False):
    """Diffusivity and drift on the faces of ``grid`` as ``(A, C)`` FaceFields.

    ``limit=True`` returns the two-scale limits instead of the eps-coefficients.
    """
    from .grid import FaceField

    out = []
    for k, (X, Y) in enumerate((grid.x_faces(), grid.y_faces())):
        A, Cx, Cy, At, Ctx, Cty = coefficient_arrays(consts, law, f, t, tau, theta, X, Y)
        if limit:
            A, Cx, Cy = At, Ctx, Cty
        out.append((np.broadcast_to(A, X.shape).copy(), (Cx if k == 0 else Cy) * np.ones(X.shape)))
    (ax, cx), (ay, cy) = out
    return FaceField(ax, ay), FaceField(cx, cy)


def assemble_coefficients(consts, law, f, t, tau, theta, x) -> CoefficientSample:
    A, Cx, Cy, At, Ctx, Cty = coefficient_arrays(consts, law, f, t, tau, theta, x[0], x[1])
    return CoefficientSample(
        A=float(A),
        C=np.array([float(Cx), float(Cy)]),
        A_tilde=float(At),
        C_tilde=np.array([float(Ctx), float(Cty)]),
    )


# ---------------------------------------------------------------------------
# hypothesis validation


@dataclass
class Violation:
    check: str
    where: dict
    margin: float

    def __str__(self):
        loc = ", ".join(f"{k}={v:.6g}" for k, v in self.where.items())
        return f"{self.check}: margin {self.margin:.3e} at ({loc})"


@dataclass
class ValidationReport:
    violations: list
    g_thr_tilde: float
    n_samples: int

    @property
    def ok(self):
        return not self.violations

    def lines(self):
        out = [
            f"samples: {self.n_samples}",
            f"violations: {len(self.violations)}",
            f"empirical G_thr_tilde (inf of A_eps on the active window): {self.g_thr_tilde:.12g}",
        ]
        out.extend(str(v) for v in self.violations)
        return out


def _first(mask, grids, names):
    idx = np.unravel_index(np.argmax(mask), mask.shape)
    return {n: float(g[idx]) for n, g in zip(names, grids)}


def _check_law(law: FluxLaw, out: list):
    if law.g_thr > law.d:
        out.append(Violation("G_thr <= d", {"G_thr": law.g_thr}, law.g_thr - law.d))
    u = np.linspace(0.0, 10.0 * law.u_thr, 10_000)
    ga = law.ga(u)
    gc = law.gc(u)
    for name, bad, margin in (
        ("g_c >= 0", gc < 0, -gc),
        ("g_c <= g_a", gc > ga, gc - ga),
        ("g_a <= d", ga > law.d, ga - law.d),
    ):
        if np.any(bad):
            i = int(np.argmax(margin))
            out.append(Violation(name, {"u": u[i]}, float(margin[i])))
    above = u >= law.u_thr
    short = law.g_thr - ga[above]
    if np.any(short > 0):
        i = int(np.argmax(short))
        out.append(Violation("g_a(u) >= G_thr for u >= U_thr", {"u": u[above][i]}, float(short[i])))
    if law.gc(0.0) != 0.0:
        out.append(Violation("g_c(0) = 0", {"u": 0.0}, abs(law.gc(0.0))))
    ratios = [abs(law.gc(h)) / h for h in (1e-4, 1e-5, 1e-6)]
    if not (ratios[2] <= ratios[1] <= ratios[0] and (ratios[0] == 0.0 or ratios[2] < ratios[0])):
        out.append(Violation("g_c'(0) = 0 (|g_c(h)/h| decreasing)", {"h": 1e-6}, ratios[2]))
    du = u[1] - u[0]
    for name, g in (("g_a", ga), ("g_c", gc)):
        slope = np.abs(g[2:] - g[:-2]) / (2.0 * du)
        if slope.max() > law.d:
            i = int(np.argmax(slope))
            out.append(Violation(f"|{name}'| <= d", {"u": u[i + 1]}, float(slope[i] - law.d)))


def validate_hypotheses(
    law: FluxLaw,
    f: TidalForcing,
    sample_density: int = 64,
    consts: Optional[ModelConstants] = None,
    fd_step: float = 1e-6,
) -> ValidationReport:
    """Sample the flux law and the forcing and list every violated hypothesis.

    Violations are returned, never raised.  The report also carries the
    empirical ``G_thr_tilde``: the infimum of ``A_eps`` over the declared
    active window ``[theta_alpha, theta_omega]``.
    """
    if sample_density < 16:
        raise ValueError("sample_density must be at least 16")
    consts = consts or ModelConstants()
    out: list = []
    _check_law(law, out)

    lx, ly = f.extent
    n = sample_density
    ns = max(4, n // 8)
    theta = (np.arange(n) + 0.5) / n
    xs = (np.arange(ns) + 0.5) / ns * lx
    ys = (np.arange(ns) + 0.5) / ns * ly
    ts = np.array([0.0, 0.37, 1.3])
    taus = (np.arange(ns) + 0.5) / ns if f.regime == "mean" else np.zeros(1)
    grids = np.meshgrid(ts, taus, theta, xs, ys, indexing="ij")
    names = ("t", "tau", "theta", "x", "y")
    T, TA, TH, X, Y = grids
    eps = consts.epsilon

    def fields(t, tau, th, x, y):
        ux, uy, m = f.evaluate(t, tau, th, x, y, epsilon=eps)
        A = coefficient_arrays(consts, law, f, t, tau, th, x, y)[0]
        return ux, uy, m, A

    ux, uy, m, A = fields(T, TA, TH, X, Y)
    speed = np.hypot(ux, uy)

    # periodicity in theta (and tau in the mean regime)
    shifts = [("theta", (T, TA, TH + 1.0, X, Y))]
    if f.regime == "mean":
        shifts.append(("tau", (T, TA + 1.0, TH, X, Y)))
    for name, args in shifts:
        sx, sy, sm, _ = fields(*args)
        scale = np.maximum(1.0, np.maximum(np.hypot(ux, uy), np.abs(m)))
        dev = np.maximum(np.hypot(sx - ux, sy - uy), np.abs(sm - m)) / scale
        if dev.max() > 1e-12:
            out.append(Violation(f"1-periodic in {name}", _first(dev == dev.max(), grids, names), float(dev.max())))

    # finite-difference partials
    h = fd_step
    partials = {}
    for k, name in enumerate(names):
        if name == "tau" and f.regime != "mean":
            continue
        plus = list(grids)
        minus = list(grids)
        plus[k] = grids[k] + h
        minus[k] = grids[k] - h
        if name in ("x", "y"):
            # keep the stencil inside the domain
            hi = lx if name == "x" else ly
            plus[k] = np.minimum(plus[k], hi)
            minus[k] = np.maximum(minus[k], 0.0)
        width = plus[k] - minus[k]
        fp = fields(*plus)
        fm = fields(*minus)
        partials[name] = [(a - b) / width for a, b in zip(fp, fm)]

    bounds = [("|U|", speed), ("|M|", np.abs(m))]
    for name, (dux, duy, dm, _) in partials.items():
        bounds.append((f"|dU/d{name}|", np.hypot(dux, duy)))
        bounds.append((f"|dM/d{name}|", np.abs(dm)))
    for name, val in bounds:
        if val.max() > law.d:
            out.append(Violation(f"{name} <= d", _first(val == val.max(), grids, names), float(val.max() - law.d)))

    # freeze below threshold
    frozen = speed <= law.u_thr
    if np.any(frozen):
        for name, (dux, duy, dm, dA) in partials.items():
            for label, val, tol in (
                (f"dU/d{name} = 0 where |U| <= U_thr", np.hypot(dux, duy), 1e-10),
                (f"dM/d{name} = 0 where |U| <= U_thr", np.abs(dm), 1e-10),
                (f"dA_eps/d{name} = 0 where |U| <= U_thr", np.abs(dA), 1e-8 * law.d),
            ):
                bad = frozen & (val > tol)
                if np.any(bad):
                    worst = np.where(bad, val, -np.inf)
                    out.append(Violation(label, _first(worst == worst.max(), grids, names), float(worst.max())))

    # active window
    wth = np.linspace(f.theta_alpha, f.theta_omega, n)
    wgrids = np.meshgrid(ts, taus, wth, xs, ys, indexing="ij")
    wux, wuy, _, wA = fields(*wgrids)
    wspeed = np.hypot(wux, wuy)
    short = law.u_thr - wspeed
    if np.any(short > 0):
        out.append(Violation("|U| >= U_thr on [theta_alpha, theta_omega]", _first(short == short.max(), wgrids, names), float(short.max())))

    return ValidationReport(
        violations=out,
        g_thr_tilde=float(wA.min()),
        n_samples=int(T.size + wgrids[0].size),
    )


# ---------------------------------------------------------------------------
# shipped defaults


def default_flux_law() -> FluxLaw:
    return FluxLaw()


@dataclass(frozen=True)
class BumpModulation:
    """``1 + amplitude sin(pi x / lx) sin(pi y / ly)``: a current speeding up over a dune."""

    amplitude: float = 0.1
    lx: float = 1.0
    ly: float = 1.0

    def __call__(self, x, y):
        return 1.0 + self.amplitude * np.sin(np.pi * x / self.lx) * np.sin(np.pi * y / self.ly)


def default_forcing(regime="short", law: Optional[FluxLaw] = None, **overrides) -> TidalForcing:
    """Default tide; short and mean regimes get a :class:`BumpModulation`."""
    law = law or default_flux_law()
    kw = dict(regime=regime, freeze_level=law.u_thr)
    if regime != "long":
        ext = overrides.get("extent", (1.0, 1.0))
        kw["spatial_modulation"] = BumpModulation(0.1, *ext)
    kw.update(overrides)
    return TidalForcing(**kw)


def default_constants(**overrides) -> ModelConstants:
    return ModelConstants(**overrides)
