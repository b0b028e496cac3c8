import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sandhomog import coeffs
from sandhomog.coeffs import FluxLaw, ModelConstants, TidalForcing


def smoothstep(s):
    s = min(max(s, 0.0), 1.0)
    return 3 * s * s - 2 * s**3


def test_ga_below_foot_is_zero(law):
    assert law.foot > 0
    assert coeffs.eval_ga(law, 0.0) == 0.0
    assert coeffs.eval_ga(law, 0.5 * law.foot) == 0.0


def test_ga_calibrated_at_threshold(law):
    assert math.isclose(coeffs.eval_ga(law, law.u_thr), law.g_thr, rel_tol=1e-12)


def test_ga_direct_evaluation():
    law = FluxLaw(d=1.0, u_thr=1.0, g_thr=0.5, ramp_width=0.8)
    # g_thr / d = 1/2 puts the ramp centre exactly at u_thr
    assert math.isclose(law.u0, 1.0, abs_tol=1e-12)
    val = coeffs.eval_ga(law, 2.0)
    expected = 1.0 * smoothstep(0.5 * ((2.0 - law.u0) / 0.8 + 1.0))
    assert math.isclose(val, expected, rel_tol=1e-14)
    assert 0.5 <= val <= 1.0


def test_gc_half_at_threshold(law):
    assert math.isclose(coeffs.eval_gc(law, law.u_thr), law.g_thr / 2, rel_tol=1e-12)
    assert coeffs.eval_gc(law, 0.0) == 0.0


def test_gc_slope_at_zero_vanishes():
    # foot below zero so g_a(0) > 0 and the u^2 damping alone controls g_c near 0
    law = FluxLaw(d=5.0, u_thr=1.0, g_thr=4.9, ramp_width=0.8)
    ratios = [coeffs.eval_gc(law, h) / h for h in (1e-4, 1e-5, 1e-6)]
    assert ratios[0] > ratios[1] > ratios[2]
    assert ratios[2] < 1e-5


def test_negative_speed_rejected(law):
    with pytest.raises(ValueError):
        coeffs.eval_ga(law, -0.1)
    with pytest.raises(ValueError):
        coeffs.eval_gc(law, -1e-9)


def test_law_constructor_rejects_gthr_above_d():
    with pytest.raises(ValueError):
        FluxLaw(d=1.0, g_thr=1.5)


@settings(max_examples=40, deadline=None)
@given(
    d=st.floats(0.5, 10.0),
    frac=st.floats(0.05, 0.95),
    u_thr=st.floats(0.2, 3.0),
    width=st.floats(0.1, 2.0),
)
def test_law_invariants_hold(d, frac, u_thr, width):
    law = FluxLaw(d=d, u_thr=u_thr, g_thr=frac * d, ramp_width=width)
    u = np.linspace(0.0, 10 * u_thr, 10_000)
    ga, gc = law.ga(u), law.gc(u)
    assert np.all(gc >= 0)
    assert np.all(gc <= ga)
    assert np.all(ga <= d * (1 + 1e-15))
    assert np.all(ga[u >= u_thr] >= law.g_thr * (1 - 1e-12))
    assert np.all(np.diff(ga) >= 0)


def test_forcing_theta_periodic(short_forcing):
    th = np.linspace(0, 1, 17)
    a = short_forcing.evaluate(0.3, 0.0, th, 0.4, 0.6)
    b = short_forcing.evaluate(0.3, 0.0, th + 1.0, 0.4, 0.6)
    for u, v in zip(a, b):
        assert np.allclose(u, v, rtol=1e-12, atol=0)


def test_forcing_quarter_period_speed():
    f = TidalForcing(regime="long", u_peak=0.6, mean_flow=(1.4, 0.0), freeze=False)
    vel, _ = coeffs.eval_forcing(f, 0.0, 0.0, 0.25, (0.5, 0.5))
    assert math.isclose(np.hypot(*vel), 2.0, rel_tol=1e-14)


def test_long_regime_at_zero_eps_is_leading_order():
    f = coeffs.default_forcing(
        "long", u1=lambda th, x, y: (np.ones_like(x), np.zeros_like(x)), m2=lambda t, th, x, y: x
    )
    plain = coeffs.default_forcing("long")
    for th in (0.1, 0.55):
        a = f.evaluate(0.2, 0.0, th, 0.3, 0.7, epsilon=0.0)
        b = plain.evaluate(0.2, 0.0, th, 0.3, 0.7)
        assert np.allclose(a, b, rtol=0, atol=0)
    shifted = f.evaluate(0.2, 0.0, 0.1, 0.3, 0.7, epsilon=0.1)
    assert math.isclose(float(shifted[0]) - float(plain.evaluate(0.2, 0.0, 0.1, 0.3, 0.7)[0]), 0.1, rel_tol=1e-12)


def test_forcing_outside_domain(short_forcing):
    with pytest.raises(ValueError):
        coeffs.eval_forcing(short_forcing, 0.0, 0.0, 0.0, (1.5, 0.5))


def test_forcing_rejects_reversed_window():
    with pytest.raises(ValueError):
        TidalForcing(theta_alpha=0.5, theta_omega=0.3)


def test_b_zero_gives_limit_diffusivity(law, short_forcing):
    consts = ModelConstants(b=0.0, epsilon=0.2)
    s = coeffs.assemble_coefficients(consts, law, short_forcing, 0.0, 0.0, 0.3, (0.4, 0.4))
    assert s.A == s.A_tilde


def test_zero_speed_gives_zero_drift(law):
    f = TidalForcing(u_peak=0.0, mean_flow=(0.0, 0.0), freeze=False)
    consts = ModelConstants(epsilon=0.1)
    s = coeffs.assemble_coefficients(consts, law, f, 0.0, 0.0, 0.0, (0.5, 0.5))
    assert np.all(s.C == 0.0) and np.all(s.C_tilde == 0.0)
    assert s.A == consts.a * (1 - consts.b * 0.1 * f.m_peak) * law.ga(0.0)


def test_assembled_diffusivity_arithmetic():
    # construct a speed with g_a = 0.8 and a height of 0.5
    law = FluxLaw(d=1.0, u_thr=1.0, g_thr=0.5, ramp_width=0.8)
    s_target = coeffs._smoothstep3_inverse(0.8)
    speed = law.u0 + law.ramp_width * (2 * s_target - 1)
    assert math.isclose(law.ga(speed), 0.8, rel_tol=1e-12)
    f = TidalForcing(regime="short", u_peak=0.0, m_peak=0.5, mean_flow=(speed, 0.0), freeze=False)
    s = coeffs.assemble_coefficients(ModelConstants(a=1.0, b=1.0, epsilon=0.1), law, f, 0.0, 0.0, 0.0, (0.5, 0.5))
    assert math.isclose(s.A, 0.76, rel_tol=1e-12)


def test_coefficients_theta_periodic(law, short_forcing):
    consts = ModelConstants()
    X = np.linspace(0, 1, 9)
    base = coeffs.coefficient_arrays(consts, law, short_forcing, 0.0, 0.0, 0.137, X, 0.3)
    for k in (1, 2):
        other = coeffs.coefficient_arrays(consts, law, short_forcing, 0.0, 0.0, 0.137 + k, X, 0.3)
        for a, b in zip(base, other):
            assert np.allclose(a, b, rtol=1e-12, atol=1e-300)


@pytest.mark.parametrize("regime", ["short", "mean", "long"])
def test_limit_consistency(law, regime):
    f = coeffs.default_forcing(regime, law)
    consts = ModelConstants(epsilon=0.05)
    th = np.linspace(0, 1, 65)[:, None]
    x = np.linspace(0, 1, 9)[None, :]
    A, _, _, At, _, _ = coeffs.coefficient_arrays(consts, law, f, 0.0, 0.3, th, x, 0.5)
    bound = consts.a * abs(consts.b) * coeffs.eps_factor(regime, 0.05) * f.sup_height() * law.d
    assert np.max(np.abs(A - At)) <= bound * (1 + 1e-12)


def test_constants_precondition(law):
    f = coeffs.default_forcing("short", law, m_peak=0.9)
    coeffs.check_constants(ModelConstants(epsilon=0.5, b=2.0), f)
    with pytest.raises(ValueError):
        coeffs.check_constants(ModelConstants(epsilon=0.9, b=2.0), f)


@pytest.mark.parametrize("regime", ["short", "mean", "long"])
def test_defaults_pass_validation(law, regime):
    rep = coeffs.validate_hypotheses(law, coeffs.default_forcing(regime, law), sample_density=32)
    assert rep.ok, rep.lines()
    assert rep.g_thr_tilde >= law.g_thr * (1 - 0.15 * 0.1)


def test_validation_reports_unfrozen_fields(law):
    f = coeffs.default_forcing("short", law, freeze=False, mean_flow=(0.9, 0.0))
    rep = coeffs.validate_hypotheses(law, f, sample_density=32)
    checks = {v.check for v in rep.violations}
    assert any("where |U| <= U_thr" in c for c in checks)


def test_validation_reports_nonperiodic_theta(law):
    f = coeffs.default_forcing("short", law, tide_period=0.9)
    rep = coeffs.validate_hypotheses(law, f, sample_density=32)
    assert any("periodic" in v.check for v in rep.violations)


def test_validation_reports_gthr_above_d():
    law = FluxLaw.unchecked(d=1.0, g_thr=1.5)
    rep = coeffs.validate_hypotheses(law, coeffs.default_forcing("short"), sample_density=16)
    assert any(v.check == "G_thr <= d" for v in rep.violations)


def test_validation_density_precondition(law, short_forcing):
    with pytest.raises(ValueError):
        coeffs.validate_hypotheses(law, short_forcing, sample_density=8)


def test_soft_floor_is_flat_below_level():
    s = np.linspace(-2, 0, 50)
    assert np.all(coeffs._soft_floor(s) == 0.0)
    assert np.allclose(coeffs._soft_floor(np.array([1.0, 2.0, 3.5])), [0.5, 1.5, 3.0])
