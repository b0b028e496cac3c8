import numpy as np
import pytest

from conftest import dead_forcing
from sandhomog import coeffs
from sandhomog import eps_solver as es
from sandhomog import grid as fv
from sandhomog.errors import ContractError
from sandhomog.grid import Boundary, Grid
from sandhomog.manufactured import CosineDecay


def default_problem(grid, **kw):
    law = coeffs.default_flux_law()
    params = dict(T_final=0.05)
    params.update(kw)
    consts = params.pop("consts", coeffs.default_constants())
    forcing = params.pop("forcing", coeffs.default_forcing("short", law))
    z0 = params.pop("z0", es.gaussian_bump(grid))
    return es.EpsProblem(grid, consts, law, forcing, z0, **params)


def steady_current(law):
    # speed 3 saturates g_a, so A = a d exactly; c = 0 removes the drift
    return coeffs.default_forcing("short", law, u_peak=0.0, mean_flow=(3.0, 0.0), freeze=False, m_peak=0.0,
                                  spatial_modulation=None)


def test_default_i_exponent(grid16):
    assert default_problem(grid16).i_exponent == 1
    law = coeffs.default_flux_law()
    assert default_problem(grid16, forcing=coeffs.default_forcing("long", law)).i_exponent == 2


def test_default_dt_rule(grid16):
    p = default_problem(grid16, T_final=1.0)
    assert np.isclose(p.time_step, min(0.1 / 16, 1 / 256))
    assert p.n_steps * p.time_step == pytest.approx(1.0)


def test_zero_state_is_fixed(grid16):
    law = coeffs.default_flux_law()
    p = default_problem(grid16, z0=grid16.zeros(), consts=coeffs.default_constants(c=0.0))
    z = es.step_implicit(p, grid16.zeros(), 0.0)
    assert np.all(z == 0.0)


def test_degenerate_window_freezes_exactly(grid16, rng):
    law = coeffs.default_flux_law()
    z0 = rng.normal(size=grid16.shape)
    p = default_problem(grid16, forcing=dead_forcing("short", law), z0=z0, T_final=0.2)
    z = es.step_implicit(p, z0, 0.0)
    assert np.array_equal(z, z0)
    run = es.solve(p)
    assert fv.l2_norm(grid16, run.snapshots[-1] - z0) <= 1e-12


def test_zero_horizon_keeps_only_initial(grid16):
    run = es.solve(default_problem(grid16, T_final=0.0))
    assert len(run) == 1 and np.array_equal(run.snapshots[0], run.snapshots[0])
    assert run.times.tolist() == [0.0]


def test_runs_are_deterministic(grid16):
    a = es.solve(default_problem(grid16))
    b = es.solve(default_problem(grid16))
    assert np.array_equal(a.snapshots, b.snapshots)
    for k in a.diagnostics:
        assert np.array_equal(a.diagnostics[k], b.diagnostics[k])


def test_times_increase_and_diagnostics_finite(grid16):
    run = es.solve(default_problem(grid16, store_every=3))
    assert np.all(np.diff(run.times) > 0)
    assert run.times[-1] == pytest.approx(0.05)
    for v in run.diagnostics.values():
        assert np.all(np.isfinite(v))


def test_energy_decay_without_data(grid16, rng):
    p = default_problem(grid16, consts=coeffs.default_constants(c=0.0), z0=rng.normal(size=grid16.shape))
    l2 = es.solve(p).diagnostics["l2"]
    assert np.all(np.diff(l2) <= 0)


def test_contraction_random_pairs(grid16, rng):
    g = Boundary.constant(grid16, 0.3)
    for _ in range(20):
        z1, z2 = rng.normal(size=(2,) + grid16.shape)
        r1 = es.solve(default_problem(grid16, z0=z1, g_boundary=g, T_final=1 / 64))
        r2 = es.solve(default_problem(grid16, z0=z2, g_boundary=g, T_final=1 / 64))
        dist = [fv.l2_norm(grid16, a - b) for a, b in zip(r1.snapshots, r2.snapshots)]
        assert np.all(np.diff(dist) <= 0)


def test_manufactured_solution_first_order_in_time():
    law = coeffs.default_flux_law()
    consts = coeffs.default_constants(c=0.0, epsilon=0.9)
    sol = CosineDecay(law.d / 0.9, 1.0, 1.0)
    grid = Grid(32, 32)
    errs = []
    for m in (4, 8, 16, 32):
        p = es.EpsProblem(grid, consts, law, steady_current(law), sol.on_grid(grid, 0.0), T_final=0.1,
                          dt=0.1 / m, g_boundary=lambda t: sol.robin_trace(grid, t))
        errs.append(fv.l2_norm(grid, es.solve(p).snapshots[-1] - sol.on_grid(grid, 0.1)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates >= 0.9)


def test_identity_gap_small(grid16):
    run = es.solve(default_problem(grid16, g_boundary=Boundary.constant(grid16, 0.5)))
    assert run.diagnostics["identity_gap"].max() <= 1e-10


def test_mass_conserved_with_trace_data(grid16):
    # the absolute drift is the CG residual sum, ~ rtol * |dz/dt|; the steep
    # initial bump needs one more digit than the default solver tolerance
    p = default_problem(grid16, consts=coeffs.default_constants(c=0.0), g_boundary="trace", cg_rtol=1e-11)
    rep = es.mass_balance_report(es.solve(p))
    assert rep.max_raw_drift <= 1e-10
    assert rep.max_gap <= 1e-10


def test_mass_balance_zero_run(grid16):
    p = default_problem(grid16, z0=grid16.zeros(), consts=coeffs.default_constants(c=0.0))
    rep = es.mass_balance_report(es.solve(p))
    assert np.all(rep.raw_drift == 0) and np.all(rep.flux_rate == 0) and np.all(rep.identity_gap == 0)


def test_mass_balance_needs_two_levels(grid16):
    with pytest.raises(ValueError):
        es.mass_balance_report(es.solve(default_problem(grid16, T_final=0.0)))


def test_uniform_bound_study_shapes(grid16):
    tmpl = default_problem(grid16, T_final=0.1)
    single = es.uniform_bound_study(tmpl, [0.25])
    run = es.solve(es.with_epsilon(tmpl, 0.25))
    assert single.sup_l2[0] == pytest.approx(run.diagnostics["l2"].max(), rel=0, abs=0)
    with pytest.raises(ValueError):
        es.uniform_bound_study(tmpl, [0.1, 0.2])


def test_uniform_bound_zero_data(grid16):
    law = coeffs.default_flux_law()
    tmpl = default_problem(grid16, z0=grid16.zeros(), forcing=dead_forcing("short", law), T_final=0.1)
    study = es.uniform_bound_study(tmpl, [0.25, 0.125])
    assert np.all(study.sup_l2 == 0)


def test_rejects_bad_inputs(grid16):
    with pytest.raises(ValueError):
        default_problem(grid16, z0=np.zeros((3, 3)))
    bad = grid16.zeros()
    bad[0, 0] = np.nan
    with pytest.raises(ContractError):
        default_problem(grid16, z0=bad)
    with pytest.raises(ValueError):
        default_problem(grid16, dt=-1.0)
