import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sandhomog import grid as fv
from sandhomog.errors import ContractError
from sandhomog.grid import Boundary, FaceField, Grid
from sandhomog.manufactured import CosineDecay


def random_data(grid, rng):
    A = FaceField(rng.random((grid.nx + 1, grid.ny)), rng.random((grid.nx, grid.ny + 1)))
    C = FaceField(rng.normal(size=(grid.nx + 1, grid.ny)), rng.normal(size=(grid.nx, grid.ny + 1)))
    g = Boundary(rng.normal(size=grid.ny), rng.normal(size=grid.ny), rng.normal(size=grid.nx), rng.normal(size=grid.nx))
    return A, rng.normal(size=grid.shape), g, C


def test_grid_rejects_tiny():
    with pytest.raises(ValueError):
        Grid(4, 16)


def test_constant_field_with_matching_data(grid16):
    z = np.full(grid16.shape, 3.0)
    out = fv.divergence_of_diffusive_flux(grid16, FaceField.constant(grid16, 2.0), z, Boundary.constant(grid16, 3.0))
    assert np.allclose(out, 0.0, atol=1e-12)


def test_linear_field_interior(grid16):
    X, _ = grid16.centers()
    out = fv.divergence_of_diffusive_flux(grid16, FaceField.constant(grid16, 1.0), X, Boundary.zero(grid16))
    assert np.allclose(out[1:-1, 1:-1], 0.0, atol=1e-10)


def test_quadratic_second_difference(grid16):
    X, _ = grid16.centers()
    out = fv.divergence_of_diffusive_flux(grid16, FaceField.constant(grid16, 1.0), X**2, Boundary.zero(grid16))
    assert np.allclose(out[1:-1, 1:-1], 2.0, rtol=1e-10)


def test_negative_diffusivity_is_contract_error(grid16):
    A = FaceField.constant(grid16, 1.0)
    A.x[3, 3] = -1e-3
    with pytest.raises(ContractError):
        fv.divergence_of_diffusive_flux(grid16, A, grid16.zeros(), Boundary.zero(grid16))


def test_drift_divergence_examples(grid16):
    Xf, _ = grid16.x_faces()
    _, Yf = grid16.y_faces()
    uniform = FaceField.constant(grid16, 0.7)
    assert np.allclose(fv.divergence_of_drift(grid16, uniform), 0.0, atol=1e-12)
    lin = FaceField(Xf.copy(), np.zeros((16, 17)))
    assert np.allclose(fv.divergence_of_drift(grid16, lin), 1.0)
    quad = FaceField(np.zeros((17, 16)), Yf**2)
    _, Y = grid16.centers()
    d = fv.divergence_of_drift(grid16, quad)
    assert np.allclose(d, 2 * Y, rtol=1e-12)


def test_boundary_flux_trivial_cases(grid16, rng):
    z = rng.normal(size=grid16.shape)
    A = FaceField.constant(grid16, 1.3)
    zero = FaceField.constant(grid16, 0.0)
    assert abs(fv.boundary_flux_integral(grid16, A, z, Boundary.trace(grid16, z), zero)) < 1e-13
    assert abs(fv.boundary_flux_integral(grid16, zero, z, Boundary.zero(grid16), FaceField.constant(grid16, 0.4))) < 1e-13


@settings(max_examples=100, deadline=None)
@given(nx=st.integers(8, 32), ny=st.integers(8, 32), seed=st.integers(0, 2**31 - 1))
def test_discrete_green_identity(nx, ny, seed):
    rng = np.random.default_rng(seed)
    grid = Grid(nx, ny, lx=rng.uniform(0.5, 2), ly=rng.uniform(0.5, 2))
    A, z, g, C = random_data(grid, rng)
    total = (fv.divergence_of_diffusive_flux(grid, A, z, g) + fv.divergence_of_drift(grid, C)).sum() * grid.cell_area
    flux = fv.boundary_flux_integral(grid, A, z, g, C)
    scale = max(abs(flux), sum(np.abs(t).sum() for t in fv.boundary_flux_terms(grid, A, z, g, C)))
    assert abs(total - flux) <= 1e-12 * scale


def test_stencil_matches_operator(rng):
    grid = Grid(12, 9, lx=1.3, ly=0.7)
    A, z, g, _ = random_data(grid, rng)
    st_ = fv.DiffusionStencil(grid, A)
    assert np.allclose(st_.apply(z) + st_.source(g), fv.divergence_of_diffusive_flux(grid, A, z, g), atol=1e-10)


def test_stencil_is_symmetric(rng):
    grid = Grid(8, 10)
    A, _, _, _ = random_data(grid, rng)
    st_ = fv.DiffusionStencil(grid, A)
    u, v = rng.normal(size=grid.shape), rng.normal(size=grid.shape)
    assert np.isclose(np.vdot(u, st_.apply(v)), np.vdot(st_.apply(u), v), rtol=1e-12)
    assert np.vdot(u, st_.apply(u)) < 0


def test_norms_of_constant_and_zero():
    grid = Grid(10, 10)
    z = np.full(grid.shape, -2.5)
    assert np.isclose(fv.mass(grid, z), -2.5)
    assert np.isclose(fv.l2_norm(grid, z), 2.5)
    assert fv.h1_seminorm(grid, z) == 0.0
    zero = grid.zeros()
    assert fv.mass(grid, zero) == fv.l2_norm(grid, zero) == fv.h1_seminorm(grid, zero) == 0.0


def test_sine_l2_norm_converges():
    errs = []
    for n in (8, 16, 32):
        grid = Grid(n, n)
        X, _ = grid.centers()
        errs.append(abs(fv.l2_norm(grid, np.sin(2 * np.pi * X)) - 1 / np.sqrt(2)))
    assert errs[-1] < 1e-12 or errs[-1] < errs[0] / 10


def test_robin_elimination_consistency():
    # with g built from the exact solution the boundary rows are O(h) accurate
    sol = CosineDecay(1.0, np.pi, np.pi, 0.3, -0.2)
    errs = []
    for n in (16, 32, 64):
        grid = Grid(n, n)
        z = sol.on_grid(grid, 0.0)
        d = fv.divergence_of_diffusive_flux(grid, FaceField.constant(grid, 1.0), z, sol.robin_trace(grid, 0.0))
        errs.append(np.abs(d + 2 * np.pi**2 * z).max())
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 0.9)


def test_dirichlet_mode_uses_boundary_values():
    grid = Grid(16, 16, boundary_kind="dirichlet")
    X, _ = grid.centers()
    g = Boundary.from_function(grid, lambda x, y: x)
    out = fv.divergence_of_diffusive_flux(grid, FaceField.constant(grid, 1.0), X, g)
    assert np.allclose(out, 0.0, atol=1e-9)


def test_field_roundtrip(tmp_path, rng):
    grid = Grid(9, 11, lx=2.0, ly=0.5)
    z = rng.normal(size=grid.shape)
    path = tmp_path / "f.csv"
    fv.save_field(path, grid, z)
    assert path.read_text().splitlines()[0] == "# nx,ny,lx,ly"
    dims, back = fv.load_field(path)
    assert dims == (9, 11, 2.0, 0.5)
    assert np.array_equal(back, z)
