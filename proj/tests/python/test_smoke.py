import math

import numpy as np
import pytest

import subrosa as sr


@pytest.fixture(scope="module")
def grid():
    return sr.Grid([12, 12, 12])


@pytest.fixture(scope="module")
def frame(grid):
    return sr.Frame.builtin("sin-heisenberg", grid)


def test_quadrature(grid):
    uni = sr.Density.uniform(grid)
    one = sr.ScalarField.from_expression(grid, "1")
    assert sr.integrate(one, uni) == pytest.approx(1.0, abs=1e-14)
    sin2 = sr.ScalarField.from_expression(grid, "sin(2*pi*x)*sin(2*pi*x)")
    assert sr.integrate(sin2, uni) == pytest.approx(0.5, abs=1e-13)


def test_numpy_round_trip(grid):
    rng = np.random.default_rng(0)
    arr = rng.normal(size=(12, 12, 12))
    field = sr.ScalarField(grid, arr)
    assert np.array_equal(field.numpy(), arr)


def test_poisson_round_trip(grid, frame):
    uni = sr.Density.uniform(grid)
    rho = sr.ScalarField.from_expression(grid, "sin(2*pi*y) + 0.5*cos(2*pi*x)")
    u, residual, iters = sr.solve_poisson(rho, frame, uni, 1e-8)
    assert residual <= 1e-8
    back = sr.sub_laplacian(u, frame, uni).numpy()
    rel = np.linalg.norm(back - rho.numpy()) / np.linalg.norm(rho.numpy())
    assert rel <= 1e-8


def test_poisson_rejects_biased_source(grid, frame):
    uni = sr.Density.uniform(grid)
    with pytest.raises(sr.SolverError):
        sr.solve_poisson(sr.ScalarField.from_expression(grid, "1"), frame, uni, 1e-8)


def test_moser_identity(grid, frame):
    uni = sr.Density.uniform(grid)
    flow, report = sr.moser_flow(uni, sr.Density.uniform(grid), frame, steps=4)
    assert report["l2_error"] <= 1e-12
    assert np.abs(flow.log_jacobian()).max() == 0.0


def test_entropy_taylor(grid):
    nu = sr.Density.from_expression(grid, "1 + 0.1*sin(2*pi*x)")
    expected = 0.1**2 / 4 + 0.1**4 / 32
    assert sr.entropy(nu) == pytest.approx(expected, abs=1e-6)


def test_geodesic_energy(frame):
    traj = sr.exp_tau([0.1, 0.2, 0.3], [0.5, -0.4, 0.8], 1.0, frame, dt=1e-3)
    energies = traj[:, -1]
    drift = np.abs(energies - energies[0]).max() / abs(energies[0])
    assert drift <= 1e-8


def test_growth_vectors(grid, frame):
    report = sr.check_bracket_generating(frame, 3)
    assert report["bracket_generating"]
    assert report["depth_needed"] == 3
    assert report["minimal_growth"] == [2, 2, 3]


def test_heat_mass_and_entropy(grid, frame):
    nu0 = sr.Density.from_expression(grid, "1 + 0.2*sin(2*pi*y)")
    snaps = sr.heat_evolve(nu0, 5e-3, 1e-3, frame, [0.0, 5e-3])
    t0, d0 = snaps[0]
    t1, d1 = snaps[-1]
    assert d1.mass == pytest.approx(1.0, abs=1e-12)
    assert sr.entropy(d1) < sr.entropy(d0)


def test_field_io_round_trip(tmp_path, grid):
    f = sr.ScalarField.from_expression(grid, "sin(2*pi*z)")
    path = str(tmp_path / "f.srfld")
    sr.write_field(path, f)
    back = sr.read_scalar_field(path)
    assert np.array_equal(back.numpy(), f.numpy())


def test_run_experiment_growth():
    ok, summary = sr.run_experiment(
        '{"kind": "growth", "grid": {"dims": [8, 8, 8]}, "frame": "sin-heisenberg"}'
    )
    assert ok
    assert "bracket_generating" in summary
