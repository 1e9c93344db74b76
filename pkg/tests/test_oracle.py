import math

import numpy as np
import pytest
from scipy.linalg import expm

from dephasim.finite_bath import gamma_finite_series
from dephasim.model import DensityMatrix, FiniteBath, GammaSeries, SystemSpec
from dephasim.oracle import (
    DimensionBudgetExceeded,
    GridMismatch,
    OracleResult,
    OracleScenario,
    Propagator,
    TruncationInadequate,
    build_hamiltonian,
    compare,
    evolve_exact,
    initial_universe,
    number_op,
    partial_trace_bath,
    thermal_mode_state,
)

PLUS = DensityMatrix.pure([1, 1])


def scenario(lams, omegas, cutoffs, kT=0.0, dim=2, rho=None, times=(0.0, 1.0), **kw):
    rho = rho or DensityMatrix.pure(np.ones(dim))
    return OracleScenario(SystemSpec(1.0, dim), FiniteBath.from_arrays(lams, omegas),
                          tuple(cutoffs), kT, rho, np.asarray(times), **kw)


def test_decoupled_hamiltonian_is_diagonal():
    scn = OracleScenario(SystemSpec(1.0, 2), FiniteBath.from_arrays([0.0], [2.0]), (2,), 0.0,
                         PLUS, [0.0])
    assert np.array_equal(build_hamiltonian(scn), np.diag([0.0, 2.0, 1.0, 3.0]))


def test_coupling_matrix_elements():
    scn = scenario([0.1], [2.0], [2])
    h = build_hamiltonian(scn)
    # ordering |n, k>: index = 2 n + k
    assert h[3, 2] == pytest.approx(0.1, abs=1e-16)
    assert h[1, 0] == 0.0
    assert np.max(np.abs(h - h.T)) <= 1e-14


def test_number_sector_conserved():
    scn = scenario([0.05, 0.02], [1.0, 1.7], [4, 3], dim=3)
    h = build_hamiltonian(scn)
    ns = np.kron(number_op(3), np.eye(12))
    assert np.max(np.abs(h @ ns - ns @ h)) == 0.0


def test_thermal_states():
    assert np.array_equal(thermal_mode_state(1.3, 0.0, 5), np.diag([1.0, 0, 0, 0, 0]))
    rho = thermal_mode_state(1.0, 1 / math.log(2), 2)
    assert np.allclose(np.diag(rho), [2 / 3, 1 / 3], rtol=1e-15)
    p = np.diag(thermal_mode_state(0.7, 2.0, 9))
    assert np.all(np.diff(p) < 0)
    assert p.sum() == pytest.approx(1.0, abs=1e-15)


def test_partial_trace_of_product():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(3, 3)); a = a @ a.T; a /= np.trace(a)
    b = rng.normal(size=(4, 4)); b = b @ b.T; b /= np.trace(b)
    assert np.allclose(partial_trace_bath(np.kron(a, b), 3, 4), a, atol=1e-15)


def test_propagator_matches_expm():
    scn = scenario([0.05, 0.04], [1.0, math.sqrt(2)], [5, 5], dim=3)
    h = build_hamiltonian(scn)
    prop = Propagator(h)
    for t in (0.3, 4.0, 10.0):
        assert np.max(np.abs(prop.unitary(t) - expm(-1j * h * t))) < 1e-12
    assert prop.residual < 1e-12


def test_uncoupled_bath_keeps_magnitudes():
    scn = scenario([0.0, 0.0], [1.0, 2.2], [3, 3], dim=3, times=np.linspace(0, 7, 9))
    res = evolve_exact(scn)
    assert np.allclose(np.abs(res.states), np.abs(scn.rho_s0.entries)[None], atol=1e-12)
    zero = GammaSeries(scn.times, np.zeros(9), "zero")
    assert compare(res, zero) < 1e-12


def test_single_mode_against_analytic_rate():
    times = np.array([0.0, 1.0, math.pi, 10.0])
    scn = scenario([0.05], [1.0], [12], times=times, rho=PLUS)
    res = evolve_exact(scn)
    expected = 0.5 * np.exp(-0.0025 * (1 - np.cos(times)))
    assert np.allclose(np.abs(res.states[:, 0, 1]), expected, atol=1e-6, rtol=0)
    assert np.allclose(res.states[:, 0, 0].real, 0.5, atol=1e-10)
    g = gamma_finite_series(scn.bath, scn.system, 0.0, times)
    assert compare(res, g) < 1e-6


def test_mixed_run_conserves_spectrum():
    rng = np.random.default_rng(11)
    g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    rho_s = g @ g.conj().T
    rho_s = DensityMatrix(rho_s / np.trace(rho_s).real)
    scn = scenario([0.05], [1.0], [12], kT=0.5, rho=rho_s)
    rho_u0 = initial_universe(scn)
    prop = Propagator(build_hamiltonian(scn))
    w0 = np.linalg.eigvalsh(rho_u0)
    ns = np.kron(number_op(2), np.eye(12))
    for t in (0.5, 3.0, 9.0):
        rho_t = prop.evolve_density(rho_u0, t)
        assert abs(np.trace(rho_t) - 1) < 1e-10
        assert np.max(np.abs(np.linalg.eigvalsh(rho_t) - w0)) < 1e-8
        assert abs(np.trace(ns @ rho_t) - np.trace(ns @ rho_u0)) < 1e-10
    res = evolve_exact(scn)
    assert res.method == "density-matrix"
    assert np.allclose(np.diagonal(res.states, axis1=1, axis2=2), np.diag(rho_s.entries), atol=1e-10)


def test_truncation_doubling_is_stable():
    times = np.linspace(0, 10, 15)
    bath = ([0.05, 0.04], [1.0, math.sqrt(2)])
    g = gamma_finite_series(FiniteBath.from_arrays(*bath), SystemSpec(1.0, 3), 0.0, times)
    d6 = compare(evolve_exact(scenario(*bath, [6, 6], dim=3, times=times)), g)
    d12 = compare(evolve_exact(scenario(*bath, [12, 12], dim=3, times=times)), g)
    assert abs(d6 - d12) < 1e-5


def test_truncation_detected():
    with pytest.raises(TruncationInadequate) as exc:
        evolve_exact(scenario([0.8], [1.0], [3], times=[0.0, math.pi]))
    assert exc.value.result is not None


def test_budget_enforced():
    with pytest.raises(DimensionBudgetExceeded):
        evolve_exact(scenario([0.01], [1.0], [200], kT=0.5))
    with pytest.raises(DimensionBudgetExceeded):
        evolve_exact(scenario([0.01, 0.01], [1.0, 2.0], [40, 40], dim=3))


def test_grid_mismatch():
    scn = scenario([0.01], [1.0], [4])
    res = evolve_exact(scn)
    with pytest.raises(GridMismatch):
        compare(res, GammaSeries([0.0, 2.0], [0.0, 0.0], "x"))


def test_result_dict_round_trip():
    res = evolve_exact(scenario([0.03], [1.0], [6], times=[0.0, 0.5, 2.0]))
    back = OracleResult.from_dict(res.to_dict())
    assert np.array_equal(back.states, res.states)
    assert back.rho_s0 == res.rho_s0
