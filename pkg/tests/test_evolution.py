import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dephasim.evolution import (
    DephasingMap,
    NoOffDiagonalSupport,
    coherence_l1,
    dephase,
    exponent_ratios,
    exponent_scaling_check,
)
from dephasim.model import DensityMatrix, validate

from conftest import random_density

PLUS = DensityMatrix(0.5 * np.ones((2, 2)))


def test_identity_at_zero():
    assert dephase(PLUS, 0.0) == PLUS


def test_half_decay():
    out = dephase(PLUS, DephasingMap(math.log(2)))
    assert np.allclose(out.entries, [[0.5, 0.25], [0.25, 0.5]], atol=1e-16)


def test_cat_state_quadratic_exponent():
    rho0 = DensityMatrix.pure([1, 0, 1])
    out = dephase(rho0, math.log(2) / 4)
    assert out.entries[0, 2] == pytest.approx(0.25, rel=1e-15)


def test_negative_gamma_rejected():
    with pytest.raises(ValueError):
        DephasingMap(-0.1)


def test_coherence_l1():
    assert coherence_l1(DensityMatrix(np.diag([0.2, 0.8]))) == 0.0
    assert coherence_l1(PLUS) == pytest.approx(1.0)
    assert coherence_l1(dephase(PLUS, math.log(2))) == pytest.approx(0.5)


def test_scaling_check_three_level():
    rep = exponent_scaling_check(DensityMatrix(np.full((3, 3), 1 / 3)), 0.3)
    assert rep["ok"]
    assert sorted(rep["ratios"]) == [(0, 1), (0, 2), (1, 2)]
    assert all(abs(r - 0.3) < 1e-10 for r in rep["ratios"].values())
    rep0 = exponent_scaling_check(DensityMatrix(np.full((3, 3), 1 / 3)), 0.0)
    assert all(r == 0.0 for r in rep0["ratios"].values())


def test_scaling_check_needs_support():
    with pytest.raises(NoOffDiagonalSupport):
        exponent_scaling_check(PLUS, 0.2)
    with pytest.raises(NoOffDiagonalSupport):
        exponent_scaling_check(DensityMatrix(np.eye(3) / 3), 0.2)


def test_ratios_skip_empty_pairs():
    rho = DensityMatrix([[0.5, 0.0, 0.5], [0.0, 0.0, 0.0], [0.5, 0.0, 0.5]])
    assert list(exponent_ratios(rho, dephase(rho, 0.1))) == [(0, 2)]


gammas = st.floats(min_value=0.0, max_value=30.0)


@settings(max_examples=100)
@given(seed=st.integers(0, 2 ** 32 - 1), dim=st.integers(2, 8), g=gammas)
def test_dephase_preserves_state_properties(seed, dim, g):
    rho0 = random_density(np.random.default_rng(seed), dim)
    out = dephase(rho0, g)
    validate(out)
    assert np.array_equal(np.diag(out.entries), np.diag(rho0.entries))


@given(seed=st.integers(0, 2 ** 32 - 1), g1=gammas, g2=gammas)
def test_semigroup(seed, g1, g2):
    rho0 = random_density(np.random.default_rng(seed), 5)
    twice = dephase(dephase(rho0, g1), g2).entries
    once = dephase(rho0, g1 + g2).entries
    # exp(-a) exp(-b) vs exp(-(a+b)) differ only by rounding of the exponent,
    # relative error ~ (n-m)^2 (a+b) * eps <= 1e-12 here; the absolute floor
    # only covers entries that underflow into subnormals
    assert np.allclose(twice, once, rtol=1e-12, atol=1e-300)
    assert np.array_equal(np.diag(twice), np.diag(once))


@given(seed=st.integers(0, 2 ** 32 - 1), g1=gammas, g2=gammas)
def test_coherence_monotone(seed, g1, g2):
    rho0 = random_density(np.random.default_rng(seed), 4)
    lo, hi = sorted((g1, g2))
    assert coherence_l1(dephase(rho0, hi)) <= coherence_l1(dephase(rho0, lo)) + 1e-15


@given(seed=st.integers(0, 2 ** 32 - 1), g=st.floats(0.0, 5.0))
def test_exponent_scaling_random(seed, g):
    rho0 = random_density(np.random.default_rng(seed), 6)
    assert exponent_scaling_check(rho0, g)["max_deviation"] < 1e-10
