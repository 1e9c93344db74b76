import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dephasim.model import (
    BathMode,
    DensityMatrix,
    FiniteBath,
    GammaSeries,
    OhmicSpectralDensity,
    SystemSpec,
    Temperature,
    ValidationError,
    from_dict,
    validate,
    with_tolerances,
)

from conftest import random_density


def test_valid_mode_passes_unchanged():
    m = BathMode(0.1, 1.0)
    assert validate(m) is m


def test_negative_frequency():
    with pytest.raises(ValidationError) as exc:
        validate(BathMode(0.1, -1.0))
    assert exc.value.codes == ["NonPositiveFrequency"]


def test_cutoff_order():
    with pytest.raises(ValidationError) as exc:
        validate(OhmicSpectralDensity(1.0, 1.0, 2.0))
    assert "CutoffOrderViolation" in exc.value.codes


def test_negative_temperature():
    with pytest.raises(ValidationError) as exc:
        validate(Temperature(-0.1))
    assert exc.value.codes == ["NegativeTemperature"]


def test_every_violation_reported():
    bath = FiniteBath((BathMode(0.1, -1.0), BathMode(math.inf, 0.0)))
    with pytest.raises(ValidationError) as exc:
        validate(bath)
    assert exc.value.codes == ["NonPositiveFrequency", "NonPositiveFrequency", "NonFiniteCoupling"]


def test_density_violations():
    with pytest.raises(ValidationError) as exc:
        validate(DensityMatrix([[1.0, 0.2], [0.0, 0.5]]))
    assert set(exc.value.codes) == {"NonHermitian", "TraceNotOne"}
    with pytest.raises(ValidationError) as exc:
        validate(DensityMatrix([[1.5, 0.0], [0.0, -0.5]]))
    assert exc.value.codes == ["NotPositive"]


def test_density_tolerance_override():
    rho = DensityMatrix([[0.5 + 1e-9, 0.5], [0.5, 0.5]])
    with pytest.raises(ValidationError):
        validate(rho)
    assert validate(rho, with_tolerances(trace=1e-8)) is rho


def test_density_matrix_is_immutable():
    rho = DensityMatrix(np.eye(2) / 2)
    with pytest.raises(ValueError):
        rho.entries[0, 0] = 1.0


def test_series_rules():
    validate(GammaSeries([0.0, 1.0], [0.0, 0.3], "x"))
    with pytest.raises(ValidationError) as exc:
        validate(GammaSeries([0.0, 0.0], [1e-30, -1.0], "x"))
    assert {"NonMonotonicGrid", "NegativeGamma", "NonZeroAtOrigin"} <= set(exc.value.codes)


def test_system_dim():
    with pytest.raises(ValidationError) as exc:
        validate(SystemSpec(1.0, 1))
    assert exc.value.codes == ["InvalidDimension"]


def test_validation_idempotent(rng):
    values = [SystemSpec(2.0, 4), BathMode(0.0, 3.0), Temperature(0.0),
              OhmicSpectralDensity(0.5, 10.0, 0.1), random_density(rng, 4)]
    for v in values:
        assert validate(validate(v)) == v


finite = st.floats(min_value=1e-300, max_value=1e300, allow_nan=False, allow_infinity=False)


@given(lam=st.floats(allow_nan=False, allow_infinity=False), omega=finite, kT=finite,
       c=finite, up=finite)
def test_json_round_trip_is_exact(lam, omega, kT, c, up):
    objs = [
        ("BathMode", BathMode(lam, omega)),
        ("Temperature", Temperature(kT)),
        ("OhmicSpectralDensity", OhmicSpectralDensity(c, up, up / 2)),
        ("FiniteBath", FiniteBath((BathMode(lam, omega), BathMode(-lam, up)))),
        ("SystemSpec", SystemSpec(omega, 5)),
    ]
    for kind, obj in objs:
        assert from_dict(kind, json.loads(json.dumps(obj.to_dict()))) == obj


def test_density_json_round_trip(rng):
    rho = random_density(rng, 5)
    back = from_dict("DensityMatrix", json.loads(json.dumps(rho.to_dict())))
    assert back == rho
