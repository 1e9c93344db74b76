"""Exact pure-dephasing dynamics of an oscillator energy-coupled to an oscillator bath."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    BathMode,
    DensityMatrix,
    FiniteBath,
    GammaSeries,
    OhmicSpectralDensity,
    SystemSpec,
    Temperature,
    ValidationError,
    validate,
)
from .finite_bath import (  # noqa: E402
    detect_periodicity,
    gamma_finite,
    gamma_finite_series,
    rationalize,
    verify_recurrence,
)
from .continuum import (  # noqa: E402
    QuadratureConfig,
    gamma_decomposition,
    gamma_high_temperature,
    gamma_quadrature,
    gamma_short_time,
    gamma_therm_closed,
    gamma_vac_closed,
)
from .evolution import DephasingMap, coherence_l1, dephase, exponent_scaling_check  # noqa: E402
