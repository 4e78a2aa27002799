"""Linear Stark effect on spectral holes: line shapes, simulation, fitting and CRIB planning."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    Amorphous,
    BroadeningParam,
    Crystal,
    DipoleAngle,
    ElectricField,
    Frequency,
    HoleWidth,
    LorentzFactor,
    StarkCoefficient,
    f_bar_from,
    kappa_from_f_bar,
    lorentz_factor,
    maxwell_pdf,
    stark_shift,
)
from .errors import (  # noqa: E402
    BoundaryWarning,
    DegenerateDataError,
    DomainError,
    FitError,
    NoSolutionError,
    PreconditionError,
    QuadratureError,
    StarkHoleError,
)
from .lineshape import HoleShapeQuery, hole_fwhm, hole_shape, hole_shape_curve  # noqa: E402
from .oracle import EnsembleSpec, mc_hole_shape, sample_shift  # noqa: E402
from .fitting import (  # noqa: E402
    FieldSweep,
    HoleProfile,
    extract_stark_amorphous,
    extract_stark_crystal,
    fit_broadened,
    fit_lorentzian,
    linfit_origin,
    reversibility_check,
)
from .expsim import PRESETS, ScanConfig, field_from_voltage, simulate_scan, simulate_sweep  # noqa: E402
from .cribplan import (  # noqa: E402
    CribTarget,
    amorphous_field_plan,
    bandwidth_from_duration,
    crystal_field_plan,
    polarity_reversal_map,
)
