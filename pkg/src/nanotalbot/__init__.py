"""Near-field (Talbot-Lau) interference of dielectric nanospheres behind an optical phase grating."""

__version__ = "0.1.0"

from .decoherence import (
    CSL,
    DecoherenceModel,
    Environment,
    c6,
    collision_rate,
    csl_bound,
    reduction_emission,
    reduction_static,
    total_reduction,
)
from .dynamics import (
    FringePattern,
    SourceState,
    Timeline,
    carpet,
    detection_probability,
    fringe_pattern,
    fringe_shift,
    point_source_validity,
    talbot_time,
    trap_readout,
    trap_state,
    visibility_sin,
)
from .errors import (
    BranchPointWarning,
    NanotalbotError,
    NumericError,
    QuadratureWarning,
    SingularityError,
    SpectrumError,
    SpectrumRangeWarning,
    UnsupportedMaterialError,
    ValidityWarning,
    VisibilityError,
)
from .grating import (
    GratingPulse,
    coeff_classical,
    coeff_coherent,
    coeff_scattering,
    coeff_with_absorption,
    phase_amplitude,
    talbot_coefficients,
)
from .materials import Material, Particle, load_spectrum, optical_response, silica, silicon
from .thermal import Phase, ThermalTimeline, equilibrium_temperature, evolve_temperature, heating_rhs
