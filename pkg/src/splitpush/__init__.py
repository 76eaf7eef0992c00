"""Structure-preserving splitting integrators for charged-particle motion.

The package implements one-step maps built from exactly solvable pieces of

    q' = p/m,    p' = S(q) p + c E(q),      S(q) p = p x omega(q),

with omega = (c/m) b(q), and a harness that runs convergence sweeps,
long-time invariant tracking, and structure diagnostics over a set of
built-in field configurations.
"""

from .fields import (
    FIELD_CODES,
    FieldDomainError,
    FieldModel,
    NoPotentialError,
    ParticleParams,
    build_field,
    uniform_field,
)
from .harness import (
    BUILTIN_EXPERIMENTS,
    ConfigError,
    ExperimentConfig,
    NumericalFailure,
    ReferenceConvergenceError,
    TOOL_VERSION,
    builtin_experiment,
    config_from_dict,
    fit_loglog_slope,
    load_config,
    make_reference,
    run_check,
    run_longrun,
    run_sweep,
    write_csv,
    write_meta,
)
from .integrators import (
    COMPOSITIONS,
    DEFAULT_FP_ITERS,
    METHOD_IDS,
    Stepper,
    StepperConfig,
    Trajectory,
    UniformFieldRequired,
    integrate,
    make_stepper,
)
from .structure import (
    energy,
    invariant_I,
    magnetic_moment,
    poisson_defect,
    symmetry_defect,
    volume_defect,
)

__version__ = TOOL_VERSION

__all__ = [
    "BUILTIN_EXPERIMENTS",
    "COMPOSITIONS",
    "ConfigError",
    "DEFAULT_FP_ITERS",
    "ExperimentConfig",
    "FIELD_CODES",
    "FieldDomainError",
    "FieldModel",
    "METHOD_IDS",
    "NoPotentialError",
    "NumericalFailure",
    "ParticleParams",
    "ReferenceConvergenceError",
    "Stepper",
    "StepperConfig",
    "TOOL_VERSION",
    "Trajectory",
    "UniformFieldRequired",
    "build_field",
    "builtin_experiment",
    "config_from_dict",
    "energy",
    "fit_loglog_slope",
    "integrate",
    "invariant_I",
    "load_config",
    "magnetic_moment",
    "make_reference",
    "make_stepper",
    "poisson_defect",
    "run_check",
    "run_longrun",
    "run_sweep",
    "symmetry_defect",
    "uniform_field",
    "volume_defect",
    "write_csv",
    "write_meta",
    "__version__",
]
