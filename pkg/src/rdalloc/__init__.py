"""Rate allocation among deep-feature streams on a fitted exponential
rate-distortion surface."""

from .allocate import (
    Allocation,
    StreamStats,
    allocate_clipped,
    allocate_closed_form,
    allocate_equal,
    allocate_proportional,
    compare_methods,
)
from .distortion import (
    RateVector,
    SurfaceParams,
    TaskPerformance,
    WeightVector,
    eval_surface,
    surface_gradient,
    task_distortion,
    total_distortion,
)
from .errors import (
    DegenerateDesignError,
    ParseError,
    RdError,
    TooFewSamplesError,
    UndefinedValueError,
    UnsupportedDimensionError,
)
from .fit import FitOptions, FitReport, RdSample, fit_surface, r_squared, residual_stats
from .synthetic import (
    SamplingPlan,
    SyntheticTaskModel,
    build_rd_samples,
    generate_task_performances,
    grid_search_allocation,
)

__version__ = "0.1.0"
