"""Discriminant of Hill's equation by Walsh-function recursion, with oracles."""

__version__ = "0.1.0"

from .discriminant import (  # noqa: E402
    DiscriminantResult,
    Method,
    NumericError,
    SingularityError,
    discriminant_direct,
    discriminant_recursive,
    discriminant_triangular,
    singularity_guard,
    transition_sample,
)
from .excitation import (  # noqa: E402
    Constant,
    Cosine,
    CosineSum,
    HillProblem,
    SampledTable,
    SquareWave,
    parse_excitation,
)
from .oracles import (  # noqa: E402
    constant_coeff_delta,
    lyapunov_terms,
    monodromy,
    piecewise_constant_delta,
)
from .stability import (  # noqa: E402
    Axis,
    classify,
    grid_scan,
    interlacing_scan,
    transition_contours,
)
