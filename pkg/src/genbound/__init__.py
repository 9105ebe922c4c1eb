"""genbound: deterministic generalization-bound certificates.

Three certificate families over one shared data layer:

- minimum-norm kernel interpolation with an exactly computed in/out
  dissimilarity (``interpolation``),
- hard-margin SVM duality, sandwich, batch, and leave-one-out bounds
  (``maxmargin``),
- quadratic-growth, metric-regularity, and localization principles for
  quadratic evaluations (``parametric``),

plus seeded Monte Carlo scenarios that average the deterministic quantities
into their distributional counterparts (``experiments``) and a CLI
(``genbound.cli``).
"""

__version__ = "0.1.0"

from .data import (  # noqa: F401
    Dataset,
    GaussianKernel,
    GramMatrix,
    KernelSpec,
    LabeledExample,
    LinearKernel,
    Point,
    PolynomialKernel,
    SplitPair,
    Task,
    gram,
    kernel_eval,
    kernel_matrix,
    load_csv,
    save_csv,
    split_by_indices,
)
from .errors import (  # noqa: F401
    ConstructionError,
    GenboundError,
    InfeasiblePrimalError,
    InvalidInputError,
    InvalidReferenceError,
    NearSingularKernelError,
    NonConvergenceError,
    NumericalError,
    SingularMatrixError,
    UnreachableLevelError,
)
from .rng import Seed, derive_seed, rng_stream  # noqa: F401
