"""Preference-guided multi-objective Bayesian optimization toolkit."""

__version__ = "0.1.0"

from .acquisitions import (  # noqa: F401
    AcqOptimizerConfig,
    McConfig,
    eubo,
    gi,
    incumbent,
    maximize_eubo,
    maximize_gi,
    maximize_qeiuu,
    qeiuu,
)
from .benchmarks import (  # noqa: F401
    BenchmarkProblem,
    ReferenceFront,
    dh1,
    dtlz1,
    dtlz2,
    evaluate_benchmark,
    get_problem,
    reference_front,
)
from .errors import (  # noqa: F401
    ConfigError,
    FactorizationError,
    InputError,
    MetricError,
    NumericalError,
    PubmoboError,
)
from .kernels import KernelSpec, kernel_eval  # noqa: F401
from .linalg import AugmentableInverse, CholeskyFactor, augment_inverse, cholesky  # noqa: F401
from .local_gd import (  # noqa: F401
    GdConfig,
    SimplexWeights,
    frank_wolfe,
    gd_step,
    local_gradient_descent,
    mgda_direction,
)
from .metrics import (  # noqa: F401
    best_utility_pareto_point,
    dist_to_front,
    mann_whitney_one_sided,
    utility_regret,
)
from .orchestrator import (  # noqa: F401
    RunConfig,
    RunState,
    RunTrace,
    SimulatedUser,
    initialize,
    run,
    run_iteration,
    simulate_run,
)
from .outcome_gp import Dataset, GradientPosterior, HyperPriors, OutcomeModel, fit  # noqa: F401
from .pduf import (  # noqa: F401
    PdufSpec,
    UtilityOracle,
    l1_utility,
    make_centers,
    pduf_eval,
    simulated_user,
)
from .preference_gp import (  # noqa: F401
    ComparisonRecord,
    PreferenceModel,
    PreferencePriors,
    fit_preferences,
)
from .sampling import sobol_points  # noqa: F401
