"""Monte Carlo laboratory and exact oracle for supercritical oriented bond percolation."""

__version__ = "0.1.0"

from .exceptions import (  # noqa: E402
    InfeasibleEnumerationError,
    InsufficientDataError,
    PercolabError,
    RegimeError,
    WindowViolationError,
)
from .lattice import (  # noqa: E402
    BondRealization,
    Site,
    WetRow,
    check_self_duality,
    enumerate_exact,
    evolve_coupled,
    exact_law,
    size_law,
    step,
    survival,
)
from .processes import (  # noqa: E402
    TrialBatch,
    TrialRecord,
    coupling_check,
    run_trial,
    run_trials,
    tau_scan,
)
from .estimators import (  # noqa: E402
    EstimateSet,
    PercolationEstimator,
    estimate_alpha,
    estimate_rho,
    estimate_sigma2,
    fit_exponential_tail,
    sample_nu,
)
from .clt import ClusterSizeStandardizer, SampleBatch, build_batch, compare_scalings, ks_distance  # noqa: E402
from .assoc import (  # noqa: E402
    AssociatedSequenceSpec,
    RandomIndexSpec,
    anscombe_check,
    check_association_exhaustive,
    maximal_inequality_check,
    random_index_clt,
)
