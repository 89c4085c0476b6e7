"""spcalab: a sparse-PCA laboratory.

Solvers (restarted truncated power method and the combinatorial baselines it
supersedes), exact generators for adversarial covariance instances, and a
reproducible experiment harness, with scikit-learn style estimator wrappers.
"""

from .counterexamples import (
    BarrierReport,
    Certificate,
    CounterexampleInstance,
    RegularGraph,
    build_covthresh_instance,
    build_deflation_barrier,
    build_diagthresh_instance,
    build_greedycorr_instance,
    random_regular_graph,
    verify_barrier,
)
from .errors import (
    ConstructionError,
    DeflationError,
    FormatError,
    NumericalError,
    ParameterError,
    SpcaError,
)
from .linalg import (
    EigPair,
    eig_top_m,
    good_ortho_basis,
    householder_to,
    opnorm,
    rayleigh,
    restrict,
    sin2_angle,
    symmetrize,
    threshold_entries,
    top_r,
)
from .models import (
    CenteredCov,
    CovOperator,
    DataCov,
    Dataset,
    DenseCov,
    PlantedInstance,
    batch_covariances,
    build_spiked_general,
    build_spiked_identity,
    cov_apply,
    sample_covariance,
    sample_gaussian,
)
from .solvers import (
    CandidateVector,
    RtpmConfig,
    RtpmReport,
    cov_thresh,
    diag_thresh,
    find_gap_index,
    greedy_corr,
    kspca_deflate,
    rtpm,
    rtpm_iterate,
    rtpm_trajectory,
    rtpm_with_report,
    top_s_project,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
