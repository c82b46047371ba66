"""Semantic hypothesis testing for imaging inverse problems.

Splits a single noisy measurement into two conditionally independent
pseudo-measurements, tests natural-language hypotheses in a shared
embedding space with e-values and Markov's inequality, calibrates the
temperature, predicts power in the linearized regime, and validates
everything by Monte Carlo.
"""

from .bootstrap import (
    BootstrapConfig,
    BootstrapResult,
    bootstrap_statistics,
    equivariant_bootstrap,
    sign_test,
)
from .calibrate import CalibrationSet, calibrate_lambda, null_e_mean, tau_sweep
from .errors import SemTestError
from .etest import EValueOutcome, SoftmaxOutcome, evaluate, softmax_baseline, statistic
from .harness import (
    ReportTable,
    Scenario,
    ScenarioConfig,
    build_scenario,
    default_scenario,
    emit_report,
    parse_scenario,
    run_experiment,
)
from .operators import (
    AffineEstimator,
    CyclicShift2D,
    ExternalEstimator,
    IdentityEstimator,
    LinearSphereEncoder,
    StoredEncoder,
    affine_mmse,
    encode,
    estimate,
)
from .power import PowerSpec, closed_form_power, mc_power, normal_cdf
from .rng import child_rng, master_rng
from .split import (
    GaussianSplit,
    PoissonSplit,
    SplitPair,
    beta_to_tau,
    gaussian_split,
    poisson_split,
    tau_to_beta,
)
from .tensorio import read_embeddings, read_tensor, write_embeddings, write_tensor
from .types import (
    CovModel,
    ForwardModel,
    HypothesisPair,
    ImageVec,
    MeasurementVec,
    UnitEmbedding,
    gaussian_sample,
)

__version__ = "0.1.0"
