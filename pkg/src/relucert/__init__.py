"""Certified gradient-descent training for deep ReLU networks.

The package trains deep ReLU networks with full-batch gradient descent on the
square loss, computes a global-convergence certificate from the data and the
initial weights, audits every invariant of that guarantee during training, and
verifies the supporting matrix inequalities on random instances.
"""

from .analysis import (
    BoundCheck,
    NtkReport,
    TrialDims,
    assemble_ntk,
    check_descent_identity,
    check_feature_lipschitz_bound,
    check_gradient_norm_bound,
    check_ntk_bound,
)
from .certificate import (
    Certificate,
    LambdaStarEstimate,
    ScaleSearchError,
    allowance_schedule,
    compute_certificate,
    estimate_lambda_star,
    search_init_scale,
    suggest_lr,
)
from .config import ConfigError, ExperimentConfig, load_config, parse_config, serialize_config
from .initializers import (
    Dataset,
    InitScheme,
    generate_sphere_data,
    init_lecun,
    init_lecun_deep,
    init_scaled,
    substream,
)
from .linalg import (
    ConvergenceError,
    frobenius_norm,
    jacobi_eigenvalues,
    matmul,
    smallest_singular_value,
    spectral_norm,
    sym_eig_min,
)
from .network import (
    Architecture,
    FeatureCache,
    GradientSet,
    Params,
    forward,
    gradients,
    jacobian_block,
    loss,
)
from .trainer import (
    DescentAudit,
    DivergenceError,
    IterationRecord,
    TrainTrace,
    descent_audit,
    gd_step,
    train,
)

__version__ = "0.1.0"
