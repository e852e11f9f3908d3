"""Multimode non-Gaussian state simulation and Wigner-negativity detection.

The package covers the full pipeline: random physical covariance matrices,
analytic Wigner functions of photon-added/subtracted Gaussian states, exact
homodyne sampling, histogram featurization, a from-scratch neural-network
classifier, and iterative maximum-likelihood tomography as the benchmark.
"""

from .gaussian import (
    GaussianStateSpec,
    StateSpecConfig,
    apply_loss,
    assemble_covariance,
    sample_haar_symplectic_orthogonal,
    sample_state_spec,
    symplectic_form,
)
from .wigner import (
    DegenerateSubtractionError,
    MarginalForm,
    NonGaussianOp,
    WignerForm,
    attenuate,
    build_wigner_form,
    marginal,
    mode_axis_vector,
    photon_op_matrix,
    wigner_at,
    wigner_min,
)
from .sampling import (
    EnvelopeFailureError,
    PhaseProtocol,
    QuadratureBatch,
    draw_phase_protocol,
    inject_loss_replacement,
    sample_joint_quadratures,
    sample_vacuum_quadratures,
)
from .features import (
    Dataset,
    LabeledExample,
    bin_quadratures,
    default_cutoff,
    filter_cutoff_band,
    label_state,
    load_dataset,
    save_dataset,
    split_dataset,
)
from .mlp import (
    AdamState,
    EvalMetrics,
    MlpModel,
    TrainConfig,
    adam_step,
    classify,
    evaluate,
    forward,
    grid_search,
    init_model,
    loss_and_gradient,
    precision_recall_curve,
    roc_curve,
    train,
)
from .maxlik import (
    FockDensityMatrix,
    maxlik_classify,
    maxlik_reconstruct,
    maxlik_wmin,
    quadrature_amplitudes,
    wmin_parity,
)

__version__ = "0.1.0"
