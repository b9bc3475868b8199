"""Incomplete quantum process tomography with maximum-likelihood-maximum-entropy
estimation and adaptive input-state selection."""

from .channels import (
    ChoiOperator,
    KrausSet,
    apply_channel,
    builtin_channel,
    channel_entropy,
    channel_from_spec,
    choi_from_kraus,
    imperfect_cnot,
    maximally_mixed_choi,
    noisy_cnot,
    random_channel,
    unitary_channel,
)
from .linalg import (
    Spectrum,
    eig_hermitian,
    hermitianize,
    partial_trace,
    spectral_map,
    tensor,
    trace_norm,
)
from .mlme import (
    MlmeConfig,
    SolverReport,
    extremal_residual,
    information,
    log_likelihood,
    mlme_solve,
    mlme_step,
    w0_correction,
    w_operator,
)
from .tomography import (
    InputEnsemble,
    Pom,
    TomographyData,
    probabilities,
    product_sic_pom,
    qubit_tetrahedron,
    random_pom,
    sample_counts,
    sic_inputs,
    standard_product_inputs,
)

__version__ = "0.1.0"
