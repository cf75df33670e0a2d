"""Steering witnesses, inference variances and monogamy checks for qubit, qudit and Gaussian states."""

__version__ = "0.1.0"

from .discrete import (  # noqa: E402
    InvalidStateError,
    MultipartyDensityState,
    SpinObservable,
    concurrence,
    make_bell,
    make_ghz,
    make_w,
    measure_projective,
    partial_trace,
    random_mixed_state,
    random_pure_state,
    spin,
    spin_matrices,
    uncertainty_bound,
)
from .gaussian import (  # noqa: E402
    GaussianState,
    P,
    QuadratureObservable,
    X,
    apply_beam_splitter,
    apply_loss,
    cv_ghz,
    direct_sum,
    dual_steering_network,
    random_gaussian_state,
    two_mode_squeezed,
    vacuum,
)
from .graph import SteeringGraph, build_steering_graph, export_graph, parse_graph  # noqa: E402
from .inference import InferenceResult, inf_variance_discrete, inf_variance_gaussian  # noqa: E402
from .monogamy import (  # noqa: E402
    MonogamyReport,
    check_bell_sum,
    check_chsh_moment_pair,
    check_cross_uncertainty,
    check_qubit_group_sums,
    check_R1,
    check_R2,
    check_R3,
    check_R4,
    check_R5_R6,
    check_spin_cross_sums,
)
from .witnesses import WitnessValue, bell_chsh, chsh_pair_steering, epr_E, s2, s3, s_tilde_m  # noqa: E402
