"""Output-filter-aware FIR noise-transfer-function design for delta-sigma
modulators, with gain-bound verification and nonlinear loop simulation."""

from .design import DesignSpec, DesignResult, EvaluationReport, evaluate_ntf, run_design, sweep_orders
from .errors import (
    BoundViolationError,
    CausalityError,
    ConditioningError,
    DegenerateFilterError,
    EvaluationError,
    InvalidSpecError,
    NtfForgeError,
    SolverError,
    TruncationOverflowError,
)
from .filters import (
    FilterSpec,
    FrequencyGrid,
    ImpulseResponse,
    RationalFilter,
    design_filter,
    frequency_response,
    impulse_response,
    polynomial_roots,
)
from .kyp import (
    BoundedRealCertificate,
    CanonicalRealization,
    LmiSystem,
    assemble_lmi,
    canonical_realization,
    grid_gain_max,
    schur_equivalence_check,
    verify_bounded_real,
)
from .modsim import (
    ModTrace,
    NtfFir,
    Quantizer,
    SnrReport,
    expected_snr,
    loop_filters_from_ntf,
    make_test_signal,
    measure_snr,
    simulate,
)
from .objective import (
    NoiseBudget,
    QMatrix,
    ReducedObjective,
    build_q_matrix,
    merit_integrand,
    reduce_objective,
    sigma2_h,
    sigma2_inband,
)
from .sdp import SdpProblem, SdpSolution, SolverSettings, extract_ntf, solve

__version__ = "0.1.0"
