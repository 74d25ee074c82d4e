"""Simulate and verify protocols that compress quantum Fisher information into one qubit."""

__version__ = "0.1.0"

from .states import (  # noqa: E402
    EquatorialPhase,
    MeasurementOutcome,
    StateVector,
    apply_kraus,
    apply_unitary,
    equatorial_state,
    measure_projective,
    tensor,
)
from .qfi import (  # noqa: E402
    EnergyDistribution,
    Generator,
    average_qfi,
    qcrb_variance,
    qfi_derivative,
    qfi_variance,
)
from .compression import (  # noqa: E402
    CascadeResult,
    CompressionEnsemble,
    TwoPointComponent,
    build_measurement,
    cascade_enumerate,
    cascade_sample,
    classical_register_size,
    compress,
    decompose_two_point,
    encode_to_qubit,
    two_qubit_block,
)
from .photonic import (  # noqa: E402
    FusionOutcome,
    TwoPhotonState,
    cnot_resource_model,
    fusion_gate,
    fusion_tree,
    jones_hwp,
    jones_qwp,
    pbs_transform,
)
from .estimation import (  # noqa: E402
    CountRecord,
    EstimationRecord,
    FringeModel,
    error_statistics,
    estimate_arccos,
    estimate_optimal_basis,
    fit_fringe,
    fringe_probability,
    simulate_counts,
)
