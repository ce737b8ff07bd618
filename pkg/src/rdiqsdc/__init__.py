"""Single-photon RDI QSDC simulator and secrecy-capacity analysis toolkit."""

from .adversary import (
    AttackOutcomeStats,
    BlindingAttackParams,
    attacked_distribution_literal,
    blind_and_fake,
    detection_power,
    predict_attacked_distribution,
    second_pass_intercept,
)
from .analysis import (
    CapacityParams,
    CapacityPoint,
    EfficiencyParams,
    ErrorBudget,
    binary_entropy,
    delta_theta_threshold,
    error_budget,
    error_budget_from_offsets,
    eta_threshold,
    fidelity_pair,
    fidelity_threshold,
    max_distance,
    practical_efficiency,
    secrecy_capacity,
    sweep,
)
from .devices import (
    EMPTY_READOUT,
    ChannelNoiseModel,
    DetectionOutcome,
    DetectorModel,
    LinkBudget,
    LossSite,
    NoiseMode,
    PhotonRecord,
    StorageLoop,
    detect,
    encode_photon,
    memory_efficiency,
    transmit,
)
from .protocol import (
    Announcements,
    BasisPolicy,
    BasisPolicyMode,
    EstStat,
    MessageFrame,
    OffsetDistribution,
    ProtocolParams,
    ProtocolResult,
    ProtocolRun,
    ProtocolViolation,
    Round2Mode,
    SecurityCheckReport,
    SequenceLedger,
    TranscriptStats,
    hoeffding_tolerance,
    run_full_protocol,
    summary_record,
    write_transcript,
)
from .qstate import (
    BasisConfig,
    ChannelRotation,
    EncodeOp,
    Measurement,
    PureState,
    apply_encode,
    apply_rotation,
    outcome_probability,
    prepare,
    sample_outcome,
    state_fidelity,
    states_close,
)
from .seeding import stream

__version__ = "0.1.0"
