"""Group-owner negotiation study kit: protocol, defenses, simulator.

The package splits into five layers:

* ``commitment``: hash commitments to a nonce, intent value, and tie bit,
  plus the XOR coin flip they implement.
* ``protocol``: wire codecs for vendor elements and attributes, the
  owner-election rule, and the three negotiation handshakes.
* ``learning``: sliding-window peer profiles and the naive-Bayes
  classifier that scores peers as fair or hostile.
* ``simulation``: deterministic discrete-event battery simulator for
  device populations under tie-bit and quit attacks.
* ``cli``: experiment presets, config parsing, and CSV emission.
"""

from .commitment import (
    Commitment,
    CommitmentMismatch,
    Opening,
    coin_flip,
    commit,
    decode_opening,
    preimage,
    random_nonce,
    verify,
    verify_or_raise,
)
from .protocol import (
    AbortPhase,
    DecodeError,
    GoNegotiationConfirmation,
    GoNegotiationRequest,
    GoNegotiationResponse,
    IntentValue,
    LengthMismatch,
    NegotiationMode,
    NegotiationOutcome,
    OutcomeKind,
    P2pAttribute,
    Party,
    PayloadTooLong,
    Probe,
    TieBreakerBit,
    Truncated,
    VendorIe,
    compat_tie_bit_attr,
    decide_go,
    decode_vendor_ie,
    encode_p2p_attributes,
    negotiate,
    parse_p2p_attributes,
    tie_commitment_attr,
    tie_commitment_ie,
    tie_opening_attr,
)
from .learning import (
    ATTACKER_MASS_THRESHOLD,
    FAIRNESS_THRESHOLD,
    Band,
    ClockRegression,
    Cpt,
    DEFAULT_CPT,
    DEFAULT_PRIOR,
    DailyBucket,
    DegenerateDistribution,
    Disposition,
    FeatureVector,
    HistoryDepth,
    Ignorance,
    InvalidConfig,
    InvalidDuration,
    OutOfRange,
    PeerAssessment,
    PeerProfile,
    assess,
    discretize_share,
    features,
    format_classifier_config,
    history_depth,
    parse_classifier_config,
    peer_fairness,
    posterior,
    should_reject,
)
from .simulation import (
    AttackProfile,
    Battery,
    DEFAULT_CAPACITY,
    DefenseMode,
    DeviceConfig,
    DeviceStats,
    EnergyModel,
    HOUR_SCHEDULE,
    MINUTE_SCHEDULE,
    QuitDecision,
    Role,
    Schedule,
    SimResult,
    attacker_choose_tbb,
    attacker_maybe_quit,
    drain,
    energy_conserved,
    run,
)
from .cli import (
    ExperimentConfig,
    PRESET_NAMES,
    RATIO_GRID,
    ResultRow,
    STRENGTH_GRID,
    build_devices,
    emit_csv,
    main,
    parse_experiment_config,
    preset,
    run_experiment,
)

__all__ = [name for name in dir() if not name.startswith("_")]
