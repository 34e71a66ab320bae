"""Past-quantum-state analysis of QND photon counting in a lossy cavity."""

from .errors import (
    ConfigError,
    DisjointSupportError,
    FitError,
    InconsistentRecordError,
    PQSError,
    RecordParseError,
    TruncationOverflowError,
)
from .estimator import (
    SmoothedTrajectory,
    SummarySeries,
    backward_filter,
    combine_pqs,
    forward_filter,
    jump_time,
    smooth,
    summarize,
)
from .fock import (
    AtomDetection,
    ModelParams,
    Sample,
    fringe_probability,
    measurement_update,
    relaxation_generator,
    relaxation_step,
    thermal,
    uniform,
)
from .record import DetectionRecord, TruthTrajectory
from .simulate import (
    InitialState,
    Injection,
    SimConfig,
    generate_record,
    select_single_g,
    simulate_run,
    simulate_truth,
)

__version__ = "0.1.0"
