"""Event-log augmentation toolkit.

Learns a multi-perspective probabilistic transition system from an event log,
generates synthetic or class-rebalanced logs from it, and evaluates generated
logs against real ones with similarity, entropy and
train-on-synthetic-test-on-real measures.
"""

from .distfit import FittedDistribution, fit_best, sample, wasserstein_1d
from .generator import (
    BalanceConfig,
    BalanceError,
    GenerationConfig,
    GenerationReport,
    generate_balanced,
    generate_log,
)
from .hyperopt import KSweepPoint, KSweepResult, optimize_k, select_best_k
from .log_io import (
    CsvMapping,
    LogParseError,
    MappingError,
    load_log,
    log_from_json,
    log_to_json,
    parse_csv,
    parse_xes,
    write_csv,
    write_xes,
)
from .log_model import (
    Event,
    EventLog,
    SplitPair,
    Trace,
    activity_duration,
    handover_counts,
    inter_arrival_times,
    k_prefixes,
    make_log,
    make_trace,
    temporal_split,
)
from .metrics_entropy import (
    EntropyReport,
    activity_duration_entropy,
    cycle_time_entropy,
    discretized_entropy,
    entropy_report,
    normalized_trace_entropy,
    prefix_entropy,
    trace_entropy,
)
from .metrics_similarity import (
    MetricReport,
    RoleAssignment,
    aed,
    car,
    ced,
    cfld,
    ctd,
    cwd,
    dad,
    discover_roles,
    evaluate_all,
    hwd,
    ngram_distance,
    rbced,
    red,
)
from .pts import (
    ModelFormatError,
    ProbabilisticTransitionSystem,
    deserialize,
    discover,
    load_pts,
    next_activity_distribution,
    save_pts,
    serialize,
)
from .tstr import (
    BaselineTreeLearner,
    FeatureSchema,
    FscoreResult,
    SubprocessLearner,
    TstrResult,
    baseline_learner,
    build_run_log,
    macro_f1,
    rare_activity_fscore,
    tstr_rmae,
)

__version__ = "0.1.0"
