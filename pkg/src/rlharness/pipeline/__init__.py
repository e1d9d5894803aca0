"""Session runner: configuration, training loop, crash recovery, records."""

from .config import SessionConfig, config_from_dict, load_config
from .records import (
    CHECKPOINT_FILE,
    METRICS_FILE,
    REPORT_FILE,
    SIM_EXIT_LOG,
    MetricsRecord,
    SessionReport,
    format_report,
    read_exit_log,
    read_metrics,
    read_report,
    write_metrics,
    write_report,
)
from .session import (
    EXIT_ABORT,
    EXIT_CONFIG,
    EXIT_OK,
    Decision,
    EvalResult,
    Session,
    evaluate_policy,
    greedy_action,
    restart_policy,
    run_session,
)
from .worldgen import instantiate_world_variants

__all__ = [
    "CHECKPOINT_FILE",
    "Decision",
    "EXIT_ABORT",
    "EXIT_CONFIG",
    "EXIT_OK",
    "EvalResult",
    "METRICS_FILE",
    "MetricsRecord",
    "REPORT_FILE",
    "SIM_EXIT_LOG",
    "Session",
    "SessionConfig",
    "SessionReport",
    "config_from_dict",
    "evaluate_policy",
    "format_report",
    "greedy_action",
    "instantiate_world_variants",
    "load_config",
    "read_exit_log",
    "read_metrics",
    "read_report",
    "restart_policy",
    "run_session",
    "write_metrics",
    "write_report",
]
