"""Per-episode metrics (JSONL) and the end-of-session report (JSON)."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

METRICS_FILE = "metrics.jsonl"
REPORT_FILE = "report.json"
CHECKPOINT_FILE = "policy.json"
SIM_EXIT_LOG = "sim_exits.jsonl"


@dataclass
class MetricsRecord:
    index: int
    steps: int
    # "return" is a keyword, hence the trailing underscore; serialized without it
    return_: float
    outcome: str
    wall_ms: float
    resets_since_start: int

    def as_dict(self) -> dict:
        doc = asdict(self)
        doc["return"] = doc.pop("return_")
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "MetricsRecord":
        doc = dict(doc)
        doc["return_"] = doc.pop("return")
        return cls(**doc)


def write_metrics(record: MetricsRecord, out_dir: str | Path) -> None:
    path = Path(out_dir) / METRICS_FILE
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record.as_dict()) + "\n")
        fh.flush()


def read_metrics(path: str | Path) -> list[MetricsRecord]:
    """Read a metrics file, ignoring a torn (partially written) final line."""
    path = Path(path)
    if path.is_dir():
        path = path / METRICS_FILE
    if not path.exists():
        return []
    lines = [(i, line) for i, line in enumerate(path.read_text(encoding="utf-8").split("\n"), 1) if line.strip()]
    records = []
    for n, (lineno, line) in enumerate(lines):
        try:
            records.append(MetricsRecord.from_dict(json.loads(line)))
        except (ValueError, TypeError, KeyError):
            if n == len(lines) - 1:
                break
            raise ValueError(f"{path}: corrupt metrics line {lineno}") from None
    return records


@dataclass
class SessionReport:
    algorithm: str
    total_duration: float = 0.0
    episodes: int = 0
    env_steps: int = 0
    simulator_restarts: dict = field(default_factory=lambda: {"total": 0, "scheduled": 0, "crash": 0})
    final_eval_success_rate: float | None = None
    final_eval_mean_return: float | None = None
    evals: list = field(default_factory=list)
    total_resets: int = 0
    aborted: bool = False
    abort_reason: str | None = None
    exit_code: int = 0
    seed: int = 0
    checkpoint: str | None = None

    def note_restart(self, cause: str) -> None:
        self.simulator_restarts[cause] += 1
        self.simulator_restarts["total"] += 1

    def as_dict(self) -> dict:
        return asdict(self)


def write_report(report: SessionReport, out_dir: str | Path) -> Path:
    path = Path(out_dir) / REPORT_FILE
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(report.as_dict(), indent=2) + "\n", encoding="utf-8")
    os.replace(tmp, path)
    return path


def read_report(path: str | Path) -> SessionReport:
    path = Path(path)
    if path.is_dir():
        path = path / REPORT_FILE
    return SessionReport(**json.loads(path.read_text(encoding="utf-8")))


def read_exit_log(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        return []
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        try:
            out.append(json.loads(line))
        except ValueError:
            continue
    return out


def format_report(report: SessionReport, metrics: list[MetricsRecord] | None = None) -> str:
    r = report.simulator_restarts
    rate = "n/a" if report.final_eval_success_rate is None else f"{report.final_eval_success_rate:.0%}"
    hours, rest = divmod(report.total_duration, 3600)
    minutes, seconds = divmod(rest, 60)
    lines = [
        f"Algorithm            {report.algorithm}",
        f"Total duration       {int(hours)}h {int(minutes):02d}m {seconds:04.1f}s",
        f"Episodes             {report.episodes}",
        f"Env steps            {report.env_steps}",
        f"Simulator resets     {report.total_resets}",
        f"Simulator restarts   {r.get('total', 0)} (scheduled {r.get('scheduled', 0)}, crash {r.get('crash', 0)})",
        f"Final eval success   {rate}",
        f"Status               {'ABORTED: ' + (report.abort_reason or '') if report.aborted else 'completed'}",
    ]
    if report.evals:
        lines.append("Evaluations:")
        for e in report.evals:
            lines.append(
                f"  after episode {e['episode']:>6}  success {e['success_rate']:.0%}  mean return {e['mean_return']:.3f}"
            )
    if metrics:
        outcomes: dict[str, int] = {}
        for m in metrics:
            outcomes[m.outcome] = outcomes.get(m.outcome, 0) + 1
        lines.append("Training outcomes:   " + ", ".join(f"{k} {v}" for k, v in sorted(outcomes.items())))
    return "\n".join(lines)
