"""Run-configuration files: strict YAML parsing, canonical serialization,
and report writing.

Unknown keys are rejected with file:line anchors; parse -> serialize -> parse
is lossless. All experiment parameters, including the straggler map and every
delay knob, live in the one file so a run is reproducible from one artifact.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass

import yaml

from .harness import RunConfig
from .metrics import MetricsRecord
from .optim import LrSchedule

REPORT_FORMATS = ("csv", "json")

CSV_HEADER = (
    "epoch,strategy,lambda,heldout_loss,epoch_wall_s,"
    "staleness_mean,staleness_max,minibatch_counts,bytes_exchanged"
)

_TOP_KEYS = {
    "strategy", "learners", "objective", "dataset", "schedule", "epochs",
    "batch_size", "seed", "momentum", "stragglers", "base_compute_ms",
    "compute_jitter_ms", "comm_latency_ms", "comm_jitter_ms", "stagger_ms",
    "clock", "output",
}
_OBJECTIVE_KEYS = {"kind", "input_dim", "hidden_dim", "regularization"}
_DATASET_KEYS = {"n_samples"}
_SCHEDULE_KEYS = {
    "base_lr", "peak_lr", "warmup_epochs", "anneal_factor",
    "anneal_start_epoch", "total_epochs",
}
_OUTPUT_KEYS = {"path", "format"}


class ConfigError(ValueError):
    def __init__(self, message: str, source: str = "<config>", line: int | None = None):
        anchor = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(anchor + message)
        self.source = source
        self.line = line


@dataclass(frozen=True)
class ConfigFile:
    run: RunConfig
    output_path: str = "report.csv"
    report_format: str = "csv"


def _line_map(node, prefix: str = "") -> dict[str, int]:
    lines: dict[str, int] = {}
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
            lines[path] = key_node.start_mark.line + 1
            lines.update(_line_map(value_node, path))
    return lines


class _Section:
    def __init__(self, data: dict, allowed: set[str], source: str,
                 lines: dict[str, int], prefix: str = ""):
        self.data = data
        self.source = source
        self.lines = lines
        self.prefix = prefix
        for key in data:
            path = f"{prefix}.{key}" if prefix else str(key)
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r}", source, lines.get(path))

    def _path(self, key: str) -> str:
        return f"{self.prefix}.{key}" if self.prefix else key

    def line(self, key: str) -> int | None:
        return self.lines.get(self._path(key))

    def require(self, key: str, kind: type):
        if key not in self.data:
            raise ConfigError(
                f"missing required key {self._path(key)!r}", self.source,
                self.lines.get(self.prefix) if self.prefix else None,
            )
        return self._convert(key, self.data[key], kind)

    def optional(self, key: str, kind: type, default):
        if key not in self.data:
            return default
        return self._convert(key, self.data[key], kind)

    def _convert(self, key: str, value, kind: type):
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if kind is int and isinstance(value, bool):
            raise ConfigError(f"{self._path(key)} must be an integer", self.source, self.line(key))
        if not isinstance(value, kind):
            raise ConfigError(
                f"{self._path(key)} must be a {kind.__name__}, got {type(value).__name__}",
                self.source, self.line(key),
            )
        return value

    def subsection(self, key: str, allowed: set[str], required: bool = True) -> "_Section | None":
        if key not in self.data:
            if required:
                raise ConfigError(f"missing required section {key!r}", self.source)
            return None
        value = self.data[key]
        if not isinstance(value, dict):
            raise ConfigError(f"section {key!r} must be a mapping", self.source, self.line(key))
        return _Section(value, allowed, self.source, self.lines, self._path(key))


def parse_config(text: str, source: str = "<config>") -> ConfigFile:
    try:
        data = yaml.safe_load(text)
        node = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"not valid YAML: {exc}", source, line) from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a YAML mapping", source)
    lines = _line_map(node)
    top = _Section(data, _TOP_KEYS, source, lines)

    objective = top.subsection("objective", _OBJECTIVE_KEYS)
    dataset = top.subsection("dataset", _DATASET_KEYS)
    schedule_sec = top.subsection("schedule", _SCHEDULE_KEYS)
    output = top.subsection("output", _OUTPUT_KEYS, required=False)

    stragglers_raw = top.optional("stragglers", dict, {})
    stragglers: dict[int, float] = {}
    for k, v in stragglers_raw.items():
        if not isinstance(k, int) or isinstance(k, bool):
            raise ConfigError(
                f"straggler keys must be learner ids (integers), got {k!r}",
                source, top.line("stragglers"),
            )
        if isinstance(v, int) and not isinstance(v, bool):
            v = float(v)
        if not isinstance(v, float):
            raise ConfigError(
                f"straggler factors must be numbers, got {v!r}",
                source, top.line("stragglers"),
            )
        stragglers[k] = v

    try:
        schedule = LrSchedule(
            base_lr=schedule_sec.require("base_lr", float),
            peak_lr=schedule_sec.require("peak_lr", float),
            warmup_epochs=schedule_sec.require("warmup_epochs", int),
            anneal_factor=schedule_sec.require("anneal_factor", float),
            anneal_start_epoch=schedule_sec.require("anneal_start_epoch", int),
            total_epochs=schedule_sec.require("total_epochs", int),
        )
        run = RunConfig(
            strategy=top.require("strategy", str),
            learners=top.require("learners", int),
            obj_kind=objective.require("kind", str),
            input_dim=objective.require("input_dim", int),
            hidden_dim=objective.optional("hidden_dim", int, 16),
            regularization=objective.optional("regularization", float, None),
            n_samples=dataset.require("n_samples", int),
            schedule=schedule,
            epochs=top.require("epochs", int),
            batch_size=top.require("batch_size", int),
            seed=top.require("seed", int),
            momentum=top.optional("momentum", float, 0.9),
            stragglers=stragglers,
            base_compute_ms=top.optional("base_compute_ms", float, 0.0),
            compute_jitter_ms=top.optional("compute_jitter_ms", float, 0.0),
            comm_latency_ms=top.optional("comm_latency_ms", float, 0.0),
            comm_jitter_ms=top.optional("comm_jitter_ms", float, 0.0),
            stagger_ms=top.optional("stagger_ms", float, 0.0),
            clock=top.optional("clock", str, "virtual"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc), source) from exc

    output_path = output.optional("path", str, "report.csv") if output else "report.csv"
    report_format = output.optional("format", str, "csv") if output else "csv"
    if report_format not in REPORT_FORMATS:
        raise ConfigError(
            f"output.format must be one of {REPORT_FORMATS}, got {report_format!r}",
            source, output.line("format") if output else None,
        )
    return ConfigFile(run=run, output_path=output_path, report_format=report_format)


def load_config(path: str) -> ConfigFile:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), source=path)


def serialize_config(cfg: ConfigFile) -> str:
    """Canonical YAML for a config; parsing it back yields an equal config."""
    run = cfg.run
    doc = {
        "strategy": run.strategy,
        "learners": run.learners,
        "objective": {
            "kind": run.obj_kind,
            "input_dim": run.input_dim,
            "hidden_dim": run.hidden_dim,
            **({"regularization": run.regularization} if run.regularization is not None else {}),
        },
        "dataset": {"n_samples": run.n_samples},
        "schedule": {
            "base_lr": run.schedule.base_lr,
            "peak_lr": run.schedule.peak_lr,
            "warmup_epochs": run.schedule.warmup_epochs,
            "anneal_factor": run.schedule.anneal_factor,
            "anneal_start_epoch": run.schedule.anneal_start_epoch,
            "total_epochs": run.schedule.total_epochs,
        },
        "epochs": run.epochs,
        "batch_size": run.batch_size,
        "seed": run.seed,
        "momentum": run.momentum,
        "stragglers": dict(run.stragglers),
        "base_compute_ms": run.base_compute_ms,
        "compute_jitter_ms": run.compute_jitter_ms,
        "comm_latency_ms": run.comm_latency_ms,
        "comm_jitter_ms": run.comm_jitter_ms,
        "stagger_ms": run.stagger_ms,
        "clock": run.clock,
        "output": {"path": cfg.output_path, "format": cfg.report_format},
    }
    return yaml.safe_dump(doc, sort_keys=False)


def format_csv(records: list[MetricsRecord], strategy: str, learners: int) -> str:
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for r in records:
        counts = "|".join(str(c) for c in r.minibatch_counts)
        out.write(
            f"{r.epoch},{strategy},{learners},{r.heldout_loss!r},{r.epoch_wall_s!r},"
            f"{r.staleness_mean!r},{r.staleness_max},{counts},{r.bytes_exchanged}\n"
        )
    return out.getvalue()


def format_json(records: list[MetricsRecord], strategy: str, learners: int) -> str:
    rows = [
        {
            "epoch": r.epoch,
            "strategy": strategy,
            "lambda": learners,
            "heldout_loss": r.heldout_loss,
            "epoch_wall_s": r.epoch_wall_s,
            "staleness_mean": r.staleness_mean,
            "staleness_max": r.staleness_max,
            "minibatch_counts": r.minibatch_counts,
            "bytes_exchanged": r.bytes_exchanged,
        }
        for r in records
    ]
    return json.dumps(rows, indent=2) + "\n"


def write_report(records: list[MetricsRecord], cfg: ConfigFile, path: str | None = None) -> str:
    target = path or cfg.output_path
    if cfg.report_format == "csv":
        payload = format_csv(records, cfg.run.strategy, cfg.run.learners)
    else:
        payload = format_json(records, cfg.run.strategy, cfg.run.learners)
    with open(target, "w", encoding="utf-8") as fh:
        fh.write(payload)
    return target
