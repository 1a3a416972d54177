"""Batch experiment runner: sessions, condition comparison, config files.

Config files are TOML or JSON with the same schema as SessionConfig.echo()
minus anything derived; a scripted perturbation schedule is either a path
to a JSON event array, the literal "default" (one seeded nudge every 10
simulated seconds), or "none".
"""

from __future__ import annotations

import json
import statistics
from pathlib import Path

from .baseline import BalanceGains
from .controller import LearningConfig
from .errors import ConfigError
from .metrics import (
    SUMMARY_FIELDS,
    TrajectoryLog,
    summarize_log,
    write_jsonl,
    write_summary_csv,
)
from .session import Session, SessionConfig, schedule_to_timeline
from .sim import (
    PerturbationEvent,
    RobotBody,
    SensorNoise,
    SpherePlant,
    TableGeometry,
    generate_nudge_schedule,
)

DEFAULT_NUDGE_PERIOD_STEPS = 200  # 10 s at 20 Hz
DEFAULT_NUDGE_MAGNITUDE = 0.05  # N*s


def load_config_file(path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib  # py >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        return tomllib.loads(text)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc


def config_from_dict(doc: dict) -> tuple[SessionConfig, str | list]:
    """Build a SessionConfig from a parsed config document.

    Returns the config and the schedule spec ("default", "none", a path
    string, or an inline event list).
    """
    try:
        plant_doc = doc.get("plant", {})
        plant = SpherePlant(
            table=TableGeometry(**plant_doc.get("table", {})),
            body=RobotBody(**plant_doc.get("body", {})),
            noise=SensorNoise(**plant_doc.get("noise", {})),
            dt=plant_doc.get("dt", 0.05),
        )
        learning_doc = dict(doc.get("learning", {}))
        ema_decay = learning_doc.pop("ema_decay", 0.99)
        ridge = learning_doc.pop("ridge", 1e-4)
        learning = LearningConfig(**learning_doc)
        init_doc = doc.get("init", {})
        baseline_doc = dict(doc.get("baseline", {}))
        frozen = baseline_doc.pop("frozen_params", None)
        gains = BalanceGains(**baseline_doc)
        cfg = SessionConfig(
            condition=doc.get("condition", "ada"),
            duration_steps=int(doc.get("duration_steps", 6000)),
            seed=int(doc.get("seed", 0)),
            plant=plant,
            learning=learning,
            ema_decay=ema_decay,
            ridge=ridge,
            wheel_coupling=init_doc.get("wheel_coupling", 0.8),
            model_init_range=init_doc.get("model_init_range", 0.1),
            gains=gains,
            max_impulse=doc.get("limits", {}).get("max_impulse", 0.2),
            frozen_params_path=frozen,
        )
    except TypeError as exc:
        raise ConfigError(f"bad config key: {exc}") from exc
    return cfg, doc.get("schedule", "default")


def load_schedule_events(spec, cfg: SessionConfig) -> list[PerturbationEvent]:
    """Resolve a schedule spec into perturbation events."""
    if spec in (None, "none"):
        return []
    if spec == "default":
        return generate_nudge_schedule(
            cfg.duration_steps, cfg.seed,
            period_steps=DEFAULT_NUDGE_PERIOD_STEPS,
            magnitude=DEFAULT_NUDGE_MAGNITUDE,
        )
    if isinstance(spec, (str, Path)):
        with open(spec) as f:
            records = json.load(f)
    else:
        records = spec
    events = []
    for rec in records:
        if isinstance(rec, PerturbationEvent):
            events.append(rec)
            continue
        events.append(
            PerturbationEvent(
                t=int(rec["t"]),
                kind=rec["kind"],
                point=tuple(rec.get("point", (0.0, 0.0))),
                impulse=tuple(rec.get("impulse", (0.0, 0.0))),
                segment=tuple(map(tuple, rec["segment"])) if rec.get("segment") else None,
                block_id=rec.get("id"),
            )
        )
    return events


def run_session(
    cfg: SessionConfig,
    schedule="default",
    timeline: list[dict] | None = None,
    out_path=None,
    policy_override=None,
) -> TrajectoryLog:
    """Run one full session and optionally write its JSON Lines log.

    Either a scripted schedule (compiled to a timeline here) or an
    explicit step-stamped command timeline (e.g. replayed from a live
    session's log) drives the perturbations; an explicit timeline takes
    precedence over the schedule spec.
    """
    if timeline is None:
        events = load_schedule_events(schedule, cfg)
        timeline = schedule_to_timeline(events, cfg)
    session = Session(cfg, timeline=timeline, policy_override=policy_override)
    log = session.run()
    if out_path is not None:
        write_jsonl(log, out_path)
    return log


def _median_iqr(values: list[float]) -> tuple[float, float]:
    if not values:
        return float("nan"), float("nan")
    med = statistics.median(values)
    if len(values) < 2:
        return med, 0.0
    qs = statistics.quantiles(values, n=4, method="inclusive")
    return med, qs[2] - qs[0]


class ComparisonReport:
    """Per-log rows plus per-condition medians, printable as a table."""

    def __init__(self, rows: list[dict], tipi_window: int, grid: int):
        self.rows = rows
        self.tipi_window = tipi_window
        self.grid = grid
        self.conditions: dict[str, dict] = {}
        for cond in sorted({r["condition"] for r in rows}):
            sub = [r for r in rows if r["condition"] == cond]
            entry = {"n_logs": len(sub), "small_sample": len(sub) < 2}
            for key in ("mean_tipi", "occupancy_entropy", "rms_xi"):
                med, iqr = _median_iqr([r[key] for r in sub])
                entry[f"median_{key}"] = med
                entry[f"iqr_{key}"] = iqr
            self.conditions[cond] = entry

    def to_table(self) -> str:
        lines = [
            f"{'condition':<10} {'n':>3} {'median tipi':>12} {'median entropy':>15} "
            f"{'median rms_xi':>14}  note",
        ]
        for cond, e in self.conditions.items():
            note = "small sample" if e["small_sample"] else ""
            lines.append(
                f"{cond:<10} {e['n_logs']:>3} {e['median_mean_tipi']:>12.4f} "
                f"{e['median_occupancy_entropy']:>15.4f} {e['median_rms_xi']:>14.4f}  {note}"
            )
        return "\n".join(lines)

    def write_csv(self, path) -> None:
        write_summary_csv(self.rows, path)

    def write_medians_csv(self, path) -> None:
        import csv

        fields = [
            "condition", "n_logs",
            "median_mean_tipi", "iqr_mean_tipi",
            "median_occupancy_entropy", "iqr_occupancy_entropy",
            "median_rms_xi", "iqr_rms_xi",
            "small_sample",
        ]
        with open(path, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=fields)
            w.writeheader()
            for cond, e in self.conditions.items():
                w.writerow({"condition": cond, **{k: e[k] for k in fields[1:]}})


def compare(logs: list[TrajectoryLog], tipi_window: int = 2000, grid: int = 20) -> ComparisonReport:
    """Summarize a batch of logs into a per-condition comparison.

    Logs with different plant configurations are not comparable and are
    refused outright.
    """
    if not logs:
        raise ConfigError("compare needs at least one log")
    plants = {json.dumps(log.config.get("plant", {}), sort_keys=True) for log in logs}
    if len(plants) > 1:
        raise ConfigError(
            "refusing to compare logs with different plant configurations; "
            "rerun the batch with one plant"
        )
    rows = [summarize_log(log, tipi_window=tipi_window, grid=grid) for log in logs]
    return ComparisonReport(rows, tipi_window, grid)


def run_batch(
    base_cfg_doc: dict,
    seeds: list[int],
    conditions: list[str],
    out_dir=None,
    schedule="default",
) -> list[TrajectoryLog]:
    """Run the full seeds x conditions grid with one base config."""
    logs = []
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    for cond in conditions:
        for seed in seeds:
            doc = dict(base_cfg_doc)
            doc["condition"] = cond
            doc["seed"] = seed
            cfg, _ = config_from_dict(doc)
            out_path = None
            if out_dir is not None:
                out_path = Path(out_dir) / f"{cond}_seed{seed:04d}.jsonl"
            logs.append(run_session(cfg, schedule=schedule, out_path=out_path))
    return logs


__all__ = [
    "ComparisonReport",
    "DEFAULT_NUDGE_MAGNITUDE",
    "DEFAULT_NUDGE_PERIOD_STEPS",
    "SUMMARY_FIELDS",
    "compare",
    "config_from_dict",
    "load_config_file",
    "load_schedule_events",
    "run_batch",
    "run_session",
]
