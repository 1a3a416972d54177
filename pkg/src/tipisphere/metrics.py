"""Information-theoretic and behavioral measurement over trajectory logs.

Two independent oracles anchor the controller's TiPI estimate: a plug-in
mutual information over discrete symbol pairs and the closed form for a
Gaussian AR(1) process.  ``running_tipi`` recomputes windowed covariances
from the logged deviations, deliberately bypassing the controller's own
EMA so that reported values do not inherit estimator state.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError, NumericDomainError


@dataclass
class DiscreteJoint:
    """Count table over (previous symbol, current symbol) pairs."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if self.counts.ndim != 2:
            raise InputError("joint counts must be a 2-d table")
        if np.any(self.counts < 0):
            raise InputError("joint counts must be non-negative")
        if self.counts.sum() <= 0:
            raise InputError("joint counts must have positive total")


def discrete_mi(j: DiscreteJoint) -> float:
    """Plug-in mutual information of the joint, in nats; zero cells contribute 0."""
    p = j.counts.astype(float) / j.counts.sum()
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    nz = p > 0
    return float(np.sum(p[nz] * np.log(p[nz] / (px @ py)[nz])))


def gaussian_ar1_mi(a: float) -> float:
    """Exact predictive information of a stationary Gaussian AR(1): -1/2 ln(1-a^2)."""
    if not (math.isfinite(a) and abs(a) < 1.0):
        raise NumericDomainError("AR(1) coefficient must satisfy |a| < 1")
    return -0.5 * math.log(1.0 - a * a)


@dataclass
class TrajectoryLog:
    """Per-step record arrays for one session, plus the config echo.

    The command list keeps the step-stamped interactive/scripted events
    that were applied, which is what makes a session replayable.
    """

    condition: str
    seed: int
    config: dict
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    heading: np.ndarray
    motor: np.ndarray
    sensor: np.ndarray
    ds: np.ndarray
    xi: np.ndarray
    tipi: np.ndarray
    xi_norm: np.ndarray
    condition_tag: np.ndarray  # per-step condition (sessions may switch live)
    commands: list[dict] = field(default_factory=list)
    abort: dict | None = None

    def __post_init__(self):
        if len(self.t) and np.any(np.diff(self.t) <= 0):
            raise InputError("step indices must be strictly increasing")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def steps(self) -> int:
        return len(self.t)


def running_tipi(log: TrajectoryLog, window: int, ridge: float = 1e-4) -> np.ndarray:
    """Windowed TiPI series from the logged deviations and errors.

    For every step with a full trailing window, Sigma and D are the plain
    second moments of ds and xi over that window plus ridge * I, and the
    value is 1/2 ln|Sigma| - 1/2 ln|D|.  Entries before the first full
    window are NaN.  Uses cumulative sums of outer products, so the whole
    series costs O(T n^2) plus batched determinants.
    """
    n = log.ds.shape[1]
    if window < n + 1:
        raise ConfigError(f"window must be at least n + 1 = {n + 1} for identifiability")
    T = len(log.t)
    out = np.full(T, np.nan)
    if T < window:
        return out
    outer_ds = np.einsum("ti,tj->tij", log.ds, log.ds)
    outer_xi = np.einsum("ti,tj->tij", log.xi, log.xi)
    cs_ds = np.concatenate([np.zeros((1, n, n)), np.cumsum(outer_ds, axis=0)])
    cs_xi = np.concatenate([np.zeros((1, n, n)), np.cumsum(outer_xi, axis=0)])
    idx = np.arange(window - 1, T)
    sig = (cs_ds[idx + 1] - cs_ds[idx + 1 - window]) / window + ridge * np.eye(n)
    d = (cs_xi[idx + 1] - cs_xi[idx + 1 - window]) / window + ridge * np.eye(n)
    sign_s, ld_s = np.linalg.slogdet(sig)
    sign_d, ld_d = np.linalg.slogdet(d)
    if np.any(sign_s <= 0) or np.any(sign_d <= 0):
        raise NumericDomainError("windowed covariance lost positive definiteness")
    out[idx] = 0.5 * (ld_s - ld_d)
    return out


def occupancy_entropy(log: TrajectoryLog, grid: int = 20, table_radius: float | None = None) -> float:
    """Shannon entropy (nats) of the visit histogram over a grid on the table."""
    if grid < 2:
        raise ConfigError("grid must be at least 2x2")
    if table_radius is None:
        table_radius = float(log.config["plant"]["table"]["radius"])
    edges = np.linspace(-table_radius, table_radius, grid + 1)
    hist, _, _ = np.histogram2d(log.x, log.y, bins=(edges, edges))
    total = hist.sum()
    if total <= 0:
        return 0.0
    p = hist[hist > 0] / total
    return float(-np.sum(p * np.log(p)))


def rms_xi(log: TrajectoryLog) -> float:
    """Root-mean-square prediction error magnitude, ignoring the warm-up ticks."""
    xin = log.xi_norm[2:] if len(log.xi_norm) > 2 else log.xi_norm
    if len(xin) == 0:
        return 0.0
    return float(np.sqrt(np.mean(xin**2)))


def summarize_log(log: TrajectoryLog, tipi_window: int = 2000, grid: int = 20) -> dict:
    """One CSV row worth of behavioral numbers for a session."""
    series = running_tipi(log, min(tipi_window, max(len(log) // 2, log.ds.shape[1] + 1)))
    finite = series[np.isfinite(series)]
    return {
        "condition": log.condition,
        "seed": log.seed,
        "steps": len(log),
        "mean_tipi": float(np.mean(finite)) if len(finite) else float("nan"),
        "occupancy_entropy": occupancy_entropy(log, grid=grid),
        "rms_xi": rms_xi(log),
    }


SUMMARY_FIELDS = ("condition", "seed", "steps", "mean_tipi", "occupancy_entropy", "rms_xi")


def write_summary_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=SUMMARY_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in SUMMARY_FIELDS})


# --- JSON Lines persistence ---------------------------------------------------

def write_jsonl(log: TrajectoryLog, path) -> None:
    """Write the log: config echo first, then step records with commands
    interleaved immediately before the step they applied at."""
    by_step: dict[int, list[dict]] = {}
    for c in log.commands:
        by_step.setdefault(int(c["t"]), []).append(c)
    with open(path, "w") as f:
        head = {
            "type": "config",
            "condition": log.condition,
            "seed": log.seed,
            "config": log.config,
        }
        f.write(json.dumps(head, separators=(",", ":")) + "\n")
        for i in range(len(log.t)):
            ti = int(log.t[i])
            for c in by_step.get(ti, ()):
                f.write(json.dumps({"type": "command", **c}, separators=(",", ":")) + "\n")
            rec = {
                "type": "step",
                "t": ti,
                "x": log.x[i],
                "y": log.y[i],
                "heading": log.heading[i],
                "motor": log.motor[i].tolist(),
                "sensor": log.sensor[i].tolist(),
                "ds": log.ds[i].tolist(),
                "xi": log.xi[i].tolist(),
                "tipi": log.tipi[i],
                "xi_norm": log.xi_norm[i],
                "condition": str(log.condition_tag[i]),
            }
            f.write(json.dumps(rec, separators=(",", ":")) + "\n")
        if log.abort is not None:
            f.write(json.dumps({"type": "abort", **log.abort}, separators=(",", ":")) + "\n")


def read_jsonl(path) -> TrajectoryLog:
    config_rec = None
    steps = []
    commands = []
    abort = None
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            kind = rec.pop("type")
            if kind == "config":
                config_rec = rec
            elif kind == "step":
                steps.append(rec)
            elif kind == "command":
                commands.append(rec)
            elif kind == "abort":
                abort = rec
            else:
                raise ConfigError(f"unknown record type {kind!r} in {path}")
    if config_rec is None:
        raise ConfigError(f"log {path} has no config record at its head")
    if not steps:
        raise ConfigError(f"log {path} has no step records")
    arr = lambda key: np.array([s[key] for s in steps])
    return TrajectoryLog(
        condition=config_rec["condition"],
        seed=config_rec["seed"],
        config=config_rec["config"],
        t=arr("t"),
        x=arr("x"),
        y=arr("y"),
        heading=arr("heading"),
        motor=arr("motor"),
        sensor=arr("sensor"),
        ds=arr("ds"),
        xi=arr("xi"),
        tipi=arr("tipi"),
        xi_norm=arr("xi_norm"),
        condition_tag=np.array([s["condition"] for s in steps]),
        commands=commands,
        abort=abort,
    )
