"""Frozen reactive baseline: pre-adapted network driving a balance loop.

The baseline robot runs the same two-network architecture, but its
weights are produced once by letting the adaptive controller organize
itself on an empty table, then frozen.  At run time the frozen network's
two outputs are read as a speed and a heading increment, and a
proportional heading-hold loop converts that command into wheel speeds,
mimicking a firmware balance mode that keeps the set heading against
nudges.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .controller import (
    ControllerParams,
    LearningConfig,
    ModelParams,
    TipiController,
    params_digest,
)
from .errors import ConfigError
from .sim import RobotState, SpherePlant, wrap_angle


@dataclass(frozen=True)
class FrozenParams:
    """Immutable weight snapshot with provenance of the pre-adaptation run."""

    cp: ControllerParams
    mp: ModelParams
    seed: int
    steps: int
    digest: str

    def __post_init__(self):
        for arr in (self.cp.C, self.cp.h, self.mp.A, self.mp.b):
            arr.setflags(write=False)

    @classmethod
    def freeze(cls, cp: ControllerParams, mp: ModelParams, seed: int, steps: int):
        cp, mp = cp.copy(), mp.copy()
        return cls(cp=cp, mp=mp, seed=seed, steps=steps, digest=params_digest(cp, mp))


@dataclass
class BalanceCommand:
    """Speed in [0, 1] plus an absolute heading, wrapped to (-pi, pi]."""

    speed: float
    heading: float

    def __post_init__(self):
        self.speed = min(1.0, max(0.0, float(self.speed)))
        self.heading = wrap_angle(float(self.heading))


@dataclass
class BalanceGains:
    heading_gain: float = 2.0   # wheel differential per rad of heading error
    heading_rate: float = 0.2   # rad of commanded heading per unit network output, per tick
    yaw_damping: float = 0.5    # wheel differential per rad/s of yaw rate

    def __post_init__(self):
        for name in ("heading_gain", "heading_rate", "yaw_damping"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError("balance gains must be finite")


def pre_adapt(
    seed: int,
    steps: int,
    plant: SpherePlant | None = None,
    learning: LearningConfig | None = None,
    ema_decay: float = 0.99,
    ridge: float = 1e-4,
) -> FrozenParams:
    """Self-organize on an empty table for `steps` ticks, then freeze.

    Deterministic given the seed: the controller init and the sensor
    noise come from separate children of one seed sequence.
    """
    if steps < 1:
        raise ConfigError("pre-adaptation needs at least one step")
    if plant is None:
        plant = SpherePlant()
    seq = np.random.SeedSequence(entropy=seed)
    init_seq, noise_seq = seq.spawn(2)
    noise_rng = np.random.default_rng(noise_seq)
    ctrl = TipiController.create(
        n=5, m=2, cfg=learning, ema_decay=ema_decay, ridge=ridge,
        seed=init_seq.generate_state(1)[0].item(),
    )
    prev = RobotState()
    state = RobotState()
    for _ in range(steps):
        s = plant.sense(prev, state, noise_rng)
        y, _diag = ctrl.step(s)
        prev, state = state, plant.step(state, y)
    return FrozenParams.freeze(ctrl.cp, ctrl.mp, seed=seed, steps=steps)


def reactive_act(
    s: np.ndarray,
    fp: FrozenParams,
    held_heading: float = 0.0,
    gains: BalanceGains | None = None,
) -> BalanceCommand:
    """Map the frozen network's outputs to a speed/heading command.

    First output sets the speed as (y+1)/2; the second advances the held
    heading by heading_rate * y, so a zero output keeps the heading.
    """
    if gains is None:
        gains = BalanceGains()
    y = np.tanh(fp.cp.C @ np.asarray(s, dtype=float) + fp.cp.h)
    return BalanceCommand(
        speed=0.5 * (y[0] + 1.0),
        heading=held_heading + gains.heading_rate * y[1],
    )


def balance_to_wheels(
    cmd: BalanceCommand,
    state: RobotState,
    gains: BalanceGains | None = None,
) -> np.ndarray:
    """Heading hold: common-mode speed plus a differential correction.

    The differential term is proportional in the heading error with a
    yaw-rate damping term; without damping the saturated loop limit-cycles
    under the plant's actuation lag instead of holding the heading.
    """
    if gains is None:
        gains = BalanceGains()
    err = wrap_angle(cmd.heading - state.heading)
    diff = gains.heading_gain * err - gains.yaw_damping * state.ang_vel
    return np.clip(np.array([cmd.speed - diff, cmd.speed + diff]), -1.0, 1.0)


class ReactiveSession:
    """Per-session reactive state: the held heading integrated over ticks."""

    def __init__(self, fp: FrozenParams, gains: BalanceGains | None = None,
                 initial_heading: float = 0.0):
        self.fp = fp
        self.gains = gains if gains is not None else BalanceGains()
        self.held_heading = float(initial_heading)

    def act(self, s: np.ndarray, state: RobotState) -> np.ndarray:
        cmd = reactive_act(s, self.fp, self.held_heading, self.gains)
        self.held_heading = cmd.heading
        return balance_to_wheels(cmd, state, self.gains)


# --- frozen parameter files ---------------------------------------------------

def default_frozen_path() -> str:
    """The artifact shipped with the package: pre_adapt(seed=42, steps=50000)."""
    import importlib.resources

    return str(importlib.resources.files("tipisphere") / "data" / "balanced_rea_frozen.json")


def save_frozen(path, fp: FrozenParams, ema_decay: float = 0.99, ridge: float = 1e-4) -> None:
    doc = {
        "n": fp.cp.n,
        "m": fp.cp.m,
        "C": fp.cp.C.tolist(),
        "h": fp.cp.h.tolist(),
        "A": fp.mp.A.tolist(),
        "b": fp.mp.b.tolist(),
        "ema_decay": ema_decay,
        "ridge": ridge,
        "eps_controller": 0.0,
        "eps_model": 0.0,
        "grad_clip": 1.0,
        "seed": fp.seed,
        "provenance": {"seed": fp.seed, "steps": fp.steps, "digest": fp.digest},
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def load_frozen(path) -> FrozenParams:
    with open(path) as f:
        doc = json.load(f)
    cp = ControllerParams(np.array(doc["C"], dtype=float), np.array(doc["h"], dtype=float))
    mp = ModelParams(np.array(doc["A"], dtype=float), np.array(doc["b"], dtype=float))
    prov = doc.get("provenance", {})
    fp = FrozenParams(
        cp=cp, mp=mp,
        seed=prov.get("seed", doc.get("seed", 0)),
        steps=prov.get("steps", 0),
        digest=prov.get("digest", ""),
    )
    actual = params_digest(cp, mp)
    if fp.digest and fp.digest != actual:
        raise ConfigError(f"frozen params digest mismatch: file says {fp.digest}, content is {actual}")
    return fp
