"""Session engine: one robot, one table, one step-stamped event timeline.

Both the batch harness and the live service drive this same engine, so a
session's state sequence is a pure function of (config, seed, timeline).
Interactive commands are stamped with the step at which they take effect
and logged next to the step records; feeding that command list back in
reproduces the trajectory byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .baseline import (
    BalanceGains,
    FrozenParams,
    ReactiveSession,
    default_frozen_path,
    load_frozen,
)
from .controller import LearningConfig, StepDiagnostics, TipiController, params_digest
from .errors import ConfigError
from .metrics import TrajectoryLog
from .sim import (
    ActivePerturbations,
    PerturbationEvent,
    PerturbationSchedule,
    RobotState,
    SpherePlant,
)

CONDITIONS = ("ada", "rea")

_CONDITION_ALIASES = {
    "ada": "ada",
    "adaptive": "ada",
    "rea": "rea",
    "balanced-rea": "rea",
    "reactive": "rea",
}


def normalize_condition(value: str) -> str:
    try:
        return _CONDITION_ALIASES[str(value).lower()]
    except KeyError:
        raise ConfigError(f"condition must be one of ada / balanced-REA, got {value!r}") from None


@dataclass
class SessionConfig:
    """Everything that affects a session's dynamics, in one place."""

    condition: str = "ada"
    duration_steps: int = 6000  # 5 min at 20 Hz
    seed: int = 0
    plant: SpherePlant = field(default_factory=SpherePlant)
    learning: LearningConfig = field(default_factory=LearningConfig)
    ema_decay: float = 0.99
    ridge: float = 1e-4
    wheel_coupling: float = 0.8
    model_init_range: float = 0.1
    gains: BalanceGains = field(default_factory=BalanceGains)
    max_impulse: float = 0.2
    frozen_params_path: str | None = None

    def __post_init__(self):
        self.condition = normalize_condition(self.condition)
        if self.duration_steps < 1:
            raise ConfigError("duration_steps must be >= 1")
        if not (math.isfinite(self.max_impulse) and self.max_impulse > 0):
            raise ConfigError("max_impulse must be finite and > 0")

    def echo(self) -> dict:
        """Config record written at the head of every log."""
        return {
            "condition": self.condition,
            "duration_steps": self.duration_steps,
            "seed": self.seed,
            "plant": {
                "dt": self.plant.dt,
                "table": {
                    "radius": self.plant.table.radius,
                    "wall_restitution": self.plant.table.wall_restitution,
                    "surface_friction": self.plant.table.surface_friction,
                },
                "body": {
                    "sphere_radius": self.plant.body.sphere_radius,
                    "mass": self.plant.body.mass,
                    "track_width": self.plant.body.track_width,
                    "max_wheel_speed": self.plant.body.max_wheel_speed,
                    "actuation_tau": self.plant.body.actuation_tau,
                    "max_yaw_rate": self.plant.body.max_yaw_rate,
                },
                "noise": {
                    "accel": self.plant.noise.accel,
                    "gyro": self.plant.noise.gyro,
                    "wheel": self.plant.noise.wheel,
                },
            },
            "learning": {
                "eps_controller": self.learning.eps_controller,
                "eps_model": self.learning.eps_model,
                "grad_clip": self.learning.grad_clip,
                "ema_decay": self.ema_decay,
                "ridge": self.ridge,
            },
            "init": {
                "wheel_coupling": self.wheel_coupling,
                "model_init_range": self.model_init_range,
            },
            "baseline": {
                "heading_gain": self.gains.heading_gain,
                "heading_rate": self.gains.heading_rate,
                "yaw_damping": self.gains.yaw_damping,
                "frozen_params": self.frozen_params_path,
            },
            "limits": {"max_impulse": self.max_impulse},
        }


def schedule_to_timeline(
    events: list[PerturbationEvent],
    cfg: SessionConfig,
) -> list[dict]:
    """Compile scripted perturbations into step-stamped command dicts.

    Validation (sorted blocks, impulse limits, segments on the table)
    happens in PerturbationSchedule; block ids are assigned here so the
    command stream is self-contained.
    """
    sched = PerturbationSchedule(events, table=cfg.plant.table, max_impulse=cfg.max_impulse)
    cmds: list[dict] = []
    for t, nudges in sched.nudges_by_step.items():
        for e in nudges:
            cmds.append(
                {"t": t, "kind": "nudge", "x": e.point[0], "y": e.point[1],
                 "jx": e.impulse[0], "jy": e.impulse[1]}
            )
    for on, off, bid, seg in sched.intervals:
        (x1, y1), (x2, y2) = seg
        cmds.append({"t": on, "kind": "block_on", "id": bid,
                     "x1": x1, "y1": y1, "x2": x2, "y2": y2})
        if off < 2**62:
            cmds.append({"t": off, "kind": "block_off", "id": bid})
    kind_rank = {"nudge": 0, "block_on": 1, "block_off": 2}
    cmds.sort(key=lambda c: (c["t"], kind_rank[c["kind"]], c.get("id", -1)))
    return cmds


class _AdaptivePolicy:
    name = "ada"

    def __init__(self, cfg: SessionConfig, init_seed: int):
        self.ctrl = TipiController.create(
            n=5, m=2, cfg=cfg.learning, ema_decay=cfg.ema_decay, ridge=cfg.ridge,
            seed=init_seed, wheel_coupling=cfg.wheel_coupling,
            model_init_range=cfg.model_init_range,
        )

    def act(self, s: np.ndarray, state: RobotState):
        return self.ctrl.step(s)

    def digest(self) -> str:
        return params_digest(self.ctrl.cp, self.ctrl.mp)


class _ReactivePolicy:
    """Frozen network through the balance loop; a zero-rate twin of the
    adaptive controller runs alongside purely for diagnostics."""

    name = "rea"

    def __init__(self, cfg: SessionConfig, fp: FrozenParams):
        self.fp = fp
        self.reactive = ReactiveSession(fp, cfg.gains)
        self.diag_ctrl = TipiController(
            fp.cp.copy(), fp.mp.copy(),
            LearningConfig(eps_controller=0.0, eps_model=0.0, grad_clip=cfg.learning.grad_clip),
            ema_decay=cfg.ema_decay, ridge=cfg.ridge,
        )

    def act(self, s: np.ndarray, state: RobotState):
        _, diag = self.diag_ctrl.step(s)
        y = self.reactive.act(s, state)
        return y, diag

    def digest(self) -> str:
        return params_digest(self.diag_ctrl.cp, self.diag_ctrl.mp)


class ConstantPolicy:
    """Fixed motor command; the dullest possible comparison point."""

    name = "constant"

    def __init__(self, cmd=(0.3, 0.3)):
        self.cmd = np.asarray(cmd, dtype=float)
        self._t = 0

    def act(self, s: np.ndarray, state: RobotState):
        diag = StepDiagnostics(t=self._t, ds_t=np.zeros(len(s)), xi_tm1=np.zeros(len(s)))
        self._t += 1
        return self.cmd.copy(), diag

    def digest(self) -> str:
        return "constant"


class Session:
    """Steps the plant under the configured policy, applying timeline
    commands atomically at tick boundaries and recording everything."""

    def __init__(
        self,
        cfg: SessionConfig,
        timeline: list[dict] | None = None,
        policy_override=None,
    ):
        self.cfg = cfg
        seq = np.random.SeedSequence(entropy=cfg.seed)
        noise_seq, ada_seq = seq.spawn(2)
        self._noise_rng = np.random.default_rng(noise_seq)
        self._ada_init_seed = int(ada_seq.generate_state(1)[0])

        self._policies: dict[str, object] = {}
        self._policy_override = policy_override
        if policy_override is not None:
            self.condition = getattr(policy_override, "name", "custom")
            self._policies[self.condition] = policy_override
        else:
            self.condition = cfg.condition
            self._policies[self.condition] = self._make_policy(self.condition)

        self.t = 0
        self.prev_state = RobotState()
        self.state = RobotState()
        self.abort: dict | None = None

        self._timeline: dict[int, list[dict]] = {}
        if timeline:
            for cmd in timeline:
                self._timeline.setdefault(int(cmd["t"]), []).append(dict(cmd))
        self._applied: list[dict] = []
        self._blocks: dict[int, tuple[tuple[float, float], tuple[float, float]]] = {}
        self._next_block_id = 0
        self._nudges_now: list[PerturbationEvent] = []
        self._rows: list[tuple] = []
        self.last_diag = StepDiagnostics(t=-1, ds_t=np.zeros(5), xi_tm1=np.zeros(5))

    # -- policies ---------------------------------------------------------

    def _make_policy(self, condition: str):
        if condition == "ada":
            return _AdaptivePolicy(self.cfg, self._ada_init_seed)
        if condition == "rea":
            path = self.cfg.frozen_params_path
            if path is None:
                path = default_frozen_path()  # the artifact shipped with the package
            try:
                fp = load_frozen(path)
            except FileNotFoundError:
                raise ConfigError(f"frozen params file not found: {path}") from None
            return _ReactivePolicy(self.cfg, fp)
        raise ConfigError(f"unknown condition {condition!r}")

    @property
    def policy(self):
        return self._policies[self.condition]

    def param_digest(self) -> str:
        return self.policy.digest()

    # -- commands ---------------------------------------------------------

    def validate_command(self, cmd: dict) -> str | None:
        """Why a command would be rejected, or None if it is applicable."""
        kind = cmd.get("kind")
        if kind == "nudge":
            try:
                jx, jy = float(cmd["jx"]), float(cmd["jy"])
                _px, _py = float(cmd.get("x", 0.0)), float(cmd.get("y", 0.0))
            except (KeyError, TypeError, ValueError):
                return "nudge needs numeric x, y, jx, jy"
            if not (math.isfinite(jx) and math.isfinite(jy)):
                return "nudge impulse must be finite"
            if math.hypot(jx, jy) > self.cfg.max_impulse:
                return f"impulse magnitude exceeds max {self.cfg.max_impulse}"
            return None
        if kind == "block_on":
            try:
                pts = [(float(cmd["x1"]), float(cmd["y1"])), (float(cmd["x2"]), float(cmd["y2"]))]
            except (KeyError, TypeError, ValueError):
                return "block_on needs numeric x1, y1, x2, y2"
            for px, py in pts:
                if not (math.isfinite(px) and math.isfinite(py)):
                    return "block segment must be finite"
                if math.hypot(px, py) > self.cfg.plant.table.radius:
                    return "block segment endpoint outside the table"
            return None
        if kind == "block_off":
            if not isinstance(cmd.get("id"), int):
                return "block_off needs an integer id"
            if cmd["id"] not in self._blocks and not self._pending_block(cmd["id"]):
                return f"no active block with id {cmd['id']}"
            return None
        if kind == "set_condition":
            try:
                normalize_condition(cmd.get("condition", ""))
            except ConfigError as exc:
                return str(exc)
            return None
        if kind in ("pause", "resume"):
            return None
        return f"unknown command kind {kind!r}"

    def _pending_block(self, bid: int) -> bool:
        return any(
            c.get("kind") == "block_on" and c.get("id") == bid
            for cmds in self._timeline.values()
            for c in cmds
        )

    def submit(self, cmd: dict) -> dict:
        """Stamp a live command with the current step for application at
        the next tick boundary.  Returns the stamped command."""
        reason = self.validate_command(cmd)
        if reason is not None:
            raise ConfigError(reason)
        stamped = dict(cmd)
        stamped["t"] = self.t
        if cmd.get("kind") == "block_on" and "id" not in stamped:
            stamped["id"] = self._claim_block_id()
        self._timeline.setdefault(self.t, []).append(stamped)
        return stamped

    def _claim_block_id(self) -> int:
        used = set(self._blocks)
        for cmds in self._timeline.values():
            for c in cmds:
                if c.get("kind") == "block_on" and isinstance(c.get("id"), int):
                    used.add(c["id"])
        while self._next_block_id in used:
            self._next_block_id += 1
        bid = self._next_block_id
        self._next_block_id += 1
        return bid

    def _apply(self, cmd: dict) -> None:
        kind = cmd["kind"]
        if kind == "nudge":
            self._nudges_now.append(
                PerturbationEvent(
                    t=int(cmd["t"]), kind="nudge",
                    point=(float(cmd.get("x", 0.0)), float(cmd.get("y", 0.0))),
                    impulse=(float(cmd["jx"]), float(cmd["jy"])),
                )
            )
        elif kind == "block_on":
            if "id" not in cmd:
                cmd["id"] = self._claim_block_id()
            bid = int(cmd["id"])
            self._blocks[bid] = (
                (float(cmd["x1"]), float(cmd["y1"])),
                (float(cmd["x2"]), float(cmd["y2"])),
            )
        elif kind == "block_off":
            self._blocks.pop(int(cmd["id"]), None)
        elif kind == "set_condition":
            cond = normalize_condition(cmd["condition"])
            if self._policy_override is None and cond not in self._policies:
                self._policies[cond] = self._make_policy(cond)
            if cond in self._policies:
                self.condition = cond
        # pause/resume carry no engine effect; they are recorded for replay
        self._applied.append(dict(cmd))

    # -- stepping ---------------------------------------------------------

    def tick(self) -> StepDiagnostics:
        """One full tick; returns the active policy's diagnostics."""
        t = self.t
        self._nudges_now = []
        for cmd in self._timeline.pop(t, ()):  # atomic at the boundary
            reason = self.validate_command(cmd) if cmd["kind"] == "nudge" else None
            if reason is not None:
                raise ConfigError(f"timeline command at t={t} invalid: {reason}")
            self._apply(cmd)

        active = ActivePerturbations(
            nudges=self._nudges_now,
            blocks=list(self._blocks.items()),
        )
        s = self.cfg.plant.sense(self.prev_state, self.state, self._noise_rng)
        if not np.all(np.isfinite(s)):
            self._abort("non-finite sensor reading")
            return self.last_diag
        motor, diag = self.policy.act(s, self.state)
        new_state = self.cfg.plant.step(self.state, motor, active)

        self._rows.append(
            (
                t, self.state.x, self.state.y, self.state.heading,
                float(motor[0]), float(motor[1]), s,
                diag.ds_t, diag.xi_tm1, diag.tipi, diag.xi_norm, self.condition,
            )
        )
        if not new_state.is_finite():
            self._abort("non-finite robot state")
            return diag
        self.prev_state = self.state
        self.state = new_state
        self.t = t + 1
        self.last_diag = diag
        return diag

    def _abort(self, reason: str) -> None:
        self.abort = {"t": self.t, "reason": reason}

    def run(self, steps: int | None = None) -> TrajectoryLog:
        limit = self.cfg.duration_steps if steps is None else steps
        while self.t < limit and self.abort is None:
            self.tick()
        return self.finalize()

    def finalize(self) -> TrajectoryLog:
        rows = self._rows
        n = 5
        return TrajectoryLog(
            condition=self.cfg.condition,
            seed=self.cfg.seed,
            config=self.cfg.echo(),
            t=np.array([r[0] for r in rows], dtype=int),
            x=np.array([r[1] for r in rows]),
            y=np.array([r[2] for r in rows]),
            heading=np.array([r[3] for r in rows]),
            motor=np.array([[r[4], r[5]] for r in rows]),
            sensor=np.array([r[6] for r in rows]).reshape(len(rows), n),
            ds=np.array([r[7] for r in rows]).reshape(len(rows), n),
            xi=np.array([r[8] for r in rows]).reshape(len(rows), n),
            tipi=np.array([r[9] for r in rows]),
            xi_norm=np.array([r[10] for r in rows]),
            condition_tag=np.array([r[11] for r in rows]),
            commands=list(self._applied),
            abort=self.abort,
        )
