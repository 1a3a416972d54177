"""Deterministic fixed-step 2D plant: a driven sphere on a walled round table.

The sphere hides a differential-drive cart; wheel speeds relax toward the
command with a first-order lag, the body velocity blends toward the
kinematic drive velocity at a traction rate, and the enclosing wall is
resolved by position projection plus partial velocity reflection, which
makes containment unconditional.  Within a step the order is fixed:
actuation lag, traction, impulses, integration, wall, blocks, and a final
containment projection.  Everything is scalar float math so that a tick
costs microseconds and trajectories replay bit-identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    r = math.fmod(a + math.pi, TWO_PI)
    if r <= 0.0:
        r += TWO_PI
    return r - math.pi


@dataclass
class TableGeometry:
    radius: float = 0.455
    wall_restitution: float = 0.4
    surface_friction: float = 8.0  # traction rate, 1/s

    def __post_init__(self):
        if self.radius <= 0:
            raise ConfigError("table radius must be > 0")
        if not (0.0 <= self.wall_restitution <= 1.0):
            raise ConfigError("wall_restitution must lie in [0, 1]")
        if self.surface_friction < 0:
            raise ConfigError("surface_friction must be >= 0")


@dataclass
class RobotBody:
    sphere_radius: float = 0.037
    mass: float = 0.2
    track_width: float = 0.05
    max_wheel_speed: float = 1.0
    actuation_tau: float = 0.15
    # the shell slips against the floor under differential drive; the
    # kinematic (v_r - v_l) / track yaw rate is capped at this slip limit
    max_yaw_rate: float = 6.0

    def __post_init__(self):
        for name in ("sphere_radius", "mass", "track_width", "max_wheel_speed",
                      "actuation_tau", "max_yaw_rate"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if self.track_width >= 2.0 * self.sphere_radius:
            raise ConfigError("track_width must be smaller than the sphere diameter")


@dataclass
class SensorNoise:
    accel: float = 0.05
    gyro: float = 0.02
    wheel: float = 0.01

    def __post_init__(self):
        for name in ("accel", "gyro", "wheel"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(f"noise sigma {name} must be finite and >= 0")

    def sigma_vector(self) -> np.ndarray:
        return np.array([self.accel, self.accel, self.gyro, self.wheel, self.wheel])


@dataclass
class RobotState:
    """Pose, velocities and actual wheel speeds; a value, never shared."""

    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    ang_vel: float = 0.0
    wheel_left: float = 0.0
    wheel_right: float = 0.0

    @property
    def pos(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def lin_vel(self) -> np.ndarray:
        return np.array([self.vx, self.vy])

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)

    def is_finite(self) -> bool:
        return all(
            math.isfinite(v)
            for v in (self.x, self.y, self.heading, self.vx, self.vy,
                      self.ang_vel, self.wheel_left, self.wheel_right)
        )


@dataclass
class PerturbationEvent:
    """A scripted or interactive wand action, stamped by step index."""

    t: int
    kind: str  # "nudge" | "block_on" | "block_off"
    point: tuple[float, float] = (0.0, 0.0)
    impulse: tuple[float, float] = (0.0, 0.0)  # nudge only, N*s
    segment: tuple[tuple[float, float], tuple[float, float]] | None = None  # blocks
    block_id: int | None = None

    def __post_init__(self):
        if self.kind not in ("nudge", "block_on", "block_off"):
            raise ConfigError(f"unknown perturbation kind {self.kind!r}")
        if self.t < 0:
            raise ConfigError("perturbation step index must be >= 0")


@dataclass
class ActivePerturbations:
    """What acts on the plant at one step: nudges firing now, blocks standing."""

    nudges: list[PerturbationEvent] = field(default_factory=list)
    blocks: list[tuple[int, tuple[tuple[float, float], tuple[float, float]]]] = field(
        default_factory=list
    )


class PerturbationSchedule:
    """Compiled schedule: nudges by step, blocks as [on, off) intervals.

    block_on/block_off events pair by explicit block_id when given,
    otherwise first-on-first-off.  A block_off earlier than its block_on,
    or a dangling block_off, is a config error.
    """

    def __init__(self, events: list[PerturbationEvent], table: TableGeometry | None = None,
                 max_impulse: float | None = None):
        events = sorted(events, key=lambda e: e.t)
        self.events = events
        self.nudges_by_step: dict[int, list[PerturbationEvent]] = {}
        self.intervals: list[tuple[int, int, int, tuple]] = []  # (on, off, id, segment)
        open_blocks: dict[int, tuple[int, tuple]] = {}
        open_order: list[int] = []
        next_id = 0
        for e in events:
            if e.kind == "nudge":
                jx, jy = e.impulse
                if not (math.isfinite(jx) and math.isfinite(jy)):
                    raise ConfigError("nudge impulse must be finite")
                if max_impulse is not None and math.hypot(jx, jy) > max_impulse:
                    raise ConfigError(
                        f"nudge impulse {math.hypot(jx, jy):.4f} exceeds max {max_impulse}"
                    )
                self.nudges_by_step.setdefault(e.t, []).append(e)
            elif e.kind == "block_on":
                if e.segment is None:
                    raise ConfigError("block_on needs a segment")
                if table is not None:
                    for px, py in e.segment:
                        if math.hypot(px, py) > table.radius:
                            raise ConfigError("block segment endpoint outside the table")
                bid = e.block_id if e.block_id is not None else next_id
                next_id = max(next_id, bid + 1)
                if bid in open_blocks:
                    raise ConfigError(f"block id {bid} already open")
                open_blocks[bid] = (e.t, e.segment)
                open_order.append(bid)
            else:  # block_off
                if e.block_id is not None:
                    bid = e.block_id
                elif open_order:
                    bid = open_order[0]
                else:
                    raise ConfigError("block_off without a matching block_on")
                if bid not in open_blocks:
                    raise ConfigError(f"block_off for unknown block id {bid}")
                t_on, seg = open_blocks.pop(bid)
                open_order.remove(bid)
                if e.t < t_on:
                    raise ConfigError(f"block interval ends at {e.t} before it starts at {t_on}")
                self.intervals.append((t_on, e.t, bid, seg))
        for bid, (t_on, seg) in open_blocks.items():
            self.intervals.append((t_on, 2**62, bid, seg))  # never switched off

    def active(self, t: int) -> ActivePerturbations:
        blocks = [(bid, seg) for (on, off, bid, seg) in self.intervals if on <= t < off]
        return ActivePerturbations(nudges=self.nudges_by_step.get(t, []), blocks=blocks)


def apply_perturbation_schedule(
    schedule: "PerturbationSchedule | list[PerturbationEvent]", t: int
) -> ActivePerturbations:
    """Active set at step t: nudges firing exactly at t, blocks in [on, off)."""
    if not isinstance(schedule, PerturbationSchedule):
        schedule = PerturbationSchedule(schedule)
    return schedule.active(t)


def _resolve_wall(st: RobotState, table: TableGeometry, body: RobotBody) -> None:
    r_in = table.radius - body.sphere_radius
    d = math.hypot(st.x, st.y)
    if d <= r_in or d == 0.0:
        return
    nx, ny = st.x / d, st.y / d
    st.x, st.y = nx * r_in, ny * r_in
    vn = st.vx * nx + st.vy * ny
    if vn > 0.0:
        k = (1.0 + table.wall_restitution) * vn
        st.vx -= k * nx
        st.vy -= k * ny


def _resolve_block(st: RobotState, seg, table: TableGeometry, body: RobotBody) -> None:
    (ax, ay), (bx, by) = seg
    ex, ey = bx - ax, by - ay
    ll = ex * ex + ey * ey
    if ll == 0.0:
        cx, cy = ax, ay
    else:
        u = ((st.x - ax) * ex + (st.y - ay) * ey) / ll
        u = min(1.0, max(0.0, u))
        cx, cy = ax + u * ex, ay + u * ey
    dx, dy = st.x - cx, st.y - cy
    d = math.hypot(dx, dy)
    if d >= body.sphere_radius:
        return
    if d == 0.0:
        # center exactly on the segment: push along the segment normal
        if ll == 0.0:
            nx, ny = 1.0, 0.0
        else:
            inv = 1.0 / math.sqrt(ll)
            nx, ny = -ey * inv, ex * inv
    else:
        nx, ny = dx / d, dy / d
    st.x = cx + nx * body.sphere_radius
    st.y = cy + ny * body.sphere_radius
    vn = st.vx * nx + st.vy * ny
    if vn < 0.0:
        k = (1.0 + table.wall_restitution) * vn
        st.vx -= k * nx
        st.vy -= k * ny


def step_physics(
    state: RobotState,
    cmd,
    dt: float,
    table: TableGeometry,
    body: RobotBody,
    active: ActivePerturbations | None = None,
) -> RobotState:
    """Advance the plant one step; returns a new state, input untouched."""
    if dt <= 0:
        raise InputError("dt must be > 0")
    cl, cr = float(cmd[0]), float(cmd[1])
    if not (math.isfinite(cl) and math.isfinite(cr)):
        raise InputError("non-finite motor command")
    cl = min(1.0, max(-1.0, cl))
    cr = min(1.0, max(-1.0, cr))

    st = RobotState(
        state.x, state.y, state.heading,
        state.vx, state.vy, state.ang_vel,
        state.wheel_left, state.wheel_right,
    )

    # actuation lag toward the commanded wheel speeds
    k_act = 1.0 - math.exp(-dt / body.actuation_tau)
    st.wheel_left += (cl * body.max_wheel_speed - st.wheel_left) * k_act
    st.wheel_right += (cr * body.max_wheel_speed - st.wheel_right) * k_act

    # differential-drive kinematics blended with free-rolling inertia
    v_drive = 0.5 * (st.wheel_left + st.wheel_right)
    w_drive = (st.wheel_right - st.wheel_left) / body.track_width
    w_drive = min(body.max_yaw_rate, max(-body.max_yaw_rate, w_drive))
    k_grip = 1.0 - math.exp(-table.surface_friction * dt)
    ch, sh = math.cos(st.heading), math.sin(st.heading)
    st.vx += (v_drive * ch - st.vx) * k_grip
    st.vy += (v_drive * sh - st.vy) * k_grip
    st.ang_vel += (w_drive - st.ang_vel) * k_grip

    if active is not None:
        for nudge in active.nudges:
            st.vx += nudge.impulse[0] / body.mass
            st.vy += nudge.impulse[1] / body.mass

    st.x += st.vx * dt
    st.y += st.vy * dt
    st.heading = wrap_angle(st.heading + st.ang_vel * dt)

    _resolve_wall(st, table, body)
    if active is not None:
        for _bid, seg in active.blocks:
            _resolve_block(st, seg, table, body)
        # a block may have shoved the sphere outward; containment is unconditional
        _resolve_wall(st, table, body)
    return st


def read_sensors(
    prev: RobotState,
    cur: RobotState,
    dt: float,
    body: RobotBody,
    noise: SensorNoise,
    rng: np.random.Generator,
) -> np.ndarray:
    """Synthesize the five sensor channels from two consecutive states.

    Body-frame accelerations come from finite differences of the world
    velocity rotated into the current heading frame; the gyro reads the
    yaw rate directly; wheel channels are actual speeds normalized by the
    top speed.  Gaussian noise is always drawn from the stream (even at
    sigma zero) so the stream position is independent of the noise level.
    """
    if dt <= 0:
        raise InputError("dt must be > 0")
    ax_w = (cur.vx - prev.vx) / dt
    ay_w = (cur.vy - prev.vy) / dt
    ch, sh = math.cos(cur.heading), math.sin(cur.heading)
    s = np.array(
        [
            ax_w * ch + ay_w * sh,    # forward
            -ax_w * sh + ay_w * ch,   # lateral (left positive)
            cur.ang_vel,
            cur.wheel_left / body.max_wheel_speed,
            cur.wheel_right / body.max_wheel_speed,
        ]
    )
    s += rng.standard_normal(5) * noise.sigma_vector()
    return s


@dataclass
class SpherePlant:
    """Bundles the plant configuration for the session loop."""

    table: TableGeometry = field(default_factory=TableGeometry)
    body: RobotBody = field(default_factory=RobotBody)
    noise: SensorNoise = field(default_factory=SensorNoise)
    dt: float = 0.05

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError("dt must be > 0")
        if self.table.radius <= self.body.sphere_radius:
            raise ConfigError("table radius must exceed the sphere radius")

    def step(self, state: RobotState, cmd, active: ActivePerturbations | None = None) -> RobotState:
        return step_physics(state, cmd, self.dt, self.table, self.body, active)

    def sense(self, prev: RobotState, cur: RobotState, rng: np.random.Generator) -> np.ndarray:
        return read_sensors(prev, cur, self.dt, self.body, self.noise, rng)


def generate_nudge_schedule(
    duration_steps: int,
    seed: int,
    period_steps: int = 200,
    magnitude: float = 0.05,
) -> list[PerturbationEvent]:
    """Scripted stand-in for wand use: one nudge per period, random direction.

    Directions come from a dedicated seeded stream so the schedule is a
    pure function of (duration, seed, period, magnitude).
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(7,)))
    events = []
    for t in range(period_steps, duration_steps, period_steps):
        angle = rng.uniform(0.0, TWO_PI)
        events.append(
            PerturbationEvent(
                t=t,
                kind="nudge",
                point=(0.0, 0.0),
                impulse=(magnitude * math.cos(angle), magnitude * math.sin(angle)),
            )
        )
    return events
