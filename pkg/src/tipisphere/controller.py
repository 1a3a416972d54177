"""Online TiPI-maximizing controller.

The sensorimotor loop is a pair of one-layer networks: a controller
``y = tanh(C s + h)`` that drives the motors, and a linear predictor
``s' ~ A y + b`` stacked on top of it, so the composed forward model is

    psi(s) = A tanh(C s + h) + b.

Each tick the controller rebuilds a two-step window of predictions from
the sensor/parameter history, tracks the covariance of the accumulated
deviation ``ds`` and of the one-step prediction error ``xi``, and climbs
the time-local predictive information (TiPI) landscape

    I = 1/2 ln|Sigma| - 1/2 ln|D|

by a one-shot gradient step on the controller weights, while the
predictor is trained by plain gradient descent on the squared one-step
error.  All state lives in plain numpy arrays; nothing here is random
except the seeded initializer.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NotWarmedUpError, NumericDomainError

PARAM_CLAMP = 5.0

# Sensor channel order for the sphere plant (n = 5).
CHANNELS = ("accel_forward", "accel_lateral", "gyro_yaw", "wheel_left", "wheel_right")
CH_ACCEL_FWD, CH_ACCEL_LAT, CH_GYRO, CH_WHEEL_L, CH_WHEEL_R = range(5)


def as_sensor_vector(values, n: int | None = None) -> np.ndarray:
    """Validate and return a sensor vector as a float64 array."""
    s = np.asarray(values, dtype=float)
    if s.ndim != 1:
        raise InputError(f"sensor vector must be 1-d, got shape {s.shape}")
    if n is not None and s.shape[0] != n:
        raise InputError(f"sensor vector has length {s.shape[0]}, expected {n}")
    if not np.all(np.isfinite(s)):
        raise InputError("sensor vector contains non-finite entries")
    return s


@dataclass
class ControllerParams:
    """Weights of the behavior-generating network: y = tanh(C s + h)."""

    C: np.ndarray  # (m, n)
    h: np.ndarray  # (m,)

    def __post_init__(self):
        self.C = np.asarray(self.C, dtype=float)
        self.h = np.asarray(self.h, dtype=float)
        if self.C.ndim != 2 or self.h.ndim != 1 or self.C.shape[0] != self.h.shape[0]:
            raise InputError(f"inconsistent controller shapes {self.C.shape}, {self.h.shape}")

    @property
    def m(self) -> int:
        return self.C.shape[0]

    @property
    def n(self) -> int:
        return self.C.shape[1]

    def copy(self) -> "ControllerParams":
        return ControllerParams(self.C.copy(), self.h.copy())

    def clamp(self) -> None:
        np.clip(self.C, -PARAM_CLAMP, PARAM_CLAMP, out=self.C)
        np.clip(self.h, -PARAM_CLAMP, PARAM_CLAMP, out=self.h)


@dataclass
class ModelParams:
    """Weights of the linear predictor head: s' ~ A y + b."""

    A: np.ndarray  # (n, m)
    b: np.ndarray  # (n,)

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.A.ndim != 2 or self.b.ndim != 1 or self.A.shape[0] != self.b.shape[0]:
            raise InputError(f"inconsistent model shapes {self.A.shape}, {self.b.shape}")

    def copy(self) -> "ModelParams":
        return ModelParams(self.A.copy(), self.b.copy())

    def clamp(self) -> None:
        np.clip(self.A, -PARAM_CLAMP, PARAM_CLAMP, out=self.A)
        np.clip(self.b, -PARAM_CLAMP, PARAM_CLAMP, out=self.b)


@dataclass
class LearningConfig:
    """Update rates and the max-norm clip applied to the one-shot gradient."""

    eps_controller: float = 0.01
    eps_model: float = 0.05
    grad_clip: float = 0.05

    def __post_init__(self):
        if not (np.isfinite(self.eps_controller) and self.eps_controller >= 0):
            raise InputError("eps_controller must be finite and >= 0")
        if not (np.isfinite(self.eps_model) and self.eps_model >= 0):
            raise InputError("eps_model must be finite and >= 0")
        if not (np.isfinite(self.grad_clip) and self.grad_clip > 0):
            raise InputError("grad_clip must be finite and > 0")


@dataclass
class LoopWindow:
    """Two-step history with predictions, deviations and prediction error.

    Invariants: the deviation at the window anchor (t-2) is identically
    zero and ``ds_tm1 == xi_tm1`` exactly, because one step after the
    anchor the accumulated deviation *is* the raw prediction error.
    """

    s_tm2: np.ndarray
    s_tm1: np.ndarray
    s_t: np.ndarray
    shat_tm1: np.ndarray
    shat_t: np.ndarray
    ds_tm1: np.ndarray
    ds_t: np.ndarray
    xi_tm1: np.ndarray


class CovarianceEstimator:
    """Exponential moving average of deviation/error second moments.

    ``sigma`` and ``d_cov`` expose the ridged matrices actually used for
    inversion and determinants: the stored EMA of outer products plus
    ``ridge * I``.  The EMA of rank-1 terms is positive semidefinite, so
    the exposed matrices are symmetric positive definite with smallest
    eigenvalue >= ridge.
    """

    def __init__(self, n: int, ema_decay: float = 0.99, ridge: float = 1e-4):
        if not (0.0 <= ema_decay <= 1.0):
            raise InputError("ema_decay must lie in [0, 1]")
        if not (np.isfinite(ridge) and ridge > 0):
            raise InputError("ridge must be finite and > 0")
        self.n = n
        self.ema_decay = float(ema_decay)
        self.ridge = float(ridge)
        self._sigma_ema = np.zeros((n, n))
        self._d_ema = np.zeros((n, n))

    @property
    def sigma(self) -> np.ndarray:
        return self._sigma_ema + self.ridge * np.eye(self.n)

    @property
    def d_cov(self) -> np.ndarray:
        return self._d_ema + self.ridge * np.eye(self.n)

    def update(self, ds_t: np.ndarray, xi_tm1: np.ndarray) -> "CovarianceEstimator":
        g = self.ema_decay
        sig = g * self._sigma_ema + (1.0 - g) * np.outer(ds_t, ds_t)
        d = g * self._d_ema + (1.0 - g) * np.outer(xi_tm1, xi_tm1)
        self._sigma_ema = 0.5 * (sig + sig.T)
        self._d_ema = 0.5 * (d + d.T)
        return self

    def copy(self) -> "CovarianceEstimator":
        out = CovarianceEstimator(self.n, self.ema_decay, self.ridge)
        out._sigma_ema = self._sigma_ema.copy()
        out._d_ema = self._d_ema.copy()
        return out


# float64 tanh rounds to exactly +-1.0 for |z| > ~19; keep outputs strictly
# inside the open interval the motor contract promises
_ONE_INSIDE = float(np.nextafter(1.0, 0.0))


def controller_act(s: np.ndarray, cp: ControllerParams) -> np.ndarray:
    """Motor command y = tanh(C s + h), each entry in (-1, 1)."""
    s = np.asarray(s, dtype=float)
    if s.shape != (cp.n,):
        raise InputError(f"sensor shape {s.shape} does not match controller n={cp.n}")
    return np.clip(np.tanh(cp.C @ s + cp.h), -_ONE_INSIDE, _ONE_INSIDE)


def loop_psi(s: np.ndarray, cp: ControllerParams, mp: ModelParams) -> np.ndarray:
    """One-step forward prediction psi(s) = A tanh(C s + h) + b."""
    s = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s)):
        raise InputError("non-finite sensor input to loop_psi")
    if mp.A.shape != (cp.n, cp.m):
        raise InputError(f"model shape {mp.A.shape} does not match controller ({cp.n}, {cp.m})")
    return mp.A @ controller_act(s, cp) + mp.b


def loop_jacobian(s: np.ndarray, cp: ControllerParams, mp: ModelParams) -> np.ndarray:
    """Jacobian of the forward map, L_ij = d psi_i / d s_j.

    For the tanh loop this is A diag(1 - tanh^2(C s + h)) C; saturation of
    any controller unit zeroes the corresponding column of the product.
    """
    s = np.asarray(s, dtype=float)
    if s.shape != (cp.n,):
        raise InputError(f"sensor shape {s.shape} does not match controller n={cp.n}")
    if mp.A.shape != (cp.n, cp.m):
        raise InputError(f"model shape {mp.A.shape} does not match controller ({cp.n}, {cp.m})")
    y = np.tanh(cp.C @ s + cp.h)
    return (mp.A * (1.0 - y * y)) @ cp.C


def update_window(
    s_tm2: np.ndarray,
    s_tm1: np.ndarray,
    s_t: np.ndarray,
    cp_tm2: ControllerParams,
    mp_tm2: ModelParams,
    cp_tm1: ControllerParams,
    mp_tm1: ModelParams,
) -> LoopWindow:
    """Rebuild the two-step window from raw readings and parameter history.

    Predictions are recomputed with the parameters that were in effect at
    the respective ticks: shat_{t-1} = psi(s_{t-2}; theta_{t-2}) and
    shat_t = psi(shat_{t-1}; theta_{t-1}).
    """
    shat_tm1 = loop_psi(s_tm2, cp_tm2, mp_tm2)
    shat_t = loop_psi(shat_tm1, cp_tm1, mp_tm1)
    ds_tm1 = s_tm1 - shat_tm1
    ds_t = s_t - shat_t
    return LoopWindow(
        s_tm2=s_tm2,
        s_tm1=s_tm1,
        s_t=s_t,
        shat_tm1=shat_tm1,
        shat_t=shat_t,
        ds_tm1=ds_tm1,
        ds_t=ds_t,
        xi_tm1=ds_tm1.copy(),
    )


def covariance_update(est: CovarianceEstimator, w: LoopWindow) -> CovarianceEstimator:
    """Fold the window's deviation and prediction error into the estimator."""
    return est.update(w.ds_t, w.xi_tm1)


def _logdet_pd(mat: np.ndarray, what: str) -> float:
    try:
        chol = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise NumericDomainError(f"{what} is not positive definite") from exc
    return 2.0 * float(np.sum(np.log(np.diag(chol))))


def tipi_value(est: CovarianceEstimator) -> float:
    """TiPI in nats: 1/2 ln|Sigma| - 1/2 ln|D|.

    Can be negative for estimated covariances (an estimator artifact, not
    a property of the underlying mutual information).
    """
    return 0.5 * (_logdet_pd(est.sigma, "sigma") - _logdet_pd(est.d_cov, "d_cov"))


def controller_gradient(
    w: LoopWindow,
    est: CovarianceEstimator,
    cp: ControllerParams,
    mp: ModelParams,
    cfg: LearningConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """One-shot ascent step on the controller weights.

    Treating the measured ds_{t-1} and the linearization residual as
    noise (theta enters only through the Jacobian L(s_{t-1})), the
    gradient of 1/2 ln|Sigma| contracts to

        dTheta = du^T (dL(s_{t-1}) / dTheta) ds_{t-1},   du = Sigma^-1 ds_t,

    which for the tanh loop has the closed form implemented here.  The
    result is scaled by eps_controller and rescaled (direction preserved)
    if its max-norm exceeds grad_clip.
    """
    v = w.ds_tm1
    if not np.any(v):
        return np.zeros_like(cp.C), np.zeros_like(cp.h)
    try:
        u = np.linalg.solve(est.sigma, w.ds_t)
    except np.linalg.LinAlgError as exc:
        raise NumericDomainError("sigma is singular") from exc

    s = w.s_tm1
    y = np.tanh(cp.C @ s + cp.h)
    g = 1.0 - y * y
    gp = -2.0 * y * g  # d/dz of (1 - tanh^2 z)
    p = mp.A.T @ u
    q = cp.C @ v

    dh = gp * p * q
    dC = np.outer(dh, s) + np.outer(g * p, v)

    eps = cfg.eps_controller
    dC *= eps
    dh *= eps
    max_norm = max(np.max(np.abs(dC)), np.max(np.abs(dh)), 0.0)
    if max_norm > cfg.grad_clip:
        scale = cfg.grad_clip / max_norm
        dC *= scale
        dh *= scale
    return dC, dh


def model_update(
    w: LoopWindow,
    mp: ModelParams,
    y_prev: np.ndarray,
    cfg: LearningConfig,
) -> ModelParams:
    """Gradient-descent step of the predictor on 1/2 ||xi||^2.

    ``y_prev`` is the motor command recorded two ticks back, i.e. the
    regressor that actually produced the transition behind xi_{t-1}.
    """
    out = mp.copy()
    out.A += cfg.eps_model * np.outer(w.xi_tm1, y_prev)
    out.b += cfg.eps_model * w.xi_tm1
    out.clamp()
    return out


@dataclass
class StepDiagnostics:
    """Per-tick health report emitted by TipiController.step."""

    t: int
    tipi: float = 0.0
    xi_norm: float = 0.0
    dtheta_norm: float = 0.0
    learned: bool = False
    warmup: bool = False
    skipped_nonfinite: bool = False
    ds_t: np.ndarray = field(default_factory=lambda: np.zeros(0))
    xi_tm1: np.ndarray = field(default_factory=lambda: np.zeros(0))


def init_params(
    n: int,
    m: int,
    rng: np.random.Generator,
    wheel_coupling: float = 0.8,
    model_init_range: float = 0.1,
) -> tuple[ControllerParams, ModelParams]:
    """Starting weights: wheel readings amplify their own servo output.

    On the sphere plant (n=5, m=2) the controller starts as a pure
    positive feedback from each wheel-speed channel to its own servo,
    giving a slow forward creep out of sensor noise instead of an abrupt
    first impression.  The predictor matrix starts small and random from
    the seeded stream; everything else is zero.
    """
    C = np.zeros((m, n))
    if n == 5 and m == 2:
        C[0, CH_WHEEL_L] = wheel_coupling
        C[1, CH_WHEEL_R] = wheel_coupling
    h = np.zeros(m)
    A = rng.uniform(-model_init_range, model_init_range, size=(n, m))
    b = np.zeros(n)
    return ControllerParams(C, h), ModelParams(A, b)


class TipiController:
    """Full online loop: window upkeep, covariance tracking, both updates.

    The first two ticks only collect history (acting without learning);
    afterwards every tick runs window -> covariance -> model update ->
    controller ascent -> act.  Any non-finite intermediate skips that
    tick's learning and is flagged in the diagnostics; the motor output
    is still produced.
    """

    def __init__(
        self,
        cp: ControllerParams,
        mp: ModelParams,
        cfg: LearningConfig | None = None,
        ema_decay: float = 0.99,
        ridge: float = 1e-4,
        seed: int | None = None,
    ):
        if mp.A.shape != (cp.n, cp.m):
            raise InputError("controller/model dimensions disagree")
        self.cp = cp
        self.mp = mp
        self.cfg = cfg if cfg is not None else LearningConfig()
        self.est = CovarianceEstimator(cp.n, ema_decay=ema_decay, ridge=ridge)
        self.seed = seed
        self.t = 0
        self._s_hist: list[np.ndarray] = []
        self._y_hist: list[np.ndarray] = []
        self._theta_hist: list[tuple[ControllerParams, ModelParams]] = []

    @property
    def n(self) -> int:
        return self.cp.n

    @property
    def m(self) -> int:
        return self.cp.m

    @classmethod
    def create(
        cls,
        n: int = 5,
        m: int = 2,
        cfg: LearningConfig | None = None,
        ema_decay: float = 0.99,
        ridge: float = 1e-4,
        seed: int = 0,
        wheel_coupling: float = 0.8,
        model_init_range: float = 0.1,
    ) -> "TipiController":
        rng = np.random.default_rng(seed)
        cp, mp = init_params(n, m, rng, wheel_coupling, model_init_range)
        return cls(cp, mp, cfg, ema_decay=ema_decay, ridge=ridge, seed=seed)

    def current_window(self, s_t: np.ndarray) -> LoopWindow:
        if len(self._s_hist) < 2:
            raise NotWarmedUpError("need two prior sensor readings before a window exists")
        (cp2, mp2), (cp1, mp1) = self._theta_hist
        return update_window(self._s_hist[0], self._s_hist[1], s_t, cp2, mp2, cp1, mp1)

    def step(self, s_t: np.ndarray) -> tuple[np.ndarray, StepDiagnostics]:
        s_t = as_sensor_vector(s_t, self.n)
        diag = StepDiagnostics(t=self.t, ds_t=np.zeros(self.n), xi_tm1=np.zeros(self.n))

        if len(self._s_hist) < 2:
            diag.warmup = True
        else:
            self._learn(s_t, diag)

        y = controller_act(s_t, self.cp)

        self._s_hist.append(s_t)
        self._y_hist.append(y)
        self._theta_hist.append((self.cp.copy(), self.mp.copy()))
        if len(self._s_hist) > 2:
            self._s_hist.pop(0)
            self._y_hist.pop(0)
            self._theta_hist.pop(0)
        self.t += 1
        return y, diag

    def _learn(self, s_t: np.ndarray, diag: StepDiagnostics) -> None:
        # overflow here is survivable by design: the non-finite result is
        # detected below and the tick's learning is skipped
        with np.errstate(over="ignore", invalid="ignore"):
            self._learn_inner(s_t, diag)

    # deviations big enough to overflow an outer product would poison the
    # covariance EMA with inf; treat them like non-finite readings
    _DEVIATION_LIMIT = 1e150

    def _learn_inner(self, s_t: np.ndarray, diag: StepDiagnostics) -> None:
        w = self.current_window(s_t)
        finite = np.all(np.isfinite(w.ds_t)) and np.all(np.isfinite(w.xi_tm1))
        if not finite or max(np.max(np.abs(w.ds_t)), np.max(np.abs(w.xi_tm1))) > self._DEVIATION_LIMIT:
            diag.skipped_nonfinite = True
            return
        covariance_update(self.est, w)
        diag.ds_t = w.ds_t
        diag.xi_tm1 = w.xi_tm1
        diag.xi_norm = float(np.linalg.norm(w.xi_tm1))
        try:
            diag.tipi = tipi_value(self.est)
            new_mp = model_update(w, self.mp, self._y_hist[0], self.cfg)
            dC, dh = controller_gradient(w, self.est, self.cp, self.mp, self.cfg)
        except NumericDomainError:
            diag.skipped_nonfinite = True
            return
        pieces = (new_mp.A - self.mp.A, new_mp.b - self.mp.b, dC, dh)
        if not all(np.all(np.isfinite(x)) for x in pieces):
            diag.skipped_nonfinite = True
            return
        self.mp = new_mp
        self.cp.C += dC
        self.cp.h += dh
        self.cp.clamp()
        diag.dtheta_norm = float(np.sqrt(sum(np.sum(x * x) for x in pieces)))
        diag.learned = True


# --- parameter snapshots ----------------------------------------------------

def snapshot_dict(ctrl: TipiController) -> dict:
    """JSON-ready snapshot of everything that defines the controller."""
    return {
        "n": ctrl.n,
        "m": ctrl.m,
        "C": ctrl.cp.C.tolist(),
        "h": ctrl.cp.h.tolist(),
        "A": ctrl.mp.A.tolist(),
        "b": ctrl.mp.b.tolist(),
        "ema_decay": ctrl.est.ema_decay,
        "ridge": ctrl.est.ridge,
        "eps_controller": ctrl.cfg.eps_controller,
        "eps_model": ctrl.cfg.eps_model,
        "grad_clip": ctrl.cfg.grad_clip,
        "seed": ctrl.seed,
    }


def controller_from_snapshot(doc: dict, cfg: LearningConfig | None = None) -> TipiController:
    """Rebuild a controller from a snapshot dict (weights and rates)."""
    cp = ControllerParams(np.array(doc["C"], dtype=float), np.array(doc["h"], dtype=float))
    mp = ModelParams(np.array(doc["A"], dtype=float), np.array(doc["b"], dtype=float))
    if cfg is None:
        cfg = LearningConfig(
            eps_controller=doc["eps_controller"],
            eps_model=doc["eps_model"],
            grad_clip=doc["grad_clip"],
        )
    return TipiController(
        cp, mp, cfg, ema_decay=doc["ema_decay"], ridge=doc["ridge"], seed=doc.get("seed")
    )


def params_digest(cp: ControllerParams, mp: ModelParams) -> str:
    """Content hash of the four weight blocks, stable across processes."""
    payload = json.dumps(
        {"C": cp.C.tolist(), "h": cp.h.tolist(), "A": mp.A.tolist(), "b": mp.b.tolist()},
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def save_snapshot(path, ctrl: TipiController, extra: dict | None = None) -> None:
    doc = snapshot_dict(ctrl)
    if extra:
        doc.update(extra)
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def load_snapshot(path) -> dict:
    with open(path) as f:
        return json.load(f)
