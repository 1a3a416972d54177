"""Unit and property tests for the TiPI controller core."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import tipisphere as tp
from tipisphere.errors import InputError, NotWarmedUpError, NumericDomainError


def random_instance(rng, n, m, scale=0.5):
    cp = tp.ControllerParams(rng.normal(size=(m, n)) * scale, rng.normal(size=m) * scale)
    mp = tp.ModelParams(rng.normal(size=(n, m)) * scale, rng.normal(size=n) * scale)
    return cp, mp


# --- controller_act -----------------------------------------------------------

def test_act_zero_weights_zero_output():
    cp = tp.ControllerParams(np.zeros((2, 5)), np.zeros(2))
    s = np.array([1.0, -2.0, 3.0, 0.5, -0.5])
    assert np.all(tp.controller_act(s, cp) == 0.0)


def test_act_bias_saturation():
    cp = tp.ControllerParams(np.zeros((2, 3)), np.array([10.0, -10.0]))
    y = tp.controller_act(np.zeros(3), cp)
    assert abs(y[0] - 1.0) < 1e-8
    assert abs(y[1] + 1.0) < 1e-8


def test_act_matches_scalar_reimplementation():
    rng = np.random.default_rng(11)
    cp, _ = random_instance(rng, 5, 2)
    s = rng.normal(size=5)
    y = tp.controller_act(s, cp)
    for i in range(2):
        z = sum(cp.C[i, j] * s[j] for j in range(5)) + cp.h[i]
        assert abs(y[i] - math.tanh(z)) < 1e-12


def test_act_dimension_mismatch_rejected():
    cp = tp.ControllerParams(np.zeros((2, 5)), np.zeros(2))
    with pytest.raises(InputError):
        tp.controller_act(np.zeros(4), cp)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_act_output_strictly_inside_unit_box(seed):
    rng = np.random.default_rng(seed)
    cp, _ = random_instance(rng, 4, 2, scale=3.0)
    y = tp.controller_act(rng.normal(size=4) * 10, cp)
    assert np.all(np.abs(y) < 1.0)


# --- loop_psi -----------------------------------------------------------------

def test_psi_collapses_to_bias_when_a_zero():
    rng = np.random.default_rng(1)
    cp, mp = random_instance(rng, 3, 2)
    mp.A[:] = 0.0
    for _ in range(5):
        s = rng.normal(size=3)
        assert np.allclose(tp.loop_psi(s, cp, mp), mp.b)


def test_psi_zero_controller_gives_bias():
    rng = np.random.default_rng(2)
    _, mp = random_instance(rng, 3, 2)
    cp = tp.ControllerParams(np.zeros((2, 3)), np.zeros(2))
    s = rng.normal(size=3)
    assert np.allclose(tp.loop_psi(s, cp, mp), mp.b)


def test_psi_two_step_composition_consistent():
    rng = np.random.default_rng(3)
    cp2, mp2 = random_instance(rng, 4, 2)
    cp1, mp1 = random_instance(rng, 4, 2)
    s = rng.normal(size=4)
    composed = tp.loop_psi(tp.loop_psi(s, cp2, mp2), cp1, mp1)
    step1 = tp.loop_psi(s, cp2, mp2)
    step2 = tp.loop_psi(step1, cp1, mp1)
    assert np.array_equal(composed, step2)


def test_psi_rejects_nonfinite():
    rng = np.random.default_rng(4)
    cp, mp = random_instance(rng, 3, 2)
    with pytest.raises(InputError):
        tp.loop_psi(np.array([1.0, np.nan, 0.0]), cp, mp)


# --- loop_jacobian --------------------------------------------------------------

def test_jacobian_identity_at_origin():
    n = 2
    cp = tp.ControllerParams(np.eye(n), np.zeros(n))
    mp = tp.ModelParams(np.eye(n), np.zeros(n))
    L = tp.loop_jacobian(np.zeros(n), cp, mp)
    assert np.allclose(L, np.eye(n))


def test_jacobian_vanishes_at_saturation():
    n = 2
    cp = tp.ControllerParams(np.eye(n) * 20.0, np.zeros(n))
    mp = tp.ModelParams(np.eye(n), np.zeros(n))
    L = tp.loop_jacobian(np.ones(n), cp, mp)
    assert np.max(np.abs(L)) < 1e-6


def jacobian_fd(s, cp, mp, step=1e-5):
    n = len(s)
    L = np.zeros((n, n))
    for j in range(n):
        sp, sm = s.copy(), s.copy()
        sp[j] += step
        sm[j] -= step
        L[:, j] = (tp.loop_psi(sp, cp, mp) - tp.loop_psi(sm, cp, mp)) / (2 * step)
    return L


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, 3))
        cp, mp = random_instance(rng, n, m)
        s = rng.normal(size=n) * 0.5
        L = tp.loop_jacobian(s, cp, mp)
        Lfd = jacobian_fd(s, cp, mp)
        denom = max(np.max(np.abs(Lfd)), 1e-12)
        assert np.max(np.abs(L - Lfd)) / denom < 1e-6


# --- window --------------------------------------------------------------------

def test_window_zero_deviation_for_perfect_predictions():
    rng = np.random.default_rng(6)
    cp, mp = random_instance(rng, 3, 2)
    s_tm2 = rng.normal(size=3)
    s_tm1 = tp.loop_psi(s_tm2, cp, mp)
    s_t = tp.loop_psi(s_tm1, cp, mp)
    w = tp.update_window(s_tm2, s_tm1, s_t, cp, mp, cp, mp)
    assert np.all(w.ds_tm1 == 0.0)
    assert np.all(w.ds_t == 0.0)


def test_window_one_step_deviation_is_prediction_error():
    rng = np.random.default_rng(7)
    cp, mp = random_instance(rng, 3, 2)
    s_tm2, s_tm1, s_t = (rng.normal(size=3) for _ in range(3))
    w = tp.update_window(s_tm2, s_tm1, s_t, cp, mp, cp, mp)
    assert np.array_equal(w.ds_tm1, w.xi_tm1)
    assert np.array_equal(w.ds_tm1, s_tm1 - tp.loop_psi(s_tm2, cp, mp))


def test_window_two_step_deviation_matches_composition():
    rng = np.random.default_rng(8)
    cp2, mp2 = random_instance(rng, 4, 2)
    cp1, mp1 = random_instance(rng, 4, 2)
    s_tm2, s_tm1, s_t = (rng.normal(size=4) for _ in range(3))
    w = tp.update_window(s_tm2, s_tm1, s_t, cp2, mp2, cp1, mp1)
    expected = s_t - tp.loop_psi(tp.loop_psi(s_tm2, cp2, mp2), cp1, mp1)
    assert np.array_equal(w.ds_t, expected)


def test_window_before_warmup_raises():
    ctrl = tp.TipiController.create(seed=0)
    with pytest.raises(NotWarmedUpError):
        ctrl.current_window(np.zeros(5))


# --- covariance estimator --------------------------------------------------------

def test_covariance_single_outer_product_plus_ridge():
    lam = 0.01
    est = tp.CovarianceEstimator(2, ema_decay=0.0, ridge=lam)
    est.update(np.array([1.0, 0.0]), np.zeros(2))
    assert np.allclose(est.sigma, np.diag([1.0 + lam, lam]))


def test_covariance_zero_stream_is_ridge_only():
    lam = 0.05
    est = tp.CovarianceEstimator(3, ema_decay=0.0, ridge=lam)
    for _ in range(10):
        est.update(np.zeros(3), np.zeros(3))
    assert np.allclose(est.sigma, lam * np.eye(3))
    assert np.allclose(est.d_cov, lam * np.eye(3))


def test_covariance_ema_tracks_known_covariance():
    rng = np.random.default_rng(9)
    K = np.array([[1.0, 0.3], [0.3, 0.5]])
    chol = np.linalg.cholesky(K)
    lam = 1e-4
    est = tp.CovarianceEstimator(2, ema_decay=0.999, ridge=lam)
    samples = (chol @ rng.standard_normal((2, 100000))).T
    for x in samples:
        est.update(x, x)
    target = K + lam * np.eye(2)
    err = np.linalg.norm(est.sigma - target) / np.linalg.norm(target)
    assert err < 0.10
    # sample-covariance oracle over the same stream agrees with the EMA scale
    oracle = samples.T @ samples / len(samples)
    assert np.linalg.norm(oracle - K) / np.linalg.norm(K) < 0.05


def test_covariance_symmetric_positive_definite():
    rng = np.random.default_rng(10)
    est = tp.CovarianceEstimator(3, ema_decay=0.9, ridge=1e-4)
    for _ in range(100):
        est.update(rng.normal(size=3), rng.normal(size=3))
    for mat in (est.sigma, est.d_cov):
        assert np.array_equal(mat, mat.T)
        assert np.min(np.linalg.eigvalsh(mat)) >= est.ridge * (1 - 1e-12)


# --- tipi_value ------------------------------------------------------------------

def test_tipi_identity_covariances_give_zero():
    est = tp.CovarianceEstimator(2, ema_decay=0.0, ridge=1e-4)
    est._sigma_ema = np.eye(2) - est.ridge * np.eye(2)
    est._d_ema = np.eye(2) - est.ridge * np.eye(2)
    assert abs(tp.tipi_value(est)) < 1e-12


def test_tipi_coinciding_covariances_give_zero():
    # one step after the window anchor the two covariances are the same matrix
    est = tp.CovarianceEstimator(3, ema_decay=0.0, ridge=1e-4)
    v = np.array([0.3, -0.2, 0.7])
    est.update(v, v)
    assert abs(tp.tipi_value(est)) < 1e-12


def test_tipi_analytic_determinant():
    est = tp.CovarianceEstimator(2, ema_decay=0.0, ridge=1e-4)
    e2 = math.e**2
    est._sigma_ema = np.eye(2) * e2 - est.ridge * np.eye(2)
    est._d_ema = np.eye(2) - est.ridge * np.eye(2)
    assert abs(tp.tipi_value(est) - 2.0) < 1e-12


def test_tipi_rejects_non_positive_definite():
    est = tp.CovarianceEstimator(2, ema_decay=0.0, ridge=1e-4)
    est._sigma_ema = np.array([[1.0, 2.0], [2.0, 1.0]])  # indefinite
    with pytest.raises(NumericDomainError):
        tp.tipi_value(est)


# --- controller_gradient ----------------------------------------------------------

def one_sample_objective(C, h, mp, s_tm1, ds_tm1, xi_lin, ridge):
    """Independent oracle: 1/2 ln|dhat dhat^T + ridge I| with dhat from the
    linearized deviation propagation at the perturbed parameters.

    The determinant of the rank-1 update is evaluated through the exact
    identity |v v^T + r I| = r^n (1 + |v|^2 / r), which keeps the
    finite-difference oracle's roundoff orders of magnitude below the
    tolerance even at small ridge.
    """
    y = np.tanh(C @ s_tm1 + h)
    L = (mp.A * (1.0 - y * y)) @ C
    dhat = L @ ds_tm1 + xi_lin
    n = len(dhat)
    return 0.5 * (n * np.log(ridge) + np.log1p(dhat @ dhat / ridge))


def gradient_instance(rng, n, m, ridge=1e-4):
    cp, mp = random_instance(rng, n, m, scale=0.7)
    s_tm2, s_tm1, s_t = (rng.normal(size=n) * 0.7 for _ in range(3))
    w = tp.update_window(s_tm2, s_tm1, s_t, cp.copy(), mp.copy(), cp.copy(), mp.copy())
    est = tp.CovarianceEstimator(n, ema_decay=0.0, ridge=ridge)
    est.update(w.ds_t, w.xi_tm1)
    return cp, mp, w, est


def gradient_fd(cp, mp, w, ridge, step=1e-5):
    L0 = tp.loop_jacobian(w.s_tm1, cp, mp)
    xi_lin = w.ds_t - L0 @ w.ds_tm1
    fdC = np.zeros_like(cp.C)
    for i in range(cp.m):
        for j in range(cp.n):
            Cp, Cm = cp.C.copy(), cp.C.copy()
            Cp[i, j] += step
            Cm[i, j] -= step
            fdC[i, j] = (
                one_sample_objective(Cp, cp.h, mp, w.s_tm1, w.ds_tm1, xi_lin, ridge)
                - one_sample_objective(Cm, cp.h, mp, w.s_tm1, w.ds_tm1, xi_lin, ridge)
            ) / (2 * step)
    fdh = np.zeros_like(cp.h)
    for i in range(cp.m):
        hp, hm = cp.h.copy(), cp.h.copy()
        hp[i] += step
        hm[i] -= step
        fdh[i] = (
            one_sample_objective(cp.C, hp, mp, w.s_tm1, w.ds_tm1, xi_lin, ridge)
            - one_sample_objective(cp.C, hm, mp, w.s_tm1, w.ds_tm1, xi_lin, ridge)
        ) / (2 * step)
    return fdC, fdh


def assert_gradient_close(analytic, fd, rel=1e-4, abs_floor=1e-8, mag_floor=1e-6):
    a, f = np.ravel(analytic), np.ravel(fd)
    for ai, fi in zip(a, f):
        if abs(fi) < mag_floor:
            assert abs(ai - fi) < abs_floor
        else:
            assert abs(ai - fi) / abs(fi) < rel


def test_gradient_zero_when_no_prior_deviation():
    rng = np.random.default_rng(12)
    cp, mp, w, est = gradient_instance(rng, 3, 2)
    w.ds_tm1[:] = 0.0
    dC, dh = tp.controller_gradient(w, est, cp, mp, tp.LearningConfig())
    assert np.all(dC == 0.0) and np.all(dh == 0.0)


def test_gradient_zero_when_rate_zero():
    rng = np.random.default_rng(13)
    cp, mp, w, est = gradient_instance(rng, 3, 2)
    cfg = tp.LearningConfig(eps_controller=0.0)
    dC, dh = tp.controller_gradient(w, est, cp, mp, cfg)
    assert np.all(dC == 0.0) and np.all(dh == 0.0)


def test_gradient_matches_finite_differences_100_instances():
    rng = np.random.default_rng(14)
    ridge = 1e-4
    cfg = tp.LearningConfig(eps_controller=1.0, eps_model=0.0, grad_clip=1e12)
    for _ in range(100):
        n = int(rng.integers(2, 5))
        m = int(rng.integers(1, 3))
        cp, mp, w, est = gradient_instance(rng, n, m, ridge)
        dC, dh = tp.controller_gradient(w, est, cp, mp, cfg)
        fdC, fdh = gradient_fd(cp, mp, w, ridge)
        assert_gradient_close(dC, fdC)
        assert_gradient_close(dh, fdh)


def test_gradient_clip_preserves_direction():
    rng = np.random.default_rng(15)
    cp, mp, w, est = gradient_instance(rng, 3, 2)
    free = tp.LearningConfig(eps_controller=5.0, grad_clip=1e12)
    clipped = tp.LearningConfig(eps_controller=5.0, grad_clip=1e-3)
    dC0, dh0 = tp.controller_gradient(w, est, cp, mp, free)
    dC1, dh1 = tp.controller_gradient(w, est, cp, mp, clipped)
    norm = max(np.max(np.abs(dC1)), np.max(np.abs(dh1)))
    assert norm <= 1e-3 + 1e-15
    scale = np.max(np.abs(dC0)) / np.max(np.abs(dC1))
    assert np.allclose(dC0, dC1 * scale)
    assert np.allclose(dh0, dh1 * scale)


# --- model_update ------------------------------------------------------------------

def test_model_update_no_error_no_change():
    rng = np.random.default_rng(16)
    cp, mp, w, _ = gradient_instance(rng, 3, 2)
    w.xi_tm1[:] = 0.0
    out = tp.model_update(w, mp, np.array([0.3, -0.1]), tp.LearningConfig())
    assert np.array_equal(out.A, mp.A) and np.array_equal(out.b, mp.b)


def test_model_update_zero_rate_no_change():
    rng = np.random.default_rng(17)
    cp, mp, w, _ = gradient_instance(rng, 3, 2)
    out = tp.model_update(w, mp, np.array([0.3, -0.1]), tp.LearningConfig(eps_model=0.0))
    assert np.array_equal(out.A, mp.A) and np.array_equal(out.b, mp.b)


def test_model_update_converges_to_linear_plant():
    # fixed command sequence in sign-alternating pairs (y, -y) so the bias
    # estimate stays put and the LMS contraction on A is clean
    rng = np.random.default_rng(18)
    n, m = 3, 2
    A_star = rng.normal(size=(n, m))
    b_star = np.zeros(n)
    mp = tp.ModelParams(np.zeros((n, m)), np.zeros(n))
    cfg = tp.LearningConfig(eps_model=0.01)
    errs = []
    y = np.zeros(m)
    for k in range(1000):
        y = rng.uniform(-1.0, 1.0, size=m) if k % 2 == 0 else -y
        s_next = A_star @ y + b_star
        xi = s_next - (mp.A @ y + mp.b)
        w = tp.LoopWindow(
            s_tm2=np.zeros(n), s_tm1=s_next, s_t=np.zeros(n),
            shat_tm1=np.zeros(n), shat_t=np.zeros(n),
            ds_tm1=xi.copy(), ds_t=np.zeros(n), xi_tm1=xi,
        )
        mp = tp.model_update(w, mp, y, cfg)
        errs.append(np.linalg.norm(mp.A - A_star))
    errs = np.array(errs)
    assert np.all(np.diff(errs) < 0.0), "error must decrease monotonically"
    # least-squares oracle: the fixed point of the recursion is A_star itself
    assert errs[-1] < 0.05 * errs[0]


def test_model_update_respects_clamp():
    n, m = 2, 2
    mp = tp.ModelParams(np.full((n, m), 4.9), np.full(n, 4.9))
    w = tp.LoopWindow(
        s_tm2=np.zeros(n), s_tm1=np.zeros(n), s_t=np.zeros(n),
        shat_tm1=np.zeros(n), shat_t=np.zeros(n),
        ds_tm1=np.zeros(n), ds_t=np.zeros(n), xi_tm1=np.full(n, 100.0),
    )
    out = tp.model_update(w, mp, np.ones(m), tp.LearningConfig(eps_model=1.0))
    assert np.max(out.A) <= 5.0 and np.max(out.b) <= 5.0


# --- step ---------------------------------------------------------------------------

def test_step_zero_rates_reduce_to_reactive_map():
    stream = np.random.default_rng(19).normal(size=(50, 5)) * 0.3
    frozen_cfg = tp.LearningConfig(eps_controller=0.0, eps_model=0.0)
    ctrl = tp.TipiController.create(seed=5, cfg=frozen_cfg)
    ref = tp.TipiController.create(seed=5, cfg=frozen_cfg)
    outs = [ctrl.step(s)[0] for s in stream]
    # memoryless: each output equals a fresh single evaluation of the net
    for s, y in zip(stream, outs):
        assert np.array_equal(y, tp.controller_act(s, ref.cp))
    assert tp.params_digest(ctrl.cp, ctrl.mp) == tp.params_digest(ref.cp, ref.mp)


def test_step_constant_stream_with_perfect_model_stops_learning():
    n, m = 3, 2
    c = np.array([0.2, -0.1, 0.4])
    cp = tp.ControllerParams(np.zeros((m, n)), np.zeros(m))
    # perfect model for the constant stream: A = 0, b = c
    mp = tp.ModelParams(np.zeros((n, m)), c.copy())
    ctrl = tp.TipiController(cp, mp, tp.LearningConfig())
    for i in range(20):
        _, diag = ctrl.step(c)
        if i >= 2:
            assert diag.dtheta_norm == 0.0
            assert diag.xi_norm == 0.0


def test_step_deterministic_repeat():
    def run():
        ctrl = tp.TipiController.create(seed=21)
        rng = np.random.default_rng(99)
        motors, tipis = [], []
        for _ in range(1000):
            y, d = ctrl.step(rng.normal(size=5) * 0.4)
            motors.append(y.copy())
            tipis.append(d.tipi)
        return np.array(motors), np.array(tipis)

    m1, t1 = run()
    m2, t2 = run()
    assert np.array_equal(m1, m2)
    assert np.array_equal(t1, t2)


def test_step_window_identities_hold_under_fuzz():
    ctrl = tp.TipiController.create(seed=22)
    rng = np.random.default_rng(23)
    for i in range(2000):
        s = rng.normal(size=5) * (10.0 ** rng.integers(-2, 3))
        if i >= 2:
            w = ctrl.current_window(s)
            assert np.array_equal(w.ds_tm1, w.xi_tm1)
            assert np.array_equal(w.s_tm2 - w.s_tm2, np.zeros(5))  # anchor deviation
        ctrl.step(s)


def test_step_bounds_hold_after_every_tick():
    ctrl = tp.TipiController.create(seed=24)
    rng = np.random.default_rng(25)
    for _ in range(500):
        y, _ = ctrl.step(rng.normal(size=5) * 5.0)
        assert np.all(np.abs(y) < 1.0)
        for arr in (ctrl.cp.C, ctrl.cp.h, ctrl.mp.A, ctrl.mp.b):
            assert np.max(np.abs(arr)) <= tp.controller.PARAM_CLAMP


def test_step_skips_learning_on_nonfinite_intermediate():
    ctrl = tp.TipiController.create(seed=26)
    rng = np.random.default_rng(27)
    for _ in range(5):
        ctrl.step(rng.normal(size=5))
    # poison the window via an extreme reading that overflows tanh composition?
    # tanh is bounded, so force it through the model bias instead
    ctrl.mp.b[:] = np.inf
    C_before = ctrl.cp.C.copy()
    y, diag = ctrl.step(rng.normal(size=5))
    assert diag.skipped_nonfinite
    assert not diag.learned
    assert np.all(np.isfinite(y))
    assert np.array_equal(ctrl.cp.C, C_before)


# --- snapshots ------------------------------------------------------------------------

def test_snapshot_roundtrip(tmp_path):
    ctrl = tp.TipiController.create(seed=30)
    rng = np.random.default_rng(31)
    for _ in range(20):
        ctrl.step(rng.normal(size=5) * 0.3)
    path = tmp_path / "params.json"
    tp.controller.save_snapshot(path, ctrl)
    doc = tp.controller.load_snapshot(path)
    assert doc["n"] == 5 and doc["m"] == 2
    rebuilt = tp.controller.controller_from_snapshot(doc)
    assert tp.params_digest(rebuilt.cp, rebuilt.mp) == tp.params_digest(ctrl.cp, ctrl.mp)
    assert rebuilt.cfg.eps_controller == ctrl.cfg.eps_controller
    assert rebuilt.est.ridge == ctrl.est.ridge


def test_degenerate_sigma_safety_one_million_steps():
    """With ridge > 0 the TiPI value and the gradient must survive a million
    random covariance updates spanning zeros and eight orders of magnitude."""
    n, m = 3, 2
    rng = np.random.default_rng(1_000_000)
    est = tp.CovarianceEstimator(n, ema_decay=0.99, ridge=1e-4)
    cp = tp.ControllerParams(rng.normal(size=(m, n)), rng.normal(size=m))
    mp = tp.ModelParams(rng.normal(size=(n, m)), rng.normal(size=n))
    cfg = tp.LearningConfig()
    zeros = np.zeros(n)
    N = 1_000_000
    chunk = 100_000
    for _ in range(N // chunk):
        scales = 10.0 ** rng.integers(-8, 9, size=chunk).astype(float)
        ds = rng.standard_normal((chunk, n)) * scales[:, None]
        xi = rng.standard_normal((chunk, n)) * scales[:, None]
        ds[rng.random(chunk) < 0.05] = 0.0
        xi[rng.random(chunk) < 0.05] = 0.0
        for i in range(chunk):
            w = tp.LoopWindow(
                s_tm2=zeros, s_tm1=ds[i], s_t=zeros, shat_tm1=zeros,
                shat_t=zeros, ds_tm1=xi[i], ds_t=ds[i], xi_tm1=xi[i],
            )
            est.update(ds[i], xi[i])
            v = tp.tipi_value(est)  # must not raise
            dC, dh = tp.controller_gradient(w, est, cp, mp, cfg)  # must not raise
            if not (math.isfinite(v) and np.all(np.isfinite(dC)) and np.all(np.isfinite(dh))):
                raise AssertionError(f"non-finite output at scale {scales[i]}")
