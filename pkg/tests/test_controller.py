import math

import numpy as np
import pytest

from vistasim import (ConstantController, EquilibriumCurve, VistaConfig,
                      VistaController, check_rate_condition,
                      constant_policy)
from vistasim.controller import init
from vistasim.errors import ConfigurationError, ContractViolation


def _curve(eta_max=60.0):
    etas = np.array([2.0, 10.0, eta_max])
    return EquilibriumCurve(
        etas=etas,
        pa=np.array([0.1, 0.5, 1.0]),
        mse=np.array([1.0, 4.0, 9.0]),
        r_star=np.array([1.0, 8.0, eta_max - 5.0]),
        pa_stderr=np.zeros(3),
        mse_stderr=np.zeros(3),
    )


def _vista(eta0=None, b0=0.1, c=1.0, beta=0.9, mode="ema-proxy", eta_max=60.0,
           w=(0.0,)):
    cfg = VistaConfig(b0=b0, c=c, beta=beta, curve=_curve(eta_max), eta0=eta0,
                      mode=mode)
    return VistaController(cfg, np.array(w))


def test_init_default_threshold_is_midpoint():
    assert _vista().eta == 31.0
    assert _vista(eta_max=240.0).eta == 121.0


def test_init_preserves_w():
    ctrl = _vista(w=(3.0, -4.0))
    np.testing.assert_array_equal(ctrl.w, [3.0, -4.0])
    st = init(ctrl.config, np.array([7.0]))
    assert st.u == 0 and st.tau == 0
    np.testing.assert_array_equal(st.m, [0.0])
    np.testing.assert_array_equal(st.g_tilde, [0.0])


def test_init_validates_eta0():
    with pytest.raises(ConfigurationError):
        _vista(eta0=1.0)
    with pytest.raises(ConfigurationError):
        _vista(eta0=61.0)


def test_learning_rate_schedule():
    ctrl = _vista()
    assert ctrl.current_learning_rate() == 0.1
    ctrl.state.tau = 3
    assert ctrl.current_learning_rate() == pytest.approx(0.05)
    ctrl.state.tau = 99
    assert ctrl.current_learning_rate() == pytest.approx(0.01)


def test_first_acceptance_bias_correction():
    ctrl = _vista()
    g = np.array([2.5])
    ctrl.on_accepted(g)
    np.testing.assert_array_equal(ctrl.state.g_tilde, g)


def test_two_step_ema_closed_form():
    ctrl = _vista(beta=0.9)
    g1, g2 = np.array([1.0]), np.array([3.0])
    ctrl.on_accepted(g1)
    ctrl.on_accepted(g2)
    expect = (0.09 * 1.0 + 0.1 * 3.0) / 0.19
    assert ctrl.state.g_tilde[0] == pytest.approx(expect, rel=1e-14)


def test_bias_correction_telescoping():
    ctrl = _vista(beta=0.8)
    rng = np.random.default_rng(41)
    gs = [rng.normal(size=1) for _ in range(12)]
    for g in gs:
        ctrl.on_accepted(g)
    k = len(gs)
    expect = sum(0.8 ** (k - 1 - i) * 0.2 * gs[i] for i in range(k)) / (1 - 0.8 ** k)
    np.testing.assert_allclose(ctrl.state.g_tilde, expect, rtol=1e-12)


def test_update_applies_entering_learning_rate():
    ctrl = _vista(b0=0.2, w=(1.0,))
    ctrl.on_accepted(np.array([1.0]))
    assert ctrl.w[0] == pytest.approx(0.8)
    assert ctrl.state.u == 1
    assert ctrl.state.last_b == 0.2


def test_saturation_counts_and_floor_threshold():
    # push the proxy below sigma2_min: next eta is the floor, and the next
    # accepted round is the one that increments tau
    ctrl = _vista(c=1.0)
    ctrl.on_accepted(np.array([0.01]))   # target ~1e-4 -> clamped to 1.0 -> eta_min
    assert ctrl.eta == 2.0
    assert ctrl.state.tau == 0           # round was played at eta0=31
    sat = ctrl.on_accepted(np.array([0.01]))
    assert sat
    assert ctrl.state.tau == 1
    assert ctrl.current_learning_rate() == pytest.approx(0.1 / math.sqrt(2))


def test_rejection_freezes_everything():
    ctrl = _vista()
    ctrl.on_accepted(np.array([5.0]))
    before = (ctrl.w.copy(), ctrl.state.m.copy(), ctrl.state.g_tilde.copy(),
              ctrl.state.u, ctrl.state.tau, ctrl.eta)
    for _ in range(100):
        ctrl.on_rejected()
        assert ctrl.current_learning_rate() == 0.1 / math.sqrt(before[4] + 1)
    after = (ctrl.w, ctrl.state.m, ctrl.state.g_tilde, ctrl.state.u,
             ctrl.state.tau, ctrl.eta)
    np.testing.assert_array_equal(before[0], after[0])
    np.testing.assert_array_equal(before[1], after[1])
    np.testing.assert_array_equal(before[2], after[2])
    assert before[3:] == after[3:]


def test_threshold_is_infimum_over_grid():
    ctrl = _vista(c=1.0)
    curve = ctrl.config.curve
    rng = np.random.default_rng(42)
    for _ in range(200):
        g = rng.normal(scale=rng.uniform(0.1, 4.0), size=1)
        ctrl.on_accepted(g)
        target = min(curve.sigma2_max,
                     max(curve.sigma2_min, float(ctrl.state.g_tilde[0] ** 2)))
        for eta_p, mse_p in zip(curve.etas, curve.mse):
            if mse_p >= target:
                assert ctrl.eta <= eta_p + 1e-6


def test_oracle_mode_requires_oracle_value():
    ctrl = _vista(mode="oracle")
    with pytest.raises(ContractViolation):
        ctrl.on_accepted(np.array([1.0]))
    ctrl.on_accepted(np.array([1.0]), grad_norm_sq_oracle=5.0)
    assert ctrl.eta == pytest.approx(ctrl.config.curve.eta_for_target_mse(5.0))


def test_rate_condition_threshold():
    assert check_rate_condition(0.5, 1.0, 1.0)
    assert not check_rate_condition(0.51, 1.0, 1.0)


def test_constant_policy_rate_decays_with_accepted_rounds():
    pol = constant_policy(5.0, 0.1, _curve(), np.array([0.0]))
    assert pol.current_learning_rate() == 0.1
    for _ in range(8):
        pol.on_accepted(np.array([0.5]))
    assert pol.current_learning_rate() == pytest.approx(0.1 / 3.0)
    b = pol.current_learning_rate()
    pol.on_rejected()
    assert pol.current_learning_rate() == b
    assert pol.eta == 5.0


def test_constant_policy_validates_threshold():
    with pytest.raises(ConfigurationError):
        ConstantController(1.0, 0.1, _curve(), np.array([0.0]))


def test_constant_policy_saturation_at_floor():
    pol = constant_policy(2.0, 0.1, _curve(), np.array([0.0]))
    assert pol.on_accepted(np.array([0.1]))
    assert pol.state.tau == 1
    pol5 = constant_policy(5.0, 0.1, _curve(), np.array([0.0]))
    assert not pol5.on_accepted(np.array([0.1]))


def test_config_validation():
    with pytest.raises(ConfigurationError):
        VistaConfig(b0=0.0, c=1.0, beta=0.9, curve=_curve())
    with pytest.raises(ConfigurationError):
        VistaConfig(b0=0.1, c=-1.0, beta=0.9, curve=_curve())
    with pytest.raises(ConfigurationError):
        VistaConfig(b0=0.1, c=1.0, beta=1.0, curve=_curve())
    with pytest.raises(ConfigurationError):
        VistaConfig(b0=0.1, c=1.0, beta=0.9, curve=_curve(), mode="psychic")
