import math

import numpy as np
import pytest
from numpy.random import Generator, Philox, SeedSequence

from vistasim import EquilibriumCurve, EstimatorSpec, NetworkSpec, quadratic
from vistasim.diagnostics import (check_counter_coupling, check_descent_inequality,
                                  check_descent_inequality_fast,
                                  check_frozen_on_reject, check_harmonic_bound,
                                  check_lr_floor, rate_fit, run_pathwise_checks)
from vistasim.harness import RunRecord


def _record(T=100, b0=0.1, saturated_at=(), accepted=None, loss=None):
    """Synthetic run record following the saturated-counter decay schedule."""
    sat = np.zeros(T, dtype=bool)
    sat[list(saturated_at)] = True
    acc = np.ones(T, dtype=bool) if accepted is None else np.asarray(accepted)
    sat &= acc
    b = np.empty(T)
    tau = 0
    for t in range(T):
        b[t] = b0 / math.sqrt(tau + 1)
        if sat[t]:
            tau += 1
    loss = np.zeros(T) if loss is None else np.asarray(loss, dtype=float)
    return RunRecord(run_index=0, eta=np.full(T, 2.0), b=b, accepted=acc,
                     saturated=sat, loss=loss, gradsq=np.zeros(T),
                     est_err_sq=np.full(T, np.nan), r_star=np.zeros(T),
                     final_w=np.zeros(1), left_region=False, summary={})


def test_harmonic_bound_no_saturation():
    rep = check_harmonic_bound(_record(), 0.1)
    assert rep.ok
    assert rep.value == 0.0
    assert rep.bound > 0


def test_harmonic_sum_is_exact_harmonic_number():
    S = 7
    rec = _record(T=50, saturated_at=range(S))
    rep = check_harmonic_bound(rec, 0.1)
    H_S = sum(1.0 / k for k in range(1, S + 1))
    assert rep.value == pytest.approx(0.1 ** 2 * H_S, rel=1e-12)
    assert rep.ok


def test_harmonic_violation_names_first_prefix():
    rec = _record(T=10, saturated_at=range(10))
    rec.b[:] = 1.0   # rates frozen at b0 while saturating: sum grows linearly
    rep = check_harmonic_bound(rec, 1.0)
    assert not rep.ok
    assert rep.first_violation_t == 2   # 3 > 1 + ln(3) = 2.098
    with pytest.raises(Exception):
        rep.raise_on_failure()


def test_lr_floor_holds_on_schedule():
    rec = _record(T=64, saturated_at=range(0, 64, 3))
    assert check_lr_floor(rec, 0.1).ok


def test_lr_floor_equality_when_every_round_saturates():
    rec = _record(T=32, saturated_at=range(32))
    rep = check_lr_floor(rec, 0.1)
    assert rep.ok
    assert rep.slack == 0.0


def test_lr_floor_detects_violation():
    rec = _record(T=10)
    rec.b[4] = 0.01
    rep = check_lr_floor(rec, 0.1)
    assert not rep.ok and rep.first_violation_t == 4


def test_counter_coupling_flags_saturated_rejected():
    rec = _record(T=10, saturated_at=(3,))
    rec.saturated[5] = True
    rec.accepted[5] = False
    assert not check_counter_coupling(rec).ok


def test_frozen_on_reject():
    loss = np.arange(10.0)
    acc = np.ones(10, dtype=bool)
    acc[4] = False
    rec = _record(T=10, accepted=acc, loss=loss)
    assert not check_frozen_on_reject(rec).ok
    loss2 = loss.copy()
    loss2[4] = loss2[3]
    rec2 = _record(T=10, accepted=acc, loss=loss2)
    assert check_frozen_on_reject(rec2).ok


def test_run_pathwise_checks_aggregates():
    runs = [_record(T=20, saturated_at=(1, 5)), _record(T=20)]
    out = run_pathwise_checks(runs, 0.1)
    assert set(out) == {"harmonic_bound", "lr_floor", "counter_coupling",
                        "frozen_on_reject"}
    assert all(v["ok"] for v in out.values())


def _honest_curve():
    return EquilibriumCurve(
        etas=np.array([2.0, 60.0]),
        pa=np.array([1.0, 1.0]),
        mse=np.array([1e-19, 2e-19]),
        r_star=np.zeros(2),
        pa_stderr=np.zeros(2),
        mse_stderr=np.zeros(2),
    )


def test_descent_probe_noiseless_limit():
    # honest-only with negligible noise: the probe reproduces deterministic
    # gradient descent and the quadratic makes the descent lemma an equality
    obj = quadratic(2)
    net = NetworkSpec(n=2, n_honest=2, delta=1e-9)
    rng = Generator(Philox(SeedSequence(51)))
    w = np.array([1.0, -2.0])
    rep = check_descent_inequality(obj, w, eta=4.0, b=0.05, curve=_honest_curve(),
                                   net=net, est=EstimatorSpec(), samples=2000,
                                   rng=rng)
    assert rep.ok and not rep.inconclusive
    assert rep.accepted == 2000
    assert rep.estimate == pytest.approx(rep.bound, abs=1e-9)
    expect = obj.value(w - 0.05 * obj.grad(w))
    assert rep.estimate == pytest.approx(expect, abs=1e-9)


def test_descent_probe_gradient_term_vanishes_at_critical_rate():
    # b = 2/ell zeroes the gradient coefficient: the bound reduces to
    # L(w) + (ell b^2 / 2) p sigma^2 regardless of the gradient norm
    obj = quadratic(2)
    net = NetworkSpec(n=2, n_honest=2, delta=1e-9)
    curve = _honest_curve()
    b = 2.0 / obj.smoothness
    reports = []
    for w in (np.array([1.0, 0.0]), np.array([5.0, -3.0])):
        rng = Generator(Philox(SeedSequence(52)))
        reports.append(check_descent_inequality(obj, w, 4.0, b, curve, net,
                                                EstimatorSpec(), 1000, rng))
    for rep, w in zip(reports, ([1.0, 0.0], [5.0, -3.0])):
        base = obj.value(np.asarray(w))
        penalty = (obj.smoothness * b * b / 2.0) * 1.0 * curve.mse_of_eta(4.0)
        assert rep.bound == pytest.approx(base + penalty, rel=1e-12)


def test_descent_probe_fast_agrees_with_loop(curve_embedded2):
    obj = quadratic(2)
    net = NetworkSpec(n=2, n_honest=1, delta=1.0, coupling="per-coordinate")
    w = np.array([2.0, 1.0])
    slow = check_descent_inequality(obj, w, 6.0, 0.1, curve_embedded2, net,
                                    EstimatorSpec(), 20_000,
                                    Generator(Philox(SeedSequence(53))))
    fast = check_descent_inequality_fast(obj, w, 6.0, 0.1, curve_embedded2, net,
                                         EstimatorSpec(), 20_000,
                                         Generator(Philox(SeedSequence(54))))
    assert slow.bound == pytest.approx(fast.bound, rel=1e-12)
    assert slow.estimate == pytest.approx(fast.estimate,
                                          abs=4 * (slow.stderr + fast.stderr))
    assert fast.ok


def test_descent_probe_inconclusive_when_nothing_accepted():
    obj = quadratic(1)
    net = NetworkSpec(n=2, n_honest=1, delta=1.0)
    curve = EquilibriumCurve(etas=np.array([2.0, 60.0]), pa=np.array([0.0, 0.0]),
                             mse=np.array([1.0, 2.0]),
                             r_star=np.array([10.0, 100.0]),
                             pa_stderr=np.zeros(2), mse_stderr=np.zeros(2))
    rep = check_descent_inequality(obj, np.array([1.0]), 2.0, 0.1, curve, net,
                                   EstimatorSpec(), 1000,
                                   Generator(Philox(SeedSequence(55))))
    assert rep.inconclusive


def test_rate_fit_constant_min_fails():
    # a plateau above the envelope grows the statistic by sqrt(2) * ln ratio
    # per doubling, which exceeds the 1.25 allowance
    mean_gradsq = np.full(4096, 3.0)
    rep = rate_fit(mean_gradsq)
    assert not rep.ok
    expect = [3.0 * math.sqrt(c) / math.log(c) for c in (512, 1024, 2048, 4096)]
    np.testing.assert_allclose(rep.statistic, expect, rtol=1e-12)


def test_rate_fit_geometric_decay_passes():
    t = np.arange(4096)
    rep = rate_fit(100.0 * 0.99 ** t)
    assert rep.ok
    assert rep.worst_ratio < 1.0


def test_rate_fit_checkpoint_validation():
    with pytest.raises(ValueError):
        rate_fit(np.ones(100), checkpoints=[50, 200])
