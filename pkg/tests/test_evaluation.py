import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gnp import evaluation as ev
from gnp import goalnet as gn
from gnp import modes as md
from gnp import nsf
from gnp.evaluation import MetricError
from gnp.trajdata import TrajectoryWindow

from oracles import metrics_by_hand

TRUTH = [(0, 0), (3, 4)]
ZERO = [(0, 0), (0, 0)]


def test_worked_examples():
    assert ev.ade(TRUTH, ZERO) == 2.5
    assert ev.fde(TRUTH, ZERO) == 5.0
    assert ev.rmse(TRUTH, ZERO) == pytest.approx(math.sqrt(12.5))
    assert math.sqrt(12.5) == pytest.approx(3.5355, abs=1e-4)
    for f in (ev.ade, ev.fde, ev.rmse):
        assert f(TRUTH, TRUTH) == 0.0


def test_errors():
    with pytest.raises(MetricError):
        ev.ade(TRUTH, [(0, 0)])
    with pytest.raises(MetricError):
        ev.fde(np.zeros((0, 2)), np.zeros((0, 2)))
    with pytest.raises(MetricError):
        ev.rmse(TRUTH, [(0, 0), (0, 0), (0, 0)])


def test_brute_force_oracle_agreement():
    rng = np.random.default_rng(0)
    for _ in range(100):
        T = int(rng.integers(1, 60))
        t, p = rng.normal(0, 20, (T, 2)), rng.normal(0, 20, (T, 2))
        a, f, r = metrics_by_hand(t.tolist(), p.tolist())
        assert abs(ev.ade(t, p) - a) < 1e-12
        assert abs(ev.fde(t, p) - f) < 1e-12
        assert abs(ev.rmse(t, p) - r) < 1e-12


@given(
    truth=arrays(np.float64, st.tuples(st.integers(1, 30), st.just(2)), elements=st.floats(-1e3, 1e3)),
    dx=st.floats(-50, 50),
    dy=st.floats(-50, 50),
)
@settings(max_examples=100, deadline=None)
def test_constant_offset_identity(truth, dx, dy):
    pred = truth + np.array([dx, dy])
    n = math.hypot(dx, dy)
    for f in (ev.ade, ev.fde, ev.rmse):
        assert f(truth, pred) == pytest.approx(n, rel=1e-9, abs=1e-9)


@given(theta=st.floats(0, 2 * math.pi), shift=st.tuples(st.floats(-100, 100), st.floats(-100, 100)))
@settings(max_examples=50, deadline=None)
def test_isometry_invariance(theta, shift):
    rng = np.random.default_rng(1)
    t, p = rng.normal(0, 10, (12, 2)), rng.normal(0, 10, (12, 2))
    R = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    move = lambda x: x @ R.T + np.array(shift)
    for f in (ev.ade, ev.fde, ev.rmse):
        assert f(move(t), move(p)) == pytest.approx(f(t, p), rel=1e-9, abs=1e-9)


# -- best-of-K -------------------------------------------------------------------


def _hyps(seed=2, B=8, K=5, T=50):
    rng = np.random.default_rng(seed)
    truths = rng.normal(0, 5, (B, T, 2)).cumsum(1)
    preds = truths[:, None] + rng.normal(0, 2, (B, K, T, 2))
    return truths, preds


def test_k_one_is_plain_evaluation():
    truths, preds = _hyps(K=1)
    r = ev.report_from_predictions(truths, preds, 0.1)
    assert r.ade == pytest.approx(np.mean([ev.ade(t, p[0]) for t, p in zip(truths, preds)]), abs=1e-12)
    assert r.rmse == pytest.approx(np.mean([ev.rmse(t, p[0]) for t, p in zip(truths, preds)]), abs=1e-12)
    r3 = ev.report_from_predictions(truths, preds[:, 0], 0.1)
    assert r3.ade == r.ade


def test_duplicate_hypothesis_changes_nothing():
    truths, preds = _hyps()
    a = ev.report_from_predictions(truths, preds, 0.1)
    dup = np.concatenate([preds, preds[:, 2:3]], 1)
    b = ev.report_from_predictions(truths, dup, 0.1)
    assert (a.ade, a.fde, a.rmse, a.horizon_slices) == (b.ade, b.fde, b.rmse, b.horizon_slices)


def test_best_of_k_non_increasing():
    truths, preds = _hyps(K=6)
    ades = [ev.report_from_predictions(truths, preds[:, :k], 0.1).ade for k in range(1, 7)]
    assert all(b <= a for a, b in zip(ades, ades[1:]))


def test_horizon_slices_are_per_second():
    assert ev.horizon_frames(50, 0.1) == [9, 19, 29, 39, 49]
    assert ev.horizon_frames(125, 0.04) == [24, 49, 74, 99, 124]
    truths = np.zeros((2, 50, 2))
    preds = np.zeros((2, 50, 2))
    preds[0, :, 1] = np.arange(50)
    r = ev.report_from_predictions(truths, preds, 0.1)
    expected = [math.sqrt(f**2 / 2) for f in (9, 19, 29, 39, 49)]
    np.testing.assert_allclose(r.horizon_slices, expected, atol=1e-12)


def test_weighted_metrics():
    truths = np.zeros((1, 4, 2))
    preds = np.zeros((1, 2, 4, 2))
    preds[0, 1, :, 0] = 2.0
    r = ev.report_from_predictions(truths, preds, 0.1, probabilities=np.array([[1.0, 3.0]]))
    assert r.ade == 0.0 and r.weighted["ade"] == pytest.approx(1.5)


# -- baselines -------------------------------------------------------------------


def _window(xy):
    xy = np.asarray(xy, dtype=float)
    states = np.concatenate([xy, np.zeros_like(xy)], 1)
    return TrajectoryWindow(0, states[:10], states[10:], (), np.zeros((0, 10, 4)), np.zeros(0, bool), "default", 0.1)


def test_cv_exact_on_constant_speed():
    t = np.arange(30)[:, None]
    w = _window(np.hstack([2.0 * t, 0.5 * t]))
    assert ev.ade(w.future[:, :2], ev.baseline_cv(w)) == pytest.approx(0.0, abs=1e-12)


def test_cv_stationary():
    w = _window(np.tile([3.0, 4.0], (30, 1)))
    assert np.array_equal(ev.baseline_cv(w), np.tile([3.0, 4.0], (20, 1)))


def test_ca_exact_on_uniform_acceleration():
    t = np.arange(30.0)[:, None]
    w = _window(np.hstack([1.0 * t + 0.05 * t**2, 0.02 * t**2]))
    assert ev.ade(w.future[:, :2], ev.baseline_ca(w)) == pytest.approx(0.0, abs=1e-9)
    assert ev.ade(w.future[:, :2], ev.baseline_cv(w)) > 0.1


def test_baselines_need_history():
    short = TrajectoryWindow(0, np.zeros((2, 4)), np.zeros((3, 4)), (), np.zeros((0, 2, 4)), np.zeros(0, bool), "x", 0.1)
    ev.baseline_cv(short)
    with pytest.raises(MetricError):
        ev.baseline_ca(short)


# -- ablation --------------------------------------------------------------------


def test_ablation_grid_structure():
    names = [v.name for v in ev.ABLATION_GRID]
    assert names == ["(1)", "(2)", "(3)", "(4)"]
    flags = [(v.intention_modes, v.goal_force, v.repulsion) for v in ev.ABLATION_GRID]
    assert flags == [(False, True, True), (False, True, False), (True, True, False), (True, True, True)]


def test_ablation_runs_and_is_deterministic(small_windows, small_corpus):
    windows = small_windows[:12]
    futures = np.stack([w.future[:, :2] for w in windows])
    modes = md.fit_modes(futures, 3, seed=0)
    mean = md.fit_modes(futures, 1, seed=0)
    gcfg = gn.GoalNetConfig(d_model=8, heads=2, blocks=1, ffn=16, epochs=1)
    ncfg = nsf.NSFConfig(hidden=8, epochs_phase1=1, epochs_phase2=1)

    def run():
        gm, _ = gn.train_goalnet(windows, modes, gcfg)
        g1, _ = gn.train_goalnet(windows, mean, gcfg)
        force, _, p1 = nsf.train_nsf(windows, small_corpus.lanes, ncfg)
        goal_only = nsf.NeuralSocialForce(ncfg)
        goal_only.load_state_dict(p1)
        return ev.run_ablation(ev.AblationModels(gm, g1, force, goal_only), windows, small_corpus.lanes, 3)

    a, b = run(), run()
    assert list(a) == ["(1)", "(2)", "(3)", "(4)"]
    assert a["(1)"].K == 1 and a["(4)"].K == 3
    assert [r.row() for r in a.values()] == [r.row() for r in b.values()]
    table = ev.ablation_table(a)
    assert table.splitlines()[0].startswith("Variant") and len(table.splitlines()) == 5
    assert ev.reports_csv(list(a.values())).startswith("label,K,samples,ade,fde,rmse")
