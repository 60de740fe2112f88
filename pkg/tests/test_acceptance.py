"""Acceptance criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v``; the criterion lines are
written straight to the terminal so they show up even under output capture.
The end-to-end run (criteria 6-8) trains on the default 500-vehicle corpus
and takes a few minutes on one CPU core.
"""

import csv
import json
import math
import time

import numpy as np
import pytest
import torch

from gnp import cli, evaluation as ev, modes as md, nsf, synthgen, trajdata
from gnp.trajdata import LaneGeometry, VehicleState

from oracles import central_difference, metrics_by_hand, potential_sum


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return emit


def test_criterion_1_reproducibility_statement(report):
    report(
        1,
        True,
        "published benchmark numbers need licensed highway datasets and an unstated training scale; "
        "criteria 2-9 are the desk-scale substitutes",
    )


def _random_scene(rng):
    n_lines = int(rng.integers(2, 5))
    offsets = tuple(3.7 * i for i in range(n_lines))
    kinds = ("boundary",) + ("center",) * (n_lines - 2) + ("boundary",)
    lanes = LaneGeometry(offsets, kinds)
    while True:
        p = np.array([rng.uniform(-30, 30), rng.uniform(-5, offsets[-1] + 5)])
        if np.min(np.abs(p[1] - np.array(offsets))) >= 0.2:
            break
    nbrs = []
    for _ in range(int(rng.integers(0, 9))):
        d, ang = rng.uniform(0.2, 50), rng.uniform(0, 2 * math.pi)
        nbrs.append(p + d * np.array([math.cos(ang), math.sin(ang)]))
    return p, nbrs, rng.uniform(0.01, 5, len(nbrs)), lanes, rng.uniform(0.01, 5, n_lines)


def test_criterion_2_force_gradient_oracle(report):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        p, nbrs, k_v, lanes, k_l = _random_scene(rng)
        kinds = ["center" if c else "boundary" for c in lanes.is_center]
        fd = -central_difference(lambda x: potential_sum(x, nbrs, k_v, lanes.offsets, kinds, k_l, 5.0), p, 1e-6)
        analytic, _ = nsf.repulsion_force(VehicleState(p, np.zeros(2)), nbrs, lanes, k_v, k_l, 5.0)
        # forces far from every source are ~1e-5 N/kg; floor the denominator there
        worst = max(worst, np.linalg.norm(analytic - fd) / max(np.linalg.norm(fd), 1e-3))
    elapsed = time.perf_counter() - start
    report(2, worst < 1e-5 and elapsed < 10, f"1000 scenes, worst relative error {worst:.2e}, {elapsed:.2f} s")


def test_criterion_3_network_gradient_suite(report):
    import test_goalnet
    import test_nn

    start = time.perf_counter()
    for fn in (
        test_nn.test_linear_gradients,
        test_nn.test_mlp_gradients,
        test_nn.test_layernorm_gradients,
        test_nn.test_attention_gradients,
        test_nn.test_lstm_three_steps_gradients,
        test_goalnet.test_end_to_end_loss_gradient,
    ):
        fn()
    elapsed = time.perf_counter() - start
    report(3, elapsed < 60, f"5 layer checks at 1e-4 and end-to-end goal loss at 1e-3 in {elapsed:.2f} s")


def test_criterion_4_metric_oracle(report):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        T = int(rng.integers(1, 80))
        t, p = rng.normal(0, 30, (T, 2)), rng.normal(0, 30, (T, 2))
        ref = metrics_by_hand(t.tolist(), p.tolist())
        got = (ev.ade(t, p), ev.fde(t, p), ev.rmse(t, p))
        worst = max(worst, max(abs(a - b) for a, b in zip(got, ref)))
    report(4, worst <= 1e-12, f"100 pairs, worst absolute difference {worst:.1e}")


def _goal_reaching(tau, dt=0.1, T_pred=50):
    model = nsf.NeuralSocialForce(fixed_tau=tau)
    lanes = LaneGeometry.uniform(3, 3.7)
    goal = np.array([125.0, 3.7])
    hits, worst_ratio = 0, 0.0
    for speed in np.linspace(15, 35, 5):
        for heading in np.radians(np.linspace(-10, 10, 5)):
            v = speed * np.array([math.cos(heading), math.sin(heading)])
            obs = np.zeros((10, 4))
            obs[:, :2] = np.outer(np.arange(-9, 1) * dt, v)
            obs[:, 2:] = v
            fut = np.zeros((T_pred, 4))
            fut[-1, :2] = goal
            w = trajdata.TrajectoryWindow(0, obs, fut, (), np.zeros((0, 10, 4)), np.zeros(0, bool), "default", dt)
            res = nsf.rollout(w, goal, model, lanes, repulsion=False)
            v0 = res.breakdowns[0].v0
            err = np.linalg.norm(res.positions[-1] - goal)
            worst_ratio = max(worst_ratio, err / (2 * v0 * dt))
            hits += err <= 2 * v0 * dt
    return hits, worst_ratio


def test_criterion_5_goal_reaching(report):
    dt = 0.1
    hits, ratio = _goal_reaching(10 * dt, dt)
    report(5, hits == 25, f"{hits}/25 grid cases within 2*v0*dt at tau = 10*dt (worst error/bound {ratio:.3f})")


# -- end-to-end on the default synthetic corpus ----------------------------------


@pytest.fixture(scope="module")
def default_pipeline(tmp_path_factory):
    out = tmp_path_factory.mktemp("e2e")
    start = time.perf_counter()
    for cmd in ("generate", "cluster", "train-goal", "train-nsf", "eval", "ablate"):
        assert cli.main([cmd, "--out", str(out)]) == 0, cmd
    return out, time.perf_counter() - start


def _rows(path):
    with open(path) as fh:
        return {r["label"]: r for r in csv.DictReader(fh)}


def test_criterion_6_end_to_end(report, default_pipeline):
    out, elapsed = default_pipeline
    rows = _rows(out / "eval" / "report.csv")
    gnp_ade = float(rows["gnp/lane_change"]["ade"])
    cv_ade = float(rows["cv/lane_change"]["ade"])
    gain = 1 - gnp_ade / cv_ade
    ok = gain >= 0.30 and elapsed < 15 * 60
    report(
        6, ok, f"lane-change best-of-6 ADE {gnp_ade:.3f} vs constant velocity {cv_ade:.3f} "
        f"({100 * gain:.0f}% lower); pipeline {elapsed / 60:.1f} min"
    )


def test_criterion_7_ablation_ordering(report, default_pipeline):
    out, _ = default_pipeline
    rows = _rows(out / "ablation" / "ablation.csv")
    lines = []
    ok = True
    for metric in ("ade", "rmse"):
        v1, v3, v4 = (float(rows[f"({i})/lane_change"][metric]) for i in (1, 3, 4))
        ok &= v1 > v3 > v4
        lines.append(f"{metric.upper()} (1) {v1:.3f} > (3) {v3:.3f} > (4) {v4:.3f}")
    report(7, ok, "; ".join(lines))


def test_criterion_8_three_modes(report, default_pipeline):
    out, _ = default_pipeline
    cfg = cli.build_config({})
    run = cli.Run(cfg, out)
    futures = np.stack([w.future[:, :2] for w in cli.prepare(run).train])
    fit = md.fit_modes(futures, 3, seed=cfg["seed"])
    ends = sorted(fit.endpoints[:, 1])
    width = cfg["lane_width"]
    ok = all(abs(e - t) <= 0.5 for e, t in zip(ends, (-width, 0.0, width)))
    report(8, ok, "terminal lateral offsets " + ", ".join(f"{e:+.2f}" for e in ends) + f" m (targets 0, +/-{width})")


def test_criterion_9_determinism(report, tmp_path):
    cfg = tmp_path / "small.cfg"
    cfg.write_text("vehicles = 60\nL = 4\nK = 3\ngoal_epochs = 3\nphase1_epochs = 2\nphase2_epochs = 2\n")
    commands = ("generate", "cluster", "train-goal", "train-nsf", "eval", "ablate")
    for name in ("a", "b"):
        for cmd in commands:
            assert cli.main([cmd, "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
    mismatched = [
        cmd
        for cmd in commands
        if json.loads((tmp_path / "a" / f"manifest_{cmd.replace('-', '_')}.json").read_text())
        != json.loads((tmp_path / "b" / f"manifest_{cmd.replace('-', '_')}.json").read_text())
    ]
    report(9, not mismatched, f"{len(commands)} commands run twice; manifests differ for: {mismatched or 'none'}")
