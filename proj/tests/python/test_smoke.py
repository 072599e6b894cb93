import json
import math

import numpy as np
import pytest

import decompgrind as dg


def test_split_keeps_points_on_the_plane():
    pts = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0]])
    kept, removed = dg.split(pts, dg.CuttingSurface(0.0, 0.0, 1.0))
    assert kept.shape == (2, 3)
    assert removed.tolist() == [[2.0, 0.0, 0.0]]


def test_normal_of_a_tilted_plane():
    n = dg.CuttingSurface(0.3, -0.2, 0.0).normal()
    expected = [math.cos(0.3) * math.cos(-0.2), math.sin(-0.2), -math.sin(0.3) * math.cos(-0.2)]
    assert n == pytest.approx(expected, abs=1e-15)


def test_chamfer_against_numpy():
    rng = np.random.default_rng(3)
    a = rng.uniform(-5, 5, (40, 3))
    b = rng.uniform(-5, 5, (30, 3))
    d = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
    assert dg.chamfer(a, b) == pytest.approx(d.min(1).mean() + d.min(0).mean(), rel=1e-12)
    assert dg.chamfer(a, a) == 0.0
    with pytest.raises(ValueError):
        dg.chamfer(np.zeros((3, 2)), a)


def test_resistance_law():
    fn, ft = dg.resistance(50.0, k_r=340.0, lam=0.5, belt_speed=10000.0)
    assert fn == pytest.approx(340.0 * 50.0 / 10000.0)
    assert ft == pytest.approx(0.5 * fn)


def test_plan_on_a_bar():
    bar = np.array([[float(i), 0, 0] for i in range(10)])
    r = dg.plan(bar, bar[:5], horizon=1, theta_deg=[0], psi_deg=[0])
    assert r["surfaces"][0].offset == pytest.approx(4.0)
    assert r["objective"] == pytest.approx(r["per_step_cost"][0])


def test_generated_workpiece():
    assert "WP-E1" in dg.workpiece_names()
    wp = dg.gen_workpiece("WP-T2", seed=4)
    assert wp["initial"].shape[1] == 3
    assert len(wp["target"]) < len(wp["initial"])
    assert wp["point_volume"] > 0


def test_demo_speed_run_report():
    report = dg.run("Demo-Speed-1", "WP-S5", seed=1, feed1=20.0)
    assert report["method"] == "Demo-Speed-1"
    assert report["termination"] == "force_limit"
    assert report["in_limit_ratio"] < 1.0
    json.dumps(report)


def test_unknown_workpiece():
    with pytest.raises(ValueError):
        dg.gen_workpiece("WP-X9")
