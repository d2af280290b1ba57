import csv
import json
import math

import numpy as np
import pytest

from ehcmm import experiments as ex
from ehcmm.controller import Controller, ControllerParams
from ehcmm.kinematics import fk_end_effector
from ehcmm.se3 import RigidTransform
from ehcmm.simulator import DEFAULT_POS_TOL, DEFAULT_ROT_TOL, NoiseModel, Scene, new_state

from oracles import reaggregate_trace

PARAMS = ControllerParams()


@pytest.fixture(scope="module")
def reach_run(model, rmap):
    return ex.run_random_reach(model, rmap, PARAMS, ("ehc-nompbs", "neo-c", "neo-e"),
                               sets=1, points=3, seed=5, timeout=12.0, keep_traces=True)


@pytest.fixture(scope="module")
def short_run(model, rmap):
    # with a 1.5 s timeout the near target is reached and the far one is not
    home = fk_end_effector(model, model.home())
    near = RigidTransform(home.rotation, home.translation + [0.05, 0.03, 0.0])
    far = RigidTransform(home.rotation, home.translation + [3.0, 0.0, 0.0])
    out = []
    for m in ("ehc-nompbs", "neo-e"):
        scene = Scene("short", model.home(), [near, far, near], [], NoiseModel(), 8,
                      PARAMS.dt, 1.5)
        out.extend(zip(*ex.run_episode(model, rmap, PARAMS, m, scene)))
    return out


def _rec(method="neo-c", success=True, time=1.0, distant=(1.0, 2.0, 3.0), close=(4.0, 5.0, 6.0),
         tfm=50.0, min_d=0.3, group=""):
    return ex.TrialRecord("s", method, group, 0, 0, success, time, 10, 0.0, 0.0,
                          list(distant) if distant else None, list(close) if close else None,
                          5, 5, tfm, min_d, 0, 0, "x")


def test_record_counts(reach_run):
    rep, traces = reach_run
    assert len(rep.records) == 9 and len(traces) == 9
    for s in rep.summaries:
        assert s.trials == 3 and s.successes + s.failures == s.trials
    for r in rep.records:
        assert r.n_distant + r.n_close == r.ticks


def test_phase_velocities_match_trace_reaggregation(reach_run):
    rep, traces = reach_run
    checked = 0
    for r in rep.records:
        tr = traces[(r.method, r.set_index, r.index)]
        assert len(tr) == r.ticks + 1
        d, c = reaggregate_trace(tr)
        for got, want in ((r.distant, d), (r.close, c)):
            assert (got is None) == (want is None)
            if got is not None:
                assert np.allclose(got, want, rtol=1e-12, atol=1e-12)
                checked += 1
    assert checked >= 9


def test_failure_iff_error_above_tolerance_at_timeout(short_run):
    outcomes = set()
    for r, tr in short_run:
        last = tr[-1]
        reached = last.e_norm <= DEFAULT_POS_TOL and last.rot_err <= DEFAULT_ROT_TOL
        assert r.success == reached
        if r.success:
            assert r.time == pytest.approx(r.ticks * PARAMS.dt, abs=1e-9)
        else:
            assert r.time == 1.5 and r.ticks == 75
        outcomes.add(r.success)
    assert outcomes == {True, False}


def test_failed_trials_excluded_from_time_mean(short_run):
    recs = [r for r, _ in short_run]
    for m in ("ehc-nompbs", "neo-e"):
        s = ex.summarize(recs, m, "short")
        ok = [r.time for r in recs if r.method == m and r.success]
        assert s.trials == 3 and s.failures == 3 - len(ok)
        assert s.mean_time == pytest.approx(np.mean(ok))


@pytest.mark.parametrize("method", ["ehc", "ehc-nompbs", "neo-c", "neo-e", "tsmm"])
def test_target_at_start_takes_zero_time(model, rmap, method):
    cfg = model.home()
    T = fk_end_effector(model, cfg)
    ctrl = Controller(model, rmap, PARAMS, method)
    state = new_state(model, cfg, T, [], PARAMS.dt, 0, PARAMS, record=False)
    rec = ex.run_trial(model, ctrl, state, T, NoiseModel.zero()).record
    assert rec.success and rec.time == 0.0 and rec.ticks == 0
    assert rec.distant is None and rec.close is None


def test_tsmm_base_still_while_arm_moves(model, rmap):
    scene = ex.three_objects_scene(table=False, noise=NoiseModel.zero(), model=model)
    scene.targets = scene.targets[:1]
    _, traces = ex.run_episode(model, rmap, PARAMS, "tsmm", scene)
    rows = [r for r in traces[0][1:] if r.phase == 2]
    assert len(rows) > 5
    assert all(np.array_equal(r.qdot[:3], np.zeros(3)) for r in rows)
    bases = np.array([r.q[:3] for r in rows])
    assert np.array_equal(bases, np.repeat(bases[:1], len(bases), axis=0))
    phase1 = [r for r in traces[0][1:] if r.phase == 1]
    assert phase1 and all(np.array_equal(r.qdot[3:], np.zeros(6)) for r in phase1)


def test_tfm_matches_trace_frustum_flags(model, rmap):
    rep, traces = ex.run_monitoring(model, rmap, PARAMS, ("neo-e", "ehc"), ("downward",),
                                    trials=1, seed=2, timeout=10.0, keep_traces=True)
    for r in rep.records:
        tr = traces[(r.method, "downward", 0)]
        flags = [row.in_frustum for row in tr[:r.ticks]]
        assert r.tfm == pytest.approx(100.0 * sum(flags) / len(flags), abs=1e-12)


def test_records_reproducible(model, rmap):
    kw = dict(orientations=("sideways",), trials=1, timeout=6.0)
    a = ex.run_monitoring(model, rmap, PARAMS, ("ehc",), seed=3, **kw)
    b = ex.run_monitoring(model, rmap, PARAMS, ("ehc",), seed=3, **kw)
    c = ex.run_monitoring(model, rmap, PARAMS, ("ehc",), seed=4, **kw)
    assert a.records_json() == b.records_json()
    assert a.config_hash == b.config_hash
    assert a.records_json() != c.records_json()
    assert a.to_json_dict(False) == b.to_json_dict(False)


def test_config_hash_tracks_parameters(model, rmap):
    kw = dict(orientations=("forward",), trials=1, timeout=0.1)
    a = ex.run_monitoring(model, rmap, PARAMS, ("neo-c",), **kw)
    b = ex.run_monitoring(model, rmap, ControllerParams(gamma=2.0), ("neo-c",), **kw)
    assert a.config_hash != b.config_hash


def test_summarize_over_successes_only():
    recs = [_rec(time=1.0, distant=(1, 1, 1), tfm=100.0),
            _rec(time=3.0, distant=(3, 3, 3), tfm=0.0, min_d=0.1),
            _rec(success=False, time=30.0, distant=(99, 99, 99), tfm=50.0),
            _rec(method="neo-e", time=7.0)]
    s = ex.summarize(recs, "neo-c")
    assert (s.trials, s.successes, s.failures) == (3, 2, 1)
    assert s.mean_time == 2.0 and s.distant == [2.0, 2.0, 2.0]
    assert s.tfm == 50.0 and s.min_distance == 0.1
    assert s.success_rate == pytest.approx(200 / 3)
    none = ex.summarize([_rec(success=False)], "neo-c")
    assert math.isnan(none.mean_time) and all(math.isnan(v) for v in none.close)


def test_split_index():
    assert ex.split_index([]) == 0
    assert ex.split_index([0.0, 0.5, 0.99]) == 3
    assert ex.split_index([0.2, 1.0, 0.3]) == 1
    assert ex.split_index([1.0]) == 0


def test_report_files(tmp_path, model, rmap):
    rep = ex.run_monitoring(model, rmap, PARAMS, ("neo-c", "ehc"), ("forward",), trials=1,
                            timeout=0.2)
    rep.write_json(tmp_path / "r.json")
    rep.write_csv(tmp_path / "r.csv")
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["suite"] == "monitoring" and doc["config_hash"] == rep.config_hash
    assert len(doc["trials"]) == 2 and len(doc["summaries"]) == 2
    assert all(t["final_error"] >= 0 for t in doc["trials"])
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert rows[0] == ["suite", "method", "group", "metric", "value", "config_hash", "seed"]
    assert len(rows) == 1 + 2 * 13
    assert {r[5] for r in rows[1:]} == {rep.config_hash}
    lines = rep.table().splitlines()
    assert len(lines) == 4 and rep.config_hash in lines[0]
    with pytest.raises(KeyError):
        rep.summary("tsmm", "forward")


def test_record_serialises_non_finite():
    d = _rec(min_d=math.inf).to_dict()
    assert d["min_distance"] == "inf"
    assert json.loads(json.dumps(d))["min_distance"] == "inf"


def test_random_reach_targets_and_obstacles_are_seeded():
    a = ex.random_reach_targets(np.random.default_rng(0), 10)
    b = ex.random_reach_targets(np.random.default_rng(0), 10)
    assert all(np.array_equal(x.matrix, y.matrix) for x, y in zip(a, b))
    obs = ex.random_obstacles(np.random.default_rng(1), a, (0.0, 0.0))
    for o in obs:
        for t in a:
            assert np.linalg.norm(o.center[:2] - t.translation[:2]) > o.radius


def test_unknown_orientation(model, rmap):
    with pytest.raises(ValueError):
        ex.run_monitoring(model, rmap, PARAMS, ("ehc",), ("upward",), trials=1)
