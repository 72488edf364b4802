import copy
import json

import numpy as np
import pytest

from switchnav import build_scenario, load_document, monte_carlo, run_episode
from switchnav.baselines import KalmanState, ckf_baseline_step, uniform_covariance
from switchnav.cli import main
from switchnav.errors import AssumptionViolated, ParseError, SingularInnovationCovariance
from switchnav.episode import aggregate
from switchnav.export import METRICS_HEADER, export_csv, read_csv, trace_header


@pytest.fixture(scope="module")
def demo_doc():
    return load_document("demo")


@pytest.fixture(scope="module")
def default_doc():
    return load_document("default")


def test_default_scenario_loads(default_scenario):
    sc = default_scenario
    assert len(sc.sensors) == 12 and len(sc.tasks) == 3
    assert [t.R for t in sc.tasks] == [5, 10, 15]
    assert [t.trajectory.length for t in sc.tasks] == [501, 301, 601]
    assert [t.designated_sensor for t in sc.tasks] == [4, 5, 9]
    assert [t.graph.rounds for t in sc.tasks] == [5, 5, 5]
    assert [t.dwell for t in sc.tasks] == [2, 2, 2]
    assert all(t.graph.alpha == pytest.approx(0.4) for t in sc.tasks)
    assert sc.model.q_w == pytest.approx(0.01) and sc.model.q_x == pytest.approx(10.0)


def test_shipped_trajectories_chain_between_centers(default_scenario):
    prev_end = None
    for task in default_scenario.tasks:
        traj = task.trajectory
        assert np.allclose(task.D @ traj.states[-1], task.c, atol=1e-6)
        if prev_end is not None:
            assert np.allclose(traj.states[0][[0, 2]], prev_end[[0, 2]], atol=1e-12)
        prev_end = traj.states[-1]


def test_disconnected_graph_is_rejected(demo_doc):
    doc = copy.deepcopy(demo_doc)
    doc["tasks"][1]["adjacency"] = {"3": [4], "5": [6]}
    with pytest.raises(AssumptionViolated) as exc:
        build_scenario(doc)
    assert exc.value.name == "connectivity"


def test_undetectable_task_is_rejected(demo_doc):
    doc = copy.deepcopy(demo_doc)
    doc["tasks"][0]["vertices"] = [1, 3]
    doc["tasks"][0]["adjacency"] = {"1": [3]}
    doc["tasks"][0]["designated"] = 1
    with pytest.raises(AssumptionViolated) as exc:
        build_scenario(doc)
    assert exc.value.name == "collective detectability"


def test_unstabilizable_plant_is_rejected(demo_doc):
    doc = copy.deepcopy(demo_doc)
    doc["B"] = [[0, 0], [1, 0], [0, 0], [0, 0]]
    with pytest.raises(AssumptionViolated) as exc:
        build_scenario(doc)
    assert exc.value.name == "stabilizability"


def test_initial_gap_beyond_bound_is_rejected(demo_doc):
    doc = copy.deepcopy(demo_doc)
    doc["q_r"] = 0.001
    with pytest.raises(AssumptionViolated) as exc:
        build_scenario(doc)
    assert exc.value.name == "initial conditions"


def test_parse_errors(tmp_path, demo_doc):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ParseError):
        load_document(bad)
    doc = copy.deepcopy(demo_doc)
    del doc["A"]
    with pytest.raises(ParseError):
        build_scenario(doc)


def test_scenario_file_round_trip(tmp_path, demo_doc):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(demo_doc))
    sc = build_scenario(load_document(path))
    assert len(sc.tasks) == 3


def test_same_seed_identical_traces(demo_scenario):
    a = run_episode(demo_scenario, 4)
    b = run_episode(demo_scenario, 4)
    for field in ("x", "u", "f", "he_bar", "hc_bar", "estimates", "task"):
        assert np.array_equal(getattr(a, field), getattr(b, field), equal_nan=True)
    assert a.switch_times == b.switch_times


def test_zero_uncertainty_completes_all_tasks(demo_doc):
    doc = copy.deepcopy(demo_doc)
    doc.update(process_halfwidth=0.0, measurement_halfwidth=0.0)
    for t in doc["tasks"]:
        t["radius"] = 8.0
    tr = run_episode(build_scenario(doc), 1)
    assert tr.completed
    assert sorted(tr.switch_times) == [1, 2, 3]
    assert tr.tracking_error()[-1] < 1e-6


def test_trace_switch_times_consistent(demo_scenario):
    tr = run_episode(demo_scenario, 2)
    ts = [tr.switch_times[k] for k in sorted(tr.switch_times)]
    assert ts == sorted(set(ts))
    for k, t_sw in tr.switch_times.items():
        if k < len(demo_scenario.tasks):
            assert tr.task[t_sw - 1] == k + 1 and tr.task[t_sw - 2] == k
    assert tr.t[-1] == tr.switch_times[3]


def test_inactive_sensors_do_not_change(demo_scenario):
    tr = run_episode(demo_scenario, 2)
    # sensors 5 and 6 are idle during task 1 and have no recorded estimates
    idle = [tr.sensor_ids.index(5), tr.sensor_ids.index(6)]
    t1 = tr.task == 1
    assert np.all(np.isnan(tr.estimates[t1][:, idle]))


def test_default_scenario_hits_tick_budget(default_doc):
    doc = copy.deepcopy(default_doc)
    doc["max_ticks"] = 300
    tr = run_episode(build_scenario(doc), 1)
    assert tr.max_ticks_exceeded and not tr.completed
    assert tr.ticks == 300


def test_monte_carlo_single_run(demo_scenario):
    res = monte_carlo(demo_scenario, 1, seed_base=3)
    tr = res.traces[0]
    assert np.allclose(res.mu, np.nanmax(tr.sensor_errors(), axis=1))
    assert np.allclose(res.tau, res.epsilon)


def test_monte_carlo_padding_and_ordering(demo_scenario):
    res = monte_carlo(demo_scenario, 4, seed_base=1)
    assert np.all(res.epsilon <= res.tau + 1e-15)
    longest = max(tr.ticks for tr in res.traces)
    assert res.t.size == longest


def test_monte_carlo_workers_agree(demo_scenario):
    serial = monte_carlo(demo_scenario, 3, seed_base=5)
    pooled = monte_carlo(demo_scenario, 3, seed_base=5, workers=2)
    assert np.array_equal(serial.tau, pooled.tau)
    assert np.array_equal(serial.mu, pooled.mu)


def test_ckf_zero_noise_limit(demo_doc):
    doc = copy.deepcopy(demo_doc)
    doc.update(process_halfwidth=1e-6, measurement_halfwidth=1e-6)
    tr = run_episode(build_scenario(doc), 1, method="ckf", ticks=300)
    assert tr.estimation_error()[0] > 1e-2
    assert np.max(tr.estimation_error()[50:]) < 1e-5


def test_ckf_step_matches_textbook_filter():
    rng = np.random.default_rng(0)
    from switchnav.plant import SystemModel

    model = SystemModel(np.array([[1.0, 1.0], [0.0, 1.0]]), np.array([[0.0], [1.0]]))
    C = np.array([[1.0, 0.0]])
    Q, R = 0.01 * np.eye(2), np.array([[0.04]])
    kf = KalmanState(rng.normal(size=2), np.eye(2))
    u, y = np.array([0.3]), np.array([1.2])
    out = ckf_baseline_step(kf, y, u, model, C, Q, R)
    m = model.A @ kf.mean + model.B @ u
    P = model.A @ kf.cov @ model.A.T + Q
    Kg = P @ C.T / (C @ P @ C.T + R)
    assert np.allclose(out.mean, m + (Kg @ (y - C @ m)))
    assert np.allclose(out.cov, (np.eye(2) - Kg @ C) @ P)


def test_ckf_singular_innovation():
    from switchnav.baselines import ckf_update

    kf = KalmanState(np.zeros(2), np.zeros((2, 2)))
    with pytest.raises(SingularInnovationCovariance):
        ckf_update(kf, np.zeros(1), np.array([[1.0, 0.0]]), np.zeros((1, 1)))


def test_uniform_covariance():
    assert np.allclose(uniform_covariance(0.3, 2), 0.03 * np.eye(2))


def test_ckf_default_scenario_settles(default_scenario):
    res = monte_carlo(default_scenario, 5, method="ckf", ticks=400)
    assert res.epsilon[200:].mean() < 1.0


def test_metrics_export_round_trip(tmp_path, demo_scenario):
    res = monte_carlo(demo_scenario, 2)
    path = tmp_path / "m.csv"
    export_csv(res, path)
    assert path.read_text().splitlines()[0] == ",".join(METRICS_HEADER)
    back = read_csv(path)
    assert np.array_equal(back["t"], res.t)
    for key, col in (("mu", res.mu), ("tau", res.tau), ("epsilon", res.epsilon)):
        assert np.allclose(back[key], col, rtol=1e-11, atol=0)


def test_trace_export_round_trip(tmp_path, demo_scenario):
    tr = run_episode(demo_scenario, 1)
    path = tmp_path / "t.csv"
    export_csv(tr, path)
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    assert header == trace_header(tr)
    assert header[:12] == ["t", "task", "x_1", "x_2", "x_3", "x_4", "u_1", "u_2", "f", "he_bar", "hc_bar", "dwell"]
    assert len(lines) == tr.ticks + 1
    back = read_csv(path)
    assert np.allclose(back["x_1"], tr.x[:, 0], rtol=1e-11, atol=1e-300)
    k5 = tr.sensor_ids.index(5)
    assert np.array_equal(np.isnan(back["xhat_5_1"]), np.isnan(tr.estimates[:, k5, 0]))


def test_cli_exit_codes(tmp_path, demo_doc, capsys):
    assert main(["certify", "--scenario", "demo"]) == 0
    assert main(["simulate", "--scenario", "demo", "--seed", "2", "--trace", str(tmp_path / "t.csv")]) == 0
    assert (tmp_path / "t_path.png").exists() and (tmp_path / "t_event.png").exists()
    assert main(["runtime-bound", "--scenario", "demo", "--task", "1"]) == 0
    assert "task 1: 240" in capsys.readouterr().out
    assert main(["simulate", "--scenario", "default", "--max-ticks", "50"]) == 3
    bad = copy.deepcopy(demo_doc)
    bad["tasks"][0]["adjacency"] = {"1": [2], "3": [4]}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    assert main(["certify", "--scenario", str(path)]) == 2
    assert main(["certify", "--scenario", str(tmp_path / "missing.json")]) == 1


def test_cli_montecarlo_writes_metrics_and_figure(tmp_path):
    out = tmp_path / "m.csv"
    assert main(["montecarlo", "--scenario", "demo", "--runs", "2", "--out", str(out)]) == 0
    assert out.read_text().startswith("t,mu,tau,epsilon\n")
    assert (tmp_path / "m_errors.png").exists()
    out2 = tmp_path / "b.csv"
    assert main(["montecarlo", "--scenario", "demo", "--runs", "2", "--out", str(out2),
                 "--baseline", "reference-input", "--no-figures"]) == 0
    assert read_csv(out2)["mu"].size == 400


def test_aggregate_pads_with_final_value(demo_scenario):
    a = run_episode(demo_scenario, 1, ticks=30, switching=False)
    b = run_episode(demo_scenario, 2, ticks=20, switching=False)
    res = aggregate([a, b])
    tail = np.maximum(a.tracking_error()[20:], b.tracking_error()[-1])
    assert np.allclose(res.tau[20:], tail)
