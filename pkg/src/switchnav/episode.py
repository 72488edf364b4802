"""Closed-loop simulation of one episode and Monte Carlo aggregation."""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import certify
from .baselines import KalmanState, ckf_baseline_step, ckf_update, uniform_covariance
from .controller import ControllerState, advance, control_input, dwell_update, event_value, make_switch_message
from .errors import NoFiniteBound
from .estimator import EstimatorBank
from .plant import reference_at, step_dynamics

log = logging.getLogger(__name__)

PROPOSED = "proposed"
CKF = "ckf"
REFERENCE_INPUT = "reference-input"
METHODS = (PROPOSED, CKF, REFERENCE_INPUT)

# horizon used by the single-task baseline comparison
BASELINE_TICKS = 400


@dataclass
class EpisodeTrace:
    method: str
    seed: int
    sensor_ids: list
    t: np.ndarray
    task: np.ndarray
    x: np.ndarray
    r: np.ndarray
    u: np.ndarray
    f: np.ndarray
    he_bar: np.ndarray
    hc_bar: np.ndarray
    dwell: np.ndarray
    estimates: np.ndarray  # (T, S, n), NaN where the sensor is inactive
    control_estimate: np.ndarray  # estimate the robot acted on
    switch_times: dict = field(default_factory=dict)
    runtime_bounds: dict = field(default_factory=dict)
    completed: bool = False
    max_ticks_exceeded: bool = False

    @property
    def ticks(self):
        return self.t.size

    def estimation_error(self):
        """Worst active-sensor estimation error per tick (control estimate for baselines)."""
        if self.method == PROPOSED:
            err = np.linalg.norm(self.estimates - self.x[:, None, :], axis=2)
            return np.nanmax(err, axis=1)
        if self.method == CKF:
            return np.linalg.norm(self.control_estimate - self.x, axis=1)
        return np.full(self.ticks, np.nan)

    def tracking_error(self):
        return np.linalg.norm(self.x - self.r, axis=1)

    def event_task(self):
        """Task each f(t) refers to; at a switch tick that is the task being finished."""
        out = self.task.copy()
        for k, t_sw in self.switch_times.items():
            out[t_sw - 1] = k
        return out

    def sensor_errors(self):
        return np.linalg.norm(self.estimates - self.x[:, None, :], axis=2)


class _NoiseStream:
    """All randomness of an episode, drawn in a fixed order so every method sees the same noise.

    Order: initial estimate errors of every sensor, then per tick the process
    noise followed by every sensor's measurement noise.
    """

    def __init__(self, sc, seed):
        self.rng = np.random.Generator(np.random.Philox(seed))
        self.n = sc.model.n
        self.m_total = sum(sc.sensors[s].m for s in sc.sensor_ids)
        self.hw_w = sc.process_halfwidth
        self.hw_v = sc.measurement_halfwidth
        self.hw_x = sc.initial_error_halfwidth
        self.S = len(sc.sensor_ids)

    def _draw(self, shape, hw):
        return self.rng.uniform(-1.0, 1.0, size=shape) * hw

    def initial_errors(self):
        return self._draw((self.S, self.n), self.hw_x)

    def tick(self):
        return self._draw(self.n, self.hw_w), self._draw(self.m_total, self.hw_v)


def _measurement_layout(sc):
    C_all = np.vstack([sc.sensors[s].C for s in sc.sensor_ids])
    offsets, k = {}, 0
    for s in sc.sensor_ids:
        offsets[s] = np.arange(k, k + sc.sensors[s].m)
        k += sc.sensors[s].m
    rows = {task.index: np.concatenate([offsets[s] for s in task.graph.vertices]) for task in sc.tasks}
    return C_all, rows


def _runtime_bound_or_none(tracker, task, horizon):
    try:
        return certify.task_runtime_bound(tracker, task, horizon)
    except NoFiniteBound:
        return None


def run_episode(sc, seed, method=PROPOSED, ticks=None, switching=None, runtime_bounds=True):
    """Simulate one episode.

    The proposed method switches tasks unless ``switching`` is False; the
    baselines track task 1 only for ``ticks`` (default 400) ticks.  When the
    tick budget runs out before the last task is accomplished the returned
    trace has ``max_ticks_exceeded`` set.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if switching is None:
        switching = method == PROPOSED
    if method != PROPOSED:
        switching = False
    if ticks is None:
        ticks = sc.max_ticks if method == PROPOSED else BASELINE_TICKS

    model, K = sc.model, sc.K
    n, p = model.n, model.p
    ids = sc.sensor_ids
    S = len(ids)
    noise = _NoiseStream(sc, seed)
    C_all, meas_rows = _measurement_layout(sc)

    x = sc.initial_state.copy()
    task = sc.tasks[0]
    start = 1
    init = x[None, :] + noise.initial_errors()
    bank = EstimatorBank(ids, init)
    gains = {s: sc.sensors[s].gain_per_task[task.index] for s in task.graph.vertices}
    bank.activate(task.index, task.graph, task.designated_sensor, gains, sc.sensors)
    tracker = sc.new_tracker()
    ctrl = ControllerState()

    kf = None
    if method == CKF:
        Qcov = uniform_covariance(sc.process_halfwidth, n)
        Rcov = uniform_covariance(sc.measurement_halfwidth, C_all.shape[0])
        kf = KalmanState(bank.estimate(task.designated_sensor),
                         uniform_covariance(sc.initial_error_halfwidth, n))

    T = int(ticks)
    rec = {
        "task": np.zeros(T, dtype=int), "x": np.zeros((T, n)), "r": np.zeros((T, n)),
        "u": np.zeros((T, p)), "f": np.zeros(T), "he": np.zeros(T), "hc": np.zeros(T),
        "est": np.full((T, S, n), np.nan), "ctl": np.zeros((T, n)), "dwell": np.zeros(T, dtype=int),
    }
    rt_bounds = {}
    if runtime_bounds and method == PROPOSED:
        rt_bounds[1] = _runtime_bound_or_none(tracker, task, T)
    completed = False
    u_prev = None
    last = T

    for k in range(T):
        t = k + 1
        r, u_r = reference_at(task.trajectory, start, t)
        w, v_all = noise.tick()
        y_all = C_all @ x + v_all

        xhat_s = bank.estimate(task.designated_sensor)
        if method == CKF:
            kf = ckf_update(kf, y_all, C_all, Rcov) if u_prev is None else \
                ckf_baseline_step(kf, y_all, u_prev, model, C_all, Qcov, Rcov)
            xhat_s = kf.mean
        ctrl.latest_estimate = xhat_s

        h_e, h_c = certify.trigger_bounds(tracker.he[t], tracker.hc[t], task.D)
        f = event_value(xhat_s, r, task, h_e, h_c)
        rec["x"][k] = x
        rec["f"][k] = f
        rec["ctl"][k] = xhat_s

        if switching:
            dwell_update(ctrl, t, f, task, sc.dwell_mode)
            rec["dwell"][k] = len(ctrl.hits)
            if ctrl.accomplished.get(ctrl.task):
                if ctrl.task == len(sc.tasks):
                    rec["task"][k], rec["r"][k] = task.index, r
                    rec["he"][k], rec["hc"][k] = tracker.he[t], tracker.hc[t]
                    rec["est"][k, bank.active] = bank.X[bank.active]
                    completed = True
                    last = t
                    break
                nxt = sc.tasks[ctrl.task]
                msg, _ = make_switch_message(ctrl, task, nxt)
                r_new, u_r = reference_at(nxt.trajectory, t, t)
                gains = {s: sc.sensors[s].gain_per_task[nxt.index] for s in nxt.graph.vertices}
                bank.activate(msg.task, nxt.graph, msg.designated, gains, sc.sensors, handoff=msg.handoff)
                tracker.switch(t, float(np.linalg.norm(r_new - r)))
                advance(ctrl)
                task, start, r = nxt, t, r_new
                if runtime_bounds:
                    rt_bounds[task.index] = _runtime_bound_or_none(tracker, task, T)

        rec["task"][k] = task.index
        rec["r"][k] = r
        rec["he"][k] = tracker.he[t]
        rec["hc"][k] = tracker.hc[t]
        rec["est"][k, bank.active] = bank.X[bank.active]
        u = u_r.copy() if method == REFERENCE_INPUT else control_input(xhat_s, r, u_r, K)
        rec["u"][k] = u
        u_prev = u
        if method == PROPOSED:
            bank.step(y_all[meas_rows[task.index]], r, u_r, K, model)
        x = step_dynamics(model, x, u, w)
        tracker.step()

    exceeded = switching and not completed
    if exceeded:
        log.info("seed %d: tick budget of %d exhausted in task %d", seed, T, task.index)
    sl = slice(0, last)
    return EpisodeTrace(
        method=method, seed=seed, sensor_ids=ids, t=np.arange(1, last + 1),
        task=rec["task"][sl], x=rec["x"][sl], r=rec["r"][sl], u=rec["u"][sl], f=rec["f"][sl],
        he_bar=rec["he"][sl], hc_bar=rec["hc"][sl], dwell=rec["dwell"][sl], estimates=rec["est"][sl],
        control_estimate=rec["ctl"][sl],
        switch_times={k: v for k, v in ctrl.switch_times.items() if k >= 1},
        runtime_bounds=rt_bounds, completed=completed, max_ticks_exceeded=exceeded,
    )


# -- Monte Carlo ---------------------------------------------------------------

@dataclass
class MonteCarloResult:
    t: np.ndarray
    mu: np.ndarray
    tau: np.ndarray
    epsilon: np.ndarray
    traces: list


def _pad(series, length):
    out = np.empty(length)
    out[:series.size] = series
    out[series.size:] = series[-1] if series.size else np.nan
    return out


def aggregate(traces):
    """Per-tick max estimation error, max tracking error and mean tracking error.

    Runs that end early are padded with their final value.
    """
    H = max(tr.ticks for tr in traces)
    est = np.array([_pad(tr.estimation_error(), H) for tr in traces])
    trk = np.array([_pad(tr.tracking_error(), H) for tr in traces])
    with np.errstate(all="ignore"):
        mu = np.max(est, axis=0) if not np.all(np.isnan(est)) else np.full(H, np.nan)
    return MonteCarloResult(np.arange(1, H + 1), mu, trk.max(axis=0), trk.mean(axis=0), traces)


def _run_one(args):
    sc, seed, method, ticks, switching, bounds = args
    return run_episode(sc, seed, method=method, ticks=ticks, switching=switching, runtime_bounds=bounds)


def monte_carlo(sc, runs, seed_base=1, method=PROPOSED, ticks=None, switching=None, workers=1,
                runtime_bounds=False):
    """Run ``runs`` episodes with seeds seed_base, seed_base+1, ... and aggregate them."""
    if runs < 1:
        raise ValueError("need at least one run")
    jobs = [(sc, seed_base + j, method, ticks, switching, runtime_bounds) for j in range(runs)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(_run_one, jobs))
    else:
        traces = [_run_one(job) for job in jobs]
    return aggregate(traces)
