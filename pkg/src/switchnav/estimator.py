"""Two-time-scale distributed estimator run by each active sensor.

Per tick an active sensor predicts the robot's control from its own
estimate, applies a local innovation update and then runs ``L`` lockstep
consensus rounds with its active neighbours.  :func:`network_step` is the
sensor-by-sensor reference composition; :class:`EstimatorBank` is the
vectorised form the harness uses, and the two agree to round-off.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import block_diag

from .errors import InactiveSensor, NotAddressed, SizeMismatch


@dataclass(frozen=True)
class SwitchMessage:
    task: int
    handoff: np.ndarray
    designated: int


@dataclass(frozen=True)
class EstimatorState:
    sensor_id: int
    estimate: np.ndarray
    active: bool = False
    task: int = 0
    designated: bool = False


def predicted_control(xhat, r, u_r, K):
    return K @ (np.asarray(xhat) - np.asarray(r)) + np.asarray(u_r)


def local_update(xhat, uhat, y, model, G, C, active=True):
    if not active:
        raise InactiveSensor("inactive sensors do not update")
    return model.A @ xhat + model.B @ uhat + G @ (np.atleast_1d(y) - C @ xhat)


def consensus_round(states, graph):
    """One synchronous round of x_i <- x_i - alpha * sum_j (x_i - x_j)."""
    X = np.asarray(states, dtype=float)
    if X.shape[0] != graph.size:
        raise SizeMismatch(f"{X.shape[0]} states for a {graph.size}-node graph")
    return X - graph.alpha * (graph.laplacian @ X)


def network_step(states, measurements, r, u_r, K, model, sensors, graph, gains):
    """Advance every sensor of ``graph`` by one tick.

    ``states`` maps sensor id to EstimatorState, ``measurements`` and ``gains``
    map sensor id to y_i(t) and G_i for the current task.  Sensors outside the
    graph are returned untouched.
    """
    tilde = []
    for sid in graph.vertices:
        est = states[sid]
        uhat = predicted_control(est.estimate, r, u_r, K)
        tilde.append(local_update(est.estimate, uhat, measurements[sid], model,
                                  gains[sid], sensors[sid].C, est.active))
    X = np.array(tilde)
    for _ in range(graph.rounds):
        X = consensus_round(X, graph)
    out = dict(states)
    for k, sid in enumerate(graph.vertices):
        out[sid] = replace(states[sid], estimate=X[k])
    return out


def handle_switch_message(est, msg, prev_vertices, next_vertices):
    """Apply a task-switch broadcast to one sensor's state."""
    if est.sensor_id not in set(prev_vertices) | set(next_vertices):
        raise NotAddressed(f"sensor {est.sensor_id} is not a recipient of task {msg.task}")
    if est.sensor_id not in next_vertices:
        return replace(est, active=False, designated=False)
    return replace(est, estimate=np.array(msg.handoff, dtype=float), active=True,
                   task=msg.task, designated=(est.sensor_id == msg.designated))


class EstimatorBank:
    """Estimates of all sensors, updated a whole network at a time.

    Rows of ``X`` follow the ordering of ``sensor_ids``.
    """

    def __init__(self, sensor_ids, initial_estimates):
        self.sensor_ids = [int(s) for s in sensor_ids]
        self.row = {s: k for k, s in enumerate(self.sensor_ids)}
        self.X = np.array(initial_estimates, dtype=float)
        self.active = np.zeros(len(self.sensor_ids), dtype=bool)
        self.task = 0
        self.designated = None
        self._plan = None

    def activate(self, task, graph, designated, gains, sensors, handoff=None):
        """Switch to ``task``; rows outside ``graph`` become inactive."""
        self.task = task
        self.designated = int(designated)
        self.active[:] = False
        rows = np.array([self.row[s] for s in graph.vertices])
        self.active[rows] = True
        if handoff is not None:
            self.X[rows] = handoff
        # block-diagonal gain/measurement operators of the active network
        self._plan = {
            "rows": rows,
            "C": block_diag(*[sensors[s].C for s in graph.vertices]),
            "G": block_diag(*[gains[s] for s in graph.vertices]),
            "W": graph.mixing_matrix(),
        }

    def estimate(self, sensor_id):
        return self.X[self.row[int(sensor_id)]].copy()

    def active_ids(self):
        return [s for s, a in zip(self.sensor_ids, self.active) if a]

    def step(self, Y, r, u_r, K, model):
        """One estimator tick for the active network.

        ``Y`` stacks the active sensors' measurements in graph order.
        """
        p = self._plan
        Xa = self.X[p["rows"]]
        Uhat = (Xa - r) @ K.T + u_r
        pred = Xa @ model.A.T + Uhat @ model.B.T
        corr = (p["G"] @ (Y - p["C"] @ Xa.ravel())).reshape(Xa.shape)
        self.X[p["rows"]] = p["W"] @ (pred + corr)
