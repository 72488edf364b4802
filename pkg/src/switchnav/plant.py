"""Robot dynamics, sensors, bounded noise and reference trajectories."""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConstructionError, UncertaintyBoundViolated, UnsupportedStructure
from .network import SensorGraph

# slack for floating-point round-off in norm-bound checks
_BOUND_SLACK = 1e-12


@dataclass
class SystemModel:
    A: np.ndarray
    B: np.ndarray
    q_w: float = 0.0
    q_v: float = 0.0
    q_x: float = 0.0
    q_r: float = 0.0

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ConstructionError("A must be square")
        self.B = np.asarray(self.B, dtype=float).reshape(n, -1)
        for name in ("q_w", "q_v", "q_x", "q_r"):
            val = float(getattr(self, name))
            if not np.isfinite(val) or val < 0:
                raise ConstructionError(f"{name} must be finite and non-negative")
            setattr(self, name, val)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def p(self):
        return self.B.shape[1]


@dataclass
class SensorSpec:
    id: int
    C: np.ndarray
    gain_per_task: dict = field(default_factory=dict)

    def __post_init__(self):
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))

    @property
    def m(self):
        return self.C.shape[0]


@dataclass
class ReferenceTrajectory:
    states: np.ndarray  # (length, n)
    inputs: np.ndarray  # (length, p)
    hold_input: np.ndarray = None

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        if self.states.shape[0] != self.inputs.shape[0]:
            raise ConstructionError("states and inputs must have equal length")
        if self.hold_input is None:
            self.hold_input = np.zeros(self.inputs.shape[1])

    @property
    def length(self):
        return self.states.shape[0]

    def recursion_error(self, model):
        """Largest violation of r(l+1) = A r(l) + B u(l) along the trajectory."""
        pred = self.states[:-1] @ model.A.T + self.inputs[:-1] @ model.B.T
        if pred.size == 0:
            return 0.0
        return float(np.max(np.abs(pred - self.states[1:])))


@dataclass
class TaskSpec:
    index: int
    D: np.ndarray
    c: np.ndarray
    R: float
    dwell: int
    trajectory: ReferenceTrajectory
    graph: SensorGraph
    designated_sensor: int
    observer_poles: tuple = None

    def __post_init__(self):
        self.D = np.atleast_2d(np.asarray(self.D, dtype=float))
        self.c = np.asarray(self.c, dtype=float).ravel()
        if self.D.shape[0] != self.c.size:
            raise ConstructionError("D and c dimensions disagree")
        if self.D.shape[0] >= self.D.shape[1]:
            raise ConstructionError("constraint dimension must be smaller than the state dimension")
        if not self.R > 0:
            raise ConstructionError("target radius must be positive")
        if int(self.dwell) < 1:
            raise ConstructionError("dwell time must be a positive integer")
        self.dwell = int(self.dwell)
        if int(self.designated_sensor) not in self.graph.vertices:
            raise ConstructionError("designated sensor must belong to the task's network")
        self.designated_sensor = int(self.designated_sensor)

    def distance(self, x):
        return float(np.linalg.norm(self.D @ x - self.c))

    def contains(self, x, slack=0.0):
        return self.distance(x) <= self.R + slack


def step_dynamics(model, x, u, w):
    w = np.asarray(w, dtype=float)
    if np.linalg.norm(w) > model.q_w + _BOUND_SLACK:
        raise UncertaintyBoundViolated(f"|w|={np.linalg.norm(w):.3g} exceeds q_w={model.q_w}")
    return model.A @ x + model.B @ u + w


def measure(sensor, x, v, active, q_v=np.inf):
    v = np.asarray(v, dtype=float).reshape(sensor.m)
    if np.linalg.norm(v) > q_v + _BOUND_SLACK:
        raise UncertaintyBoundViolated(f"|v|={np.linalg.norm(v):.3g} exceeds q_v={q_v}")
    if not active:
        return np.zeros(sensor.m)
    return sensor.C @ x + v


def sample_bounded(dim, elementwise_bound, rng):
    """i.i.d. uniform entries on [-bound, bound]; 2-norm is at most bound*sqrt(dim)."""
    if elementwise_bound < 0:
        raise ValueError("bound must be non-negative")
    if elementwise_bound == 0:
        return np.zeros(dim)
    return rng.uniform(-elementwise_bound, elementwise_bound, size=dim)


def norm_bound(elementwise_bound, dim):
    return float(elementwise_bound) * np.sqrt(dim)


def _integrator_chains(model, D):
    """Map each constrained coordinate to (velocity index, step, input column, input gain)."""
    A, B = model.A, model.B
    n = model.n
    chains = []
    for row in D:
        nz = np.flatnonzero(row)
        if nz.size != 1 or row[nz[0]] != 1.0:
            raise UnsupportedStructure("constraint rows must select single coordinates")
        k = int(nz[0])
        off = [j for j in np.flatnonzero(A[k]) if j != k]
        if A[k, k] != 1.0 or len(off) != 1 or np.any(B[k] != 0):
            raise UnsupportedStructure(f"coordinate {k} is not a position of an integrator chain")
        j = int(off[0])
        dt = A[k, j]
        expect = np.zeros(n)
        expect[j] = 1.0
        bcols = np.flatnonzero(B[j])
        if not np.array_equal(A[j], expect) or bcols.size != 1:
            raise UnsupportedStructure(f"coordinate {j} is not a driven velocity state")
        chains.append((k, j, dt, int(bcols[0]), B[j, bcols[0]]))
    covered = {c[0] for c in chains} | {c[1] for c in chains}
    if covered != set(range(n)):
        raise UnsupportedStructure("every state must belong to a constrained integrator chain")
    return chains


def synthesize_reference(start_state, goal_center, D, length, model):
    """Clamped cubic position profile from ``D @ start_state`` to ``goal_center``.

    Velocities and inputs are back-solved from the sampled positions and the
    states are re-generated by rolling the inputs through (A, B), so the
    trajectory satisfies the plant recursion to round-off.
    """
    length = int(length)
    if length < 2:
        raise ValueError("trajectory length must be at least 2")
    D = np.atleast_2d(np.asarray(D, dtype=float))
    start_state = np.asarray(start_state, dtype=float)
    goal_center = np.asarray(goal_center, dtype=float).ravel()
    chains = _integrator_chains(model, D)

    p0 = D @ start_state
    spline = CubicSpline([0.0, 1.0], np.vstack([p0, goal_center]), bc_type="clamped")
    pos = spline(np.linspace(0.0, 1.0, length))  # (length, d)

    r1 = np.zeros(model.n)
    inputs = np.zeros((length, model.p))
    for c, (k, j, dt, col, gain) in enumerate(chains):
        vel = np.zeros(length)
        vel[:-1] = np.diff(pos[:, c]) / dt
        # zero terminal velocity so the trajectory can be held with zero input
        inputs[:-1, col] = np.diff(vel) / gain
        r1[k] = pos[0, c]
        r1[j] = vel[0]

    states = np.empty((length, model.n))
    states[0] = r1
    for l in range(length - 1):
        states[l + 1] = model.A @ states[l] + model.B @ inputs[l]
    return ReferenceTrajectory(states, inputs, hold_input=holding_input(states[-1], model))


def holding_input(r, model):
    """Input u with r = A r + B u, or None if the state cannot be held."""
    u, *_ = np.linalg.lstsq(model.B, r - model.A @ r, rcond=None)
    if np.max(np.abs(model.A @ r + model.B @ u - r)) > 1e-9 * (1 + np.max(np.abs(r))):
        return None
    return u


def reference_at(traj, task_start, t):
    """Reference state and input at absolute time t for a task that began at ``task_start``.

    Past the end of the trajectory the terminal state is held.
    """
    l = t - task_start + 1
    if l < 1:
        raise ValueError("t precedes the start of the task")
    if l >= traj.length:
        return traj.states[-1], traj.hold_input
    return traj.states[l - 1], traj.inputs[l - 1]


def export_trajectory_csv(traj, path):
    n, p = traj.states.shape[1], traj.inputs.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["l"] + [f"r_{i + 1}" for i in range(n)] + [f"u_{i + 1}" for i in range(p)])
        for l in range(traj.length):
            w.writerow([l + 1] + [f"{v:.17g}" for v in traj.states[l]] + [f"{v:.17g}" for v in traj.inputs[l]])


def import_trajectory_csv(path, model=None):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n = sum(h.startswith("r_") for h in header)
    data = np.array([[float(v) for v in row[1:]] for row in body])
    traj = ReferenceTrajectory(data[:, :n], data[:, n:])
    if model is not None:
        hold = holding_input(traj.states[-1], model)
        if hold is not None:
            traj.hold_input = hold
    return traj
