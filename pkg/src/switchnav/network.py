"""Sensor-network graphs, Laplacians and consensus step-size rules."""

from dataclasses import dataclass, field

import numpy as np

from .errors import AlphaOutOfRange, BadEntries, ConstructionError, NotConnected, NotSymmetric
from .matops import TOL, sym_eigvals


def build_laplacian(adjacency):
    """L = D - A for a symmetric 0-1 adjacency matrix with zero diagonal."""
    A = np.atleast_2d(np.asarray(adjacency, dtype=float))
    if A.shape[0] != A.shape[1] or not np.array_equal(A, A.T):
        raise NotSymmetric("adjacency must be square and symmetric")
    if not np.all((A == 0) | (A == 1)) or np.any(np.diag(A) != 0):
        raise BadEntries("adjacency entries must be 0/1 with zero diagonal")
    return np.diag(A.sum(axis=1)) - A


def laplacian_spectrum(L):
    return sym_eigvals(L)


def check_connected(L):
    ev = laplacian_spectrum(L)
    return ev.size >= 2 and bool(ev[1] > TOL.connectivity)


def default_alpha(L):
    """Step size 2 / (lambda_2 + lambda_max), the minimiser of the contraction rate."""
    if not check_connected(L):
        raise NotConnected("graph is not connected")
    ev = laplacian_spectrum(L)
    return 2.0 / (ev[1] + ev[-1])


def consensus_contraction(L, alpha):
    """Per-round contraction factor of disagreement under x <- (I - alpha L) x."""
    if not check_connected(L):
        raise NotConnected("graph is not connected")
    ev = laplacian_spectrum(L)
    if not 0.0 < alpha < 2.0 / ev[-1]:
        raise AlphaOutOfRange(f"alpha={alpha} outside (0, {2.0 / ev[-1]:.6g})")
    return float(max(abs(1.0 - alpha * ev[1]), abs(1.0 - alpha * ev[-1])))


def adjacency_from_lists(vertices, neighbours):
    """Dense adjacency over sorted ``vertices`` from a ``{id: [ids...]}`` mapping.

    Edges listed on one side only are symmetrised.
    """
    vertices = sorted(int(v) for v in vertices)
    pos = {v: k for k, v in enumerate(vertices)}
    A = np.zeros((len(vertices), len(vertices)))
    for i, nbrs in neighbours.items():
        i = int(i)
        if i not in pos:
            raise ConstructionError(f"vertex {i} not in vertex set")
        for j in nbrs:
            j = int(j)
            if j not in pos:
                raise ConstructionError(f"neighbour {j} of {i} not in vertex set")
            if i == j:
                raise BadEntries("self loops are not allowed")
            A[pos[i], pos[j]] = A[pos[j], pos[i]] = 1.0
    return A


def ring_adjacency(m):
    A = np.zeros((m, m))
    for k in range(m):
        A[k, (k + 1) % m] = A[(k + 1) % m, k] = 1.0
    return A


@dataclass
class SensorGraph:
    vertices: list
    adjacency: np.ndarray
    alpha: float = None
    rounds: int = 1
    laplacian: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.vertices = sorted(int(v) for v in self.vertices)
        if len(set(self.vertices)) != len(self.vertices):
            raise ConstructionError("duplicate vertex ids")
        if len(self.vertices) < 2:
            raise ConstructionError("a sensor network needs at least two nodes")
        self.adjacency = np.asarray(self.adjacency, dtype=float)
        if self.adjacency.shape != (len(self.vertices),) * 2:
            raise ConstructionError("adjacency size does not match the vertex set")
        self.laplacian = build_laplacian(self.adjacency)
        if not check_connected(self.laplacian):
            raise NotConnected("sensor graph is not connected")
        if self.alpha is None:
            self.alpha = default_alpha(self.laplacian)
        self.alpha = float(self.alpha)
        if int(self.rounds) < 0:
            raise ConstructionError("rounds must be non-negative")
        self.rounds = int(self.rounds)
        # raises AlphaOutOfRange
        consensus_contraction(self.laplacian, self.alpha)

    @property
    def size(self):
        return len(self.vertices)

    def index(self, sensor_id):
        return self.vertices.index(int(sensor_id))

    def neighbours(self, sensor_id):
        k = self.index(sensor_id)
        return [self.vertices[j] for j in np.flatnonzero(self.adjacency[k])]

    @property
    def contraction(self):
        return consensus_contraction(self.laplacian, self.alpha)

    @property
    def spectrum(self):
        return laplacian_spectrum(self.laplacian)

    def step_matrix(self):
        """Single consensus round I - alpha L acting on node values."""
        return np.eye(self.size) - self.alpha * self.laplacian

    def mixing_matrix(self, rounds=None):
        """(I - alpha L)^rounds; defaults to the graph's round count."""
        rounds = self.rounds if rounds is None else int(rounds)
        return np.linalg.matrix_power(self.step_matrix(), rounds)

    def with_rounds(self, rounds):
        return SensorGraph(self.vertices, self.adjacency.copy(), self.alpha, rounds)
