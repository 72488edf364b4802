"""Online error bounds, parameter selection and task feasibility.

The estimation-error bound h_e_bar(t) and the tracking-deviation bound
h_c_bar(t) are data independent: given the switch times and the values at
each switch they evolve deterministically.  :class:`BoundTracker` carries
them through an episode; :func:`project_task` replays the same recursion
offline to obtain running-time bounds.
"""

import copy
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from .errors import (
    DegenerateContraction,
    InfeasibleCertificate,
    MissingHistory,
    NoFiniteBound,
    UnknownSwitchTime,
)
from .matops import RiccatiSolution, solve_dlyap, spectral_norm, sym_eigvals

# slack kept inside the strict inequality on (1 + rho)(1 + tau)
SAFETY = 0.99

PROOF = "proof"
VERBATIM = "paper"
CORRECTED = "corrected"


def split_observer_gain(G_stack, C_list, N):
    """Per-sensor gains G_i = N * (columns of the stacked gain belonging to sensor i)."""
    gains = []
    col = 0
    for C in C_list:
        m = C.shape[0]
        gains.append(N * G_stack[:, col:col + m])
        col += m
    if col != G_stack.shape[1]:
        raise ValueError("stacked gain width does not match measurement rows")
    return gains


def averaged_injection(gains, C_list):
    """sum_i G_i C_i / N, i.e. the stacked G times the stacked C."""
    N = len(gains)
    return sum(G @ C for G, C in zip(gains, C_list)) / N


def select_params(lam_max_P, N, BK_norm, avg_gc_norm):
    """Pick (rho, tau, gamma) meeting the product and gamma conditions of the estimation bound.

    rho = tau with (1+rho)(1+tau) = 1 + SAFETY*(rhs - 1), where
    rhs = (lam_max - 2/3)/(lam_max - 1); lam_max == 1 leaves the product
    unconstrained and rho = tau = 1.
    """
    if lam_max_P < 1.0 - 1e-9:
        raise InfeasibleCertificate("P must dominate the identity")
    if lam_max_P - 1.0 <= 1e-12:
        rho = tau = 1.0
    else:
        rhs = (lam_max_P - 2.0 / 3.0) / (lam_max_P - 1.0)
        if rhs <= 1.0:
            raise InfeasibleCertificate("product condition has no positive solution")
        prod = 1.0 + SAFETY * (rhs - 1.0)
        rho = tau = math.sqrt(prod) - 1.0
    f = math.sqrt(N) * (BK_norm + avg_gc_norm)
    gamma = max(math.sqrt(2.0), f * math.sqrt(3.0 * (1 + rho) * (1 + 1 / tau) * lam_max_P))
    return rho, tau, gamma


def min_rounds(gamma, rho, tau, lam_c, q_hat, closed_loop_norm):
    """Smallest consensus round count L satisfying both logarithmic conditions."""
    if lam_c >= 1.0:
        raise DegenerateContraction(f"contraction rate {lam_c} >= 1")
    if lam_c <= 0.0:
        return 1
    denom = math.log(1.0 / lam_c)
    d = math.log(gamma * q_hat * math.sqrt(3 * (1 + rho) * (1 + tau))) / denom if gamma * q_hat > 0 else -math.inf
    e = math.log((closed_loop_norm + q_hat) * math.sqrt(3 * (1 + rho) * (1 + 1 / tau))) / denom
    return max(1, math.ceil(max(d, e) - 1e-12))


@dataclass
class TaskCertificate:
    P: RiccatiSolution
    varpi: float
    q: float
    q_bar: float
    lam_c: float
    gamma: float
    rho: float
    tau: float
    N: int
    min_L: int
    rounds: int
    q_hat: float
    f: float

    @property
    def lam_min(self):
        return self.P.lam_min

    @property
    def lam_max(self):
        return self.P.lam_max

    @property
    def b_tilde(self):
        return 3.0 * self.q * self.lam_max / self.lam_min

    @property
    def rounds_ok(self):
        return self.rounds >= self.min_L


@dataclass
class TrackingCertificate:
    P: RiccatiSolution
    lam: float
    beta: float
    squared_mode: bool = True

    @property
    def lam_min(self):
        return self.P.lam_min

    @property
    def lam_max(self):
        return self.P.lam_max


def build_tracking_certificate(model, K, bound_form=PROOF):
    F = model.A + model.B @ K
    P = solve_dlyap(F)
    lam = 1.0 - 1.0 / (2.0 * P.lam_max)
    beta = spectral_norm(P.P) + 2.0 * spectral_norm(P.P @ F) ** 2
    return TrackingCertificate(P=P, lam=lam, beta=beta, squared_mode=(bound_form == PROOF))


def build_task_certificate(model, K, graph, gains, C_list, rounds=None):
    """Certificate for one task given its per-sensor gains (ordered like ``graph.vertices``)."""
    N = graph.size
    rounds = graph.rounds if rounds is None else int(rounds)
    avg = averaged_injection(gains, C_list)
    P = solve_dlyap(model.A - avg)
    BK_norm = spectral_norm(model.B @ K)
    rho, tau, gamma = select_params(P.lam_max, N, BK_norm, spectral_norm(avg))
    lam_c = graph.contraction
    q_hat = max(spectral_norm(G @ C) for G, C in zip(gains, C_list))
    L_min = min_rounds(gamma, rho, tau, lam_c, q_hat, spectral_norm(model.A + model.B @ K))
    g_norms = [spectral_norm(G) for G in gains]
    q_bar = (model.q_w + model.q_v * sum(g_norms) / N) ** 2 \
        + model.q_v ** 2 * gamma ** 2 * lam_c ** (2 * rounds) * max(g_norms) ** 2
    q = (1 + 1 / rho) * P.lam_max * N * q_bar
    return TaskCertificate(
        P=P, varpi=1.0 - 1.0 / (3.0 * P.lam_max), q=q, q_bar=q_bar, lam_c=lam_c,
        gamma=gamma, rho=rho, tau=tau, N=N, min_L=L_min, rounds=rounds, q_hat=q_hat,
        f=math.sqrt(N) * (BK_norm + spectral_norm(avg)),
    )


def estimation_coeffs(cert, t, task_start):
    """(a, b) multiplying the squared error at task start and adding the noise floor."""
    k = t - task_start
    if k < 0:
        raise ValueError("t precedes the task start")
    ratio = cert.lam_max / cert.lam_min
    a = (1 + 4 * cert.gamma ** 2) * cert.N * ratio * cert.varpi ** k
    geo = (1 - cert.varpi ** k) / (1 - cert.varpi)
    b = cert.q * geo / cert.lam_min
    return a, b


def _deviation_term(cert, he, BK_norm, q_w):
    if cert.squared_mode:
        return (BK_norm * he + q_w) ** 2
    return BK_norm * he + q_w


def tracking_coeffs(cert, t, task_start, he_history, BK_norm, q_w):
    """(a_hat, b_hat) of the tracking bound; ``he_history`` maps time -> h_e_bar."""
    k = t - task_start
    if k < 0:
        raise ValueError("t precedes the task start")
    a_hat = cert.lam_max / cert.lam_min * cert.lam ** k
    total = 0.0
    for l in range(k):
        s = t - 1 - l
        if s not in he_history:
            raise MissingHistory(f"h_e_bar({s}) not available")
        total += cert.lam ** l * _deviation_term(cert, he_history[s], BK_norm, q_w)
    return a_hat, cert.beta / cert.lam_min * total


def trigger_bounds(he_bar, hc_bar, D):
    nD = spectral_norm(D)
    return nD * he_bar, nD * hc_bar


def task_feasible(R, D, track, task_cert, BK_norm, q_w, form=VERBATIM):
    """Sufficient condition for finishing a task; returns (feasible, R - threshold)."""
    nD = spectral_norm(D)
    core = math.sqrt(2 * track.beta * track.lam_max) * (BK_norm * math.sqrt(task_cert.b_tilde) + q_w) \
        / math.sqrt(track.lam_min)
    if form == CORRECTED:
        thr = core * nD
    else:
        thr = core / nD if nD > 0 else math.inf
    return R > thr, R - thr


def runtime_bound(phi, R, dwell, horizon, first_l=0):
    """Smallest dt >= dwell with max(phi(l) for l in [dt - dwell, dt)) <= R.

    Window starts below ``first_l`` are skipped.  Raises NoFiniteBound if no
    dt up to ``horizon`` qualifies.
    """
    start = max(dwell, first_l + dwell)
    vals = {}

    def val(l):
        if l not in vals:
            vals[l] = phi(l)
        return vals[l]

    for dt in range(start, horizon + 1):
        if all(val(l) <= R for l in range(dt - dwell, dt)):
            return dt
    raise NoFiniteBound(f"no running-time bound within {horizon} ticks")


class BoundTracker:
    """Per-episode state of the two bound sequences.

    ``certs`` lists one TaskCertificate per task (task k at ``certs[k-1]``).
    Call :meth:`step` once per tick t = 2, 3, ... and :meth:`switch` at the
    tick a task is accomplished.
    """

    def __init__(self, certs, track, q_x, q_r, BK_norm, q_w):
        self.certs = certs
        self.track = track
        self.q_x = q_x
        self.BK_norm = BK_norm
        self.q_w = q_w
        self.task = 1
        self.t = 1
        self.task_start = 1
        self.he = {1: float(q_x)}
        self.hc = {1: float(q_r)}
        self._he_start = float(q_x)
        self._hc_start = float(q_r)
        self._r_hat = 0.0
        self._dev_sum = 0.0

    def copy(self):
        dup = copy.copy(self)
        dup.he = dict(self.he)
        dup.hc = dict(self.hc)
        return dup

    def switch(self, t, r_hat):
        """Start task+1 at tick t; ``r_hat`` = |r_new(1) - r_old(t)|."""
        if t != self.t:
            raise UnknownSwitchTime(f"switch at {t} but bounds are at {self.t}")
        if self.task >= len(self.certs):
            raise UnknownSwitchTime("no task after the last one")
        self.task += 1
        self.task_start = t
        self._he_start = self.he[t]
        self._hc_start = self.hc[t]
        self._r_hat = float(r_hat)
        self._dev_sum = 0.0
        # the tracking bound at the switch tick refers to the new reference
        tr = self.track
        self.hc[t] = math.sqrt(tr.lam_max / tr.lam_min) * (self._hc_start + self._r_hat)

    def step(self):
        """Compute h_e_bar and h_c_bar at the next tick."""
        t = self.t + 1
        cert = self.certs[self.task - 1]
        if self.task == 1:
            # first task indexes the coefficients one tick behind
            a, b = estimation_coeffs(cert, t - 1, self.task_start)
            he = math.sqrt(a * self.q_x ** 2 + b)
        else:
            a, b = estimation_coeffs(cert, t, self.task_start)
            he = math.sqrt(a * self._he_start ** 2 + b)
        tr = self.track
        self._dev_sum = tr.lam * self._dev_sum + _deviation_term(tr, self.he[t - 1], self.BK_norm, self.q_w)
        a_hat = tr.lam_max / tr.lam_min * tr.lam ** (t - self.task_start)
        hc = math.sqrt(a_hat * (self._hc_start + self._r_hat) ** 2 + tr.beta / tr.lam_min * self._dev_sum)
        self.t = t
        self.he[t] = he
        self.hc[t] = hc
        return he, hc


def project_task(tracker, horizon):
    """h_c_bar(task_start + l) for l = 0..horizon assuming no further switch."""
    sim = tracker.copy()
    out = [sim.hc[sim.task_start]]
    while len(out) <= horizon:
        out.append(sim.step()[1])
    return np.array(out)


DEFAULT_HORIZON = 3000


def task_runtime_bound(tracker, task, horizon=None):
    """Running-time bound for the task the tracker is currently in.

    phi(l) pairs h_c at tick task_start + l with the reference sample that
    the controller uses at that same tick.  The bound sequence is projected
    lazily, only as far as the search needs.
    """
    traj = task.trajectory
    if horizon is None:
        horizon = max(DEFAULT_HORIZON, traj.length + 10 * task.dwell)
    sim = tracker.copy()
    hc = [sim.hc[sim.task_start]]
    nD = spectral_norm(task.D)

    def phi(l):
        while len(hc) <= l:
            hc.append(sim.step()[1])
        idx = min(l + 1, traj.length) - 1
        return nD * hc[l] + float(np.linalg.norm(task.D @ traj.states[idx] - task.c))

    first_l = 0 if tracker.task == 1 else 1
    return runtime_bound(phi, task.R, task.dwell, horizon, first_l=first_l)


# -- stacked error dynamics ---------------------------------------------------

def error_dynamics_blocks(model, K, graph, gains, C_list, designated, gamma, rounds=None):
    """Block matrices of the stacked (network-average, disagreement) error recursion.

    Returns a dict with M11, M12, M21, M22 and the operators needed to form
    the noise term.  M12 carries the minus sign of the averaged
    predicted-control and innovation coupling.
    """
    n = model.n
    N = graph.size
    L = graph.rounds if rounds is None else int(rounds)
    I_n = np.eye(n)
    ones = np.ones((N, 1))
    avg = averaged_injection(gains, C_list)
    BK = model.B @ K

    G_bd = block_diag(*gains)
    C_bd = block_diag(*C_list)
    I_bar = np.kron(ones @ ones.T, I_n) / N
    Lmix = np.eye(N * n) - graph.alpha * np.kron(graph.laplacian, I_n)
    Lmix_L = np.linalg.matrix_power(Lmix, L)
    A_bd = np.kron(np.eye(N), model.A + BK)
    sel = np.zeros((1, N))
    sel[0, graph.index(designated)] = 1.0
    avg_row = np.kron(ones.T, I_n)  # (n, nN)

    M11 = np.kron(np.eye(N), model.A - avg)
    M12 = -np.kron(ones, BK @ np.kron(sel, I_n) + avg_row @ G_bd @ C_bd / N) / gamma
    M21 = -gamma * Lmix_L @ (np.eye(N * n) - I_bar) @ G_bd @ C_bd
    M22 = np.linalg.matrix_power(Lmix - I_bar, L) @ A_bd + M21 / gamma
    return {
        "M11": M11, "M12": M12, "M21": M21, "M22": M22,
        "G_bd": G_bd, "I_bar": I_bar, "Lmix_L": Lmix_L, "avg_row": avg_row,
        "N": N, "n": n, "gamma": gamma,
    }


def error_noise_term(blocks, V, w):
    """Noise vector of the stacked recursion for stacked measurement noise V and process noise w."""
    N, n, gamma = blocks["N"], blocks["n"], blocks["gamma"]
    GV = blocks["G_bd"] @ V
    W1 = np.kron(np.ones(N), blocks["avg_row"] @ GV / N - w)
    W2 = gamma * blocks["Lmix_L"] @ (np.eye(N * n) - blocks["I_bar"]) @ GV
    return np.concatenate([W1, W2])


def stacked_error(estimates, x, gamma):
    """(1 (x) e_net, gamma * e_avg) for an (N, n) array of estimates."""
    E = np.asarray(estimates) - x
    e_net = E.mean(axis=0)
    e_avg = (E - e_net).ravel()
    return np.concatenate([np.tile(e_net, E.shape[0]), gamma * e_avg])


def decay_margins(cert, blocks):
    """Largest eigenvalues of the two diagonal blocks that must sit below -1/3."""
    P = cert.P.P
    N = cert.N
    IP = np.kron(np.eye(N), P)
    M11, M12, M21, M22 = blocks["M11"], blocks["M12"], blocks["M21"], blocks["M22"]
    c1 = (1 + cert.rho) * (1 + cert.tau)
    c2 = (1 + cert.rho) * (1 + 1 / cert.tau)
    Mb11 = c1 * (M11.T @ IP @ M11 + M21.T @ M21) - IP
    Mb22 = c2 * (M12.T @ IP @ M12 + M22.T @ M22) - np.eye(M22.shape[0])
    sym = lambda M: 0.5 * (M + M.T)
    return float(sym_eigvals(sym(Mb11))[-1]), float(sym_eigvals(sym(Mb22))[-1])
