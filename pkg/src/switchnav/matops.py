"""Small dense linear algebra: Lyapunov solves, spectra, norms and pole placement.

Everything here works on plain ``numpy`` arrays. Matrices are at most a few
dozen rows, so the routines favour exactness and determinism over speed.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import signal

from .errors import (
    NoConvergence,
    NotControllable,
    NotObservable,
    NotSchurStable,
    NotSymmetric,
    PlacementFailed,
)


@dataclass(frozen=True)
class Tolerances:
    schur_margin: float = 1e-12
    symmetry: float = 1e-10
    riccati_residual: float = 1e-9
    placement: float = 1e-6
    connectivity: float = 1e-9
    rank: float = 1e-9
    kron_max_dim: int = 8
    max_refinements: int = 5
    max_doublings: int = 200


TOL = Tolerances()


@dataclass(frozen=True)
class RiccatiSolution:
    """Solution P of ``F.T @ P @ F + I = P`` and its residual (spectral norm)."""

    P: np.ndarray
    residual: float

    @cached_property
    def eigvals(self):
        return sym_eigvals(self.P)

    @cached_property
    def lam_min(self):
        return float(self.eigvals[0])

    @cached_property
    def lam_max(self):
        return float(self.eigvals[-1])


def spectral_radius(M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def is_schur(M):
    return spectral_radius(M) < 1.0 - TOL.schur_margin


def spectral_norm(M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def sym_eigvals(M):
    """Ascending eigenvalues of a symmetric matrix."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    scale = 1.0 + np.max(np.abs(M), initial=0.0)
    if M.shape[0] != M.shape[1] or np.max(np.abs(M - M.T), initial=0.0) > TOL.symmetry * scale:
        raise NotSymmetric("matrix is not symmetric")
    return np.linalg.eigvalsh(0.5 * (M + M.T))


def _lyap_residual(F, P):
    n = F.shape[0]
    return spectral_norm(F.T @ P @ F + np.eye(n) - P)


def _kron_solve(F, rhs):
    # column-major vec: vec(F^T X F) = (F^T kron F^T) vec(X)
    n = F.shape[0]
    lhs = np.eye(n * n) - np.kron(F.T, F.T)
    x = np.linalg.solve(lhs, rhs.reshape(-1, order="F"))
    return x.reshape(n, n, order="F")


def _doubling(F):
    n = F.shape[0]
    P = np.eye(n)
    Fk = F.copy()
    for _ in range(TOL.max_doublings):
        step = Fk.T @ P @ Fk
        P = P + step
        Fk = Fk @ Fk
        if np.max(np.abs(step)) <= 1e-16 * np.max(np.abs(P)):
            return P
    raise NoConvergence("doubling iteration did not converge")


def solve_dlyap(F):
    """Solve ``F.T P F + I = P`` for Schur-stable ``F``.

    Uses a direct Kronecker solve for n <= 8 and Smith doubling otherwise,
    followed by a few steps of residual refinement.
    """
    F = np.atleast_2d(np.asarray(F, dtype=float))
    n = F.shape[0]
    if F.shape != (n, n):
        raise ValueError("F must be square")
    if not is_schur(F):
        raise NotSchurStable(f"spectral radius {spectral_radius(F):.6g} >= 1")

    if n <= TOL.kron_max_dim:
        P = _kron_solve(F, np.eye(n))
    else:
        P = _doubling(F)
    P = 0.5 * (P + P.T)

    res = _lyap_residual(F, P)
    for _ in range(TOL.max_refinements):
        if res <= TOL.riccati_residual:
            break
        R = F.T @ P @ F + np.eye(n) - P
        if n <= TOL.kron_max_dim:
            dP = _kron_solve(F, R)
        else:
            dP = R.copy()
            Fk = F.copy()
            for _ in range(TOL.max_doublings):
                step = Fk.T @ dP @ Fk
                dP = dP + step
                Fk = Fk @ Fk
                if np.max(np.abs(step), initial=0.0) <= 1e-18:
                    break
        P = P + 0.5 * (dP + dP.T)
        res = _lyap_residual(F, P)
    if res > TOL.riccati_residual:
        raise NoConvergence(f"Lyapunov residual {res:.3g} above tolerance")
    return RiccatiSolution(P=P, residual=res)


def _rank(M):
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > TOL.rank * max(1.0, s[0])))


def controllability_matrix(A, B):
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def is_controllable(A, B):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    return _rank(controllability_matrix(A, B)) == A.shape[0]


def is_stabilizable(A, B):
    """PBH test restricted to eigenvalues on or outside the unit circle."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if abs(lam) >= 1.0 - TOL.schur_margin:
            if _rank(np.hstack([lam * np.eye(n) - A, B])) < n:
                return False
    return True


def is_detectable(A, C):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.asarray(C, dtype=float).reshape(-1, A.shape[0])
    return is_stabilizable(A.T, C.T)


def _sorted_poles(p):
    p = np.asarray(p, dtype=complex)
    return p[np.lexsort((p.imag, p.real))]


def _check_poles(poles, n):
    poles = np.asarray(poles, dtype=complex).ravel()
    if poles.size != n:
        raise PlacementFailed(f"need {n} poles, got {poles.size}")
    if np.any(np.abs(poles) >= 1.0):
        raise PlacementFailed("requested poles must lie inside the unit disk")
    c = _sorted_poles(np.conj(poles))
    if not np.allclose(_sorted_poles(poles), c, atol=1e-12):
        raise PlacementFailed("complex poles must come in conjugate pairs")
    return poles


def place_state_gain(A, B, poles):
    """Return K such that ``eig(A + B K)`` equals ``poles``.

    ``B`` need not have full column rank; placement is done on a column basis
    of ``B`` and mapped back with the minimum-norm lift.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(n, -1)
    poles = _check_poles(poles, n)
    if not is_controllable(A, B):
        raise NotControllable("(A, B) is not controllable")

    U, s, Vt = np.linalg.svd(B, full_matrices=False)
    r = int(np.sum(s > TOL.rank * max(1.0, s[0])))
    B_red = U[:, :r] * s[:r]
    try:
        res = signal.place_poles(A, B_red, poles)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise PlacementFailed(str(exc)) from exc
    K = -(Vt[:r].T @ res.gain_matrix)

    got = _sorted_poles(np.linalg.eigvals(A + B @ K))
    if np.max(np.abs(got - _sorted_poles(poles))) > TOL.placement:
        raise PlacementFailed("closed-loop spectrum does not match requested poles")
    return K


def place_observer_gain(A, C_stack, poles):
    """Return G such that ``eig(A - G C_stack)`` equals ``poles`` (by duality)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    C = np.asarray(C_stack, dtype=float).reshape(-1, n)
    if not is_controllable(A.T, C.T):
        raise NotObservable("(A, C) is not observable")
    try:
        K = place_state_gain(A.T, C.T, poles)
    except NotControllable as exc:  # pragma: no cover - guarded above
        raise NotObservable(str(exc)) from exc
    return -K.T
