"""Comparison estimators: a centralized Kalman filter over all sensors."""

from dataclasses import dataclass

import numpy as np

from .errors import SingularInnovationCovariance


@dataclass
class KalmanState:
    mean: np.ndarray
    cov: np.ndarray


def uniform_covariance(halfwidth, dim):
    """Covariance of i.i.d. uniform noise on [-h, h]: (h^2 / 3) I."""
    return (halfwidth ** 2 / 3.0) * np.eye(dim)


def ckf_update(kf, y, C, Rcov):
    S = C @ kf.cov @ C.T + Rcov
    try:
        gain = np.linalg.solve(S, C @ kf.cov).T
    except np.linalg.LinAlgError as exc:
        raise SingularInnovationCovariance("innovation covariance is singular") from exc
    if not np.all(np.isfinite(gain)):
        raise SingularInnovationCovariance("innovation covariance is singular")
    mean = kf.mean + gain @ (y - C @ kf.mean)
    ImKC = np.eye(kf.cov.shape[0]) - gain @ C
    # Joseph form keeps the covariance symmetric positive semidefinite
    cov = ImKC @ kf.cov @ ImKC.T + gain @ Rcov @ gain.T
    return KalmanState(mean, 0.5 * (cov + cov.T))


def ckf_predict(kf, u, model, Qcov):
    mean = model.A @ kf.mean + model.B @ u
    cov = model.A @ kf.cov @ model.A.T + Qcov
    return KalmanState(mean, cov)


def ckf_baseline_step(kf, y_all, u, model, C_all, Qcov, Rcov):
    """Predict with the previous input, then fuse every sensor's measurement."""
    return ckf_update(ckf_predict(kf, u, model, Qcov), y_all, C_all, Rcov)
