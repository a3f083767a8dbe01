"""Mask refinement with a two-component complex Gaussian mixture.

Each T-F observation vector is modelled as a zero-mean complex Gaussian
mixture of a speech and a noise component, N_c(0, phi_v(t,f) R_v(f)). The
mixture weights are held fixed at the pooled DNN priors alpha_v(t,f); EM
re-estimates the per-bin variances phi_v and the spatial covariances R_v, and
the final posteriors lambda_v are the refined masks.

Component axis convention: index 0 is speech, index 1 is noise.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DataError, NumericalError

__all__ = [
    "CgmmConfig",
    "CgmmState",
    "load_diagonal",
    "init_covariances",
    "e_step",
    "m_step_phi",
    "m_step_R",
    "rank1_source_approx",
    "refine",
    "write_loglik_csv",
]

log = logging.getLogger(__name__)

SPEECH, NOISE = 0, 1
_TINY = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class CgmmConfig:
    iterations: int = 20
    rank1: bool = False
    loading: float = 1e-6
    # phi floor relative to the mean per-frequency signal power
    phi_floor: float = 1e-10


@dataclass(frozen=True)
class CgmmState:
    """Result of ``refine``. Arrays are read-only.

    lambda_s, lambda_n, alpha_s, alpha_n: T x F
    phi: 2 x T x F (speech, noise)
    R: 2 x F x M x M (speech, noise)
    loglik: data log-likelihood evaluated at every E-step
    """

    lambda_s: np.ndarray
    lambda_n: np.ndarray
    phi: np.ndarray
    R: np.ndarray
    alpha_s: np.ndarray
    alpha_n: np.ndarray
    loglik: tuple = field(default=())

    def __post_init__(self):
        for name in ("lambda_s", "lambda_n", "phi", "R", "alpha_s", "alpha_n"):
            getattr(self, name).setflags(write=False)


def _hermitian(a):
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def load_diagonal(R, loading):
    """R + loading * tr(R)/M * I for a stack of M x M matrices."""
    M = R.shape[-1]
    scale = loading * np.trace(R, axis1=-2, axis2=-1).real / M
    return R + scale[..., None, None] * np.eye(M)


def _factor(R, loading):
    """Inverse and log-determinant of the loaded covariances (F x M x M)."""
    Rl = load_diagonal(R, loading)
    try:
        chol = np.linalg.cholesky(Rl)
    except np.linalg.LinAlgError:
        bad = [f for f in range(Rl.shape[0]) if not _is_pd(Rl[f])]
        raise NumericalError(
            f"covariance not positive definite after diagonal loading at frequency bin(s) {bad}"
        ) from None
    diag = np.diagonal(chol, axis1=-2, axis2=-1).real
    logdet = 2.0 * np.log(diag).sum(axis=-1)
    eye = np.broadcast_to(np.eye(R.shape[-1], dtype=np.complex128), Rl.shape)
    linv = np.linalg.solve(chol, eye)
    rinv = np.conj(np.swapaxes(linv, -1, -2)) @ linv
    return _hermitian(rinv), logdet


def _is_pd(a):
    try:
        np.linalg.cholesky(a)
        return True
    except np.linalg.LinAlgError:
        return False


def _check_inputs(y, alpha_s):
    y = np.asarray(getattr(y, "bins", y), dtype=np.complex128)
    if y.ndim != 3:
        raise DataError(f"observations must be T x F x M, got shape {y.shape}")
    alpha_s = np.asarray(alpha_s, dtype=np.float64)
    if alpha_s.shape != y.shape[:2]:
        raise DataError(f"prior shape {alpha_s.shape} does not match T x F = {y.shape[:2]}")
    if np.any(alpha_s < 0) or np.any(alpha_s > 1) or not np.all(np.isfinite(alpha_s)):
        raise DataError("priors must lie in [0, 1]")
    return y, alpha_s


def init_covariances(y, alpha_s, alpha_n=None):
    """Prior-weighted spatial covariances, normalised by tr(R)/M.

    Frequencies with zero prior mass (or zero energy) fall back to identity.
    Returns 2 x F x M x M.
    """
    y, alpha_s = _check_inputs(y, alpha_s)
    if alpha_n is None:
        alpha_n = 1.0 - alpha_s
    M = y.shape[2]
    out = []
    for name, a in (("speech", alpha_s), ("noise", alpha_n)):
        R = _hermitian(kernels.weighted_covariance(y, a))
        tr = np.trace(R, axis1=-2, axis2=-1).real
        bad = (a.sum(axis=0) <= 0) | ~(tr > 0)
        if np.any(bad):
            log.warning("%s prior has no mass at %d frequency bin(s); using identity covariance",
                        name, int(bad.sum()))
        R = R / np.where(bad, 1.0, tr / M)[:, None, None]
        R[bad] = np.eye(M)
        out.append(R)
    return np.stack(out)


def m_step_phi(y, R, loading=1e-6, floor=1e-10):
    """phi(t,f) = y^H R^-1 y / M, floored at ``floor`` x mean power of bin f.

    R is F x M x M; returns T x F.
    """
    y = np.asarray(y, dtype=np.complex128)
    M = y.shape[2]
    rinv, _ = _factor(R, loading)
    phi = kernels.quadratic_form(y, rinv) / M
    power = (np.abs(y) ** 2).mean(axis=(0, 2))
    return np.maximum(phi, np.maximum(floor * power, _TINY)[None, :])


def m_step_R(y, lam, phi, R_prev=None):
    """R(f) = sum_t lam/phi y y^H / sum_t lam, Hermitian-symmetrised.

    Where sum_t lam = 0, or the accumulation is not finite, the previous
    covariance is kept (identity if none).
    """
    y = np.asarray(y, dtype=np.complex128)
    M = y.shape[2]
    mass = lam.sum(axis=0)
    with np.errstate(over="ignore", invalid="ignore"):
        R = _hermitian(kernels.weighted_covariance(y, lam / phi))
        R = R / np.where(mass > 0, mass, 1.0)[:, None, None]
    tr = np.trace(R, axis1=-2, axis2=-1).real
    bad = (mass <= 0) | ~(tr > 0) | ~np.isfinite(R).all(axis=(-2, -1))
    if np.any(bad):
        log.warning("degenerate posterior mass at %d frequency bin(s); keeping previous "
                    "covariance", int(bad.sum()))
        R[bad] = np.eye(M) if R_prev is None else R_prev[bad]
    return R


def rank1_source_approx(R):
    """Principal-eigenpair approximation sigma_1 u_1 u_1^H of each matrix."""
    w, v = np.linalg.eigh(R)
    u = v[..., :, -1]
    sigma = np.maximum(w[..., -1], 0.0)
    out = sigma[..., None, None] * (u[..., :, None] * np.conj(u[..., None, :]))
    return _hermitian(out)


def e_step(y, phi, R, alpha_s, alpha_n=None, loading=1e-6):
    """Posterior speech/noise probabilities under fixed priors.

    Arguments:
        y: T x F x M observations
        phi: 2 x T x F variances, R: 2 x F x M x M spatial covariances
    Return:
        (lambda_s, lambda_n, loglik) where loglik is the summed log of the
        mixture density over all bins.
    """
    y, alpha_s = _check_inputs(y, alpha_s)
    if alpha_n is None:
        alpha_n = 1.0 - alpha_s
    M = y.shape[2]
    logp = []
    with np.errstate(divide="ignore"):
        for v, a in ((SPEECH, alpha_s), (NOISE, alpha_n)):
            rinv, logdet = _factor(R[v], loading)
            q = kernels.quadratic_form(y, rinv)
            lognc = -M * np.log(np.pi) - M * np.log(phi[v]) - logdet[None, :] - q / phi[v]
            logp.append(np.log(a) + lognc)
    ls, ln = logp
    top = np.maximum(ls, ln)
    lse = top + np.log(np.exp(ls - top) + np.exp(ln - top))
    if not np.all(np.isfinite(lse)):
        bad = np.unique(np.nonzero(~np.isfinite(lse))[1])
        raise NumericalError(f"non-finite mixture density at frequency bin(s) {bad.tolist()}")
    lam_s = np.exp(ls - lse)
    lam_n = np.exp(ln - lse)
    # the smaller posterior is exact; the larger is its complement so the sum is exactly 1
    small = lam_s <= 0.5
    lam_n = np.where(small, 1.0 - lam_s, lam_n)
    lam_s = np.where(small, lam_s, 1.0 - lam_n)
    return lam_s, lam_n, float(lse.sum())


def refine(y, alpha_s, config=None, alpha_n=None):
    """Run fixed-prior CGMM EM and return the final ``CgmmState``.

    Each round runs an E-step with the current parameters, then updates phi
    from the current R and R from the new posteriors and phi. With
    ``config.rank1`` the speech covariance is replaced by its principal
    rank-1 approximation after every R update. ``iterations=0`` returns the
    priors unchanged as posteriors.
    """
    cfg = config or CgmmConfig()
    y, alpha_s = _check_inputs(y, alpha_s)
    alpha_s = alpha_s.copy()
    alpha_n = (1.0 - alpha_s) if alpha_n is None else np.array(alpha_n, dtype=np.float64)

    R = init_covariances(y, alpha_s, alpha_n)
    phi = np.stack([m_step_phi(y, R[v], cfg.loading, cfg.phi_floor) for v in (SPEECH, NOISE)])
    lam_s, lam_n = alpha_s.copy(), alpha_n.copy()
    loglik = []
    for _ in range(cfg.iterations):
        lam_s, lam_n, ll = e_step(y, phi, R, alpha_s, alpha_n, cfg.loading)
        loglik.append(ll)
        phi = np.stack([m_step_phi(y, R[v], cfg.loading, cfg.phi_floor) for v in (SPEECH, NOISE)])
        R = np.stack([
            m_step_R(y, lam_s, phi[SPEECH], R[SPEECH]),
            m_step_R(y, lam_n, phi[NOISE], R[NOISE]),
        ])
        if cfg.rank1:
            R[SPEECH] = rank1_source_approx(R[SPEECH])
    return CgmmState(lam_s, lam_n, phi, R, alpha_s, alpha_n, tuple(loglik))


def write_loglik_csv(path, loglik):
    with open(path, "w") as fh:
        fh.write("iteration,loglik\n")
        for i, ll in enumerate(loglik, start=1):
            fh.write(f"{i},{float(ll)!r}\n")
