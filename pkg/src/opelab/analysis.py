"""Theoretical quantities evaluated on a concrete instance.

The universal constants left unspecified by the error bound are set to
one here, so every number in :class:`BoundConstants` is an envelope meant
for relative comparisons only.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateCoverage
from .mdp import COVERAGE_TOL
from .numerics import inv_op_norm, op_norm
from .sampler import rollout, stream

C_THRESHOLD = 1.0
C_BOUND = 1.0


@dataclass(frozen=True)
class DominantTerms:
    """Leading ``1/sqrt(K)`` error terms of the two estimators.

    ``per_stage[h-1] = (||v_h||_{Lambda_h^-1}, (H-h+1) ||v_h||_{Sigma_h^-1})``,
    both already divided by ``sqrt(K)``.
    """

    d_va: float
    d_fqi: float
    ratio: float
    per_stage: np.ndarray
    K: int


def _require_coverage(cov):
    if cov.kappa <= COVERAGE_TOL or cov.iota <= COVERAGE_TOL:
        raise DegenerateCoverage(f"kappa={cov.kappa:.3e}, iota={cov.iota:.3e}")


def dominant_terms(cov, K):
    _require_coverage(cov)
    if K < 1:
        raise ValueError("K must be at least 1")
    H = cov.H
    per_stage = np.zeros((H, 2))
    for h in range(1, H + 1):
        per_stage[h - 1, 0] = cov.norm_lambda_inv(h)
        per_stage[h - 1, 1] = (H - h + 1) * cov.norm_sigma_inv(h)
    per_stage /= np.sqrt(K)
    d_va, d_fqi = per_stage.sum(axis=0)
    return DominantTerms(d_va=float(d_va), d_fqi=float(d_fqi), ratio=float(d_fqi / d_va),
                         per_stage=per_stage, K=int(K))


@dataclass(frozen=True)
class BoundConstants:
    C_h1: np.ndarray
    C_h2: np.ndarray
    C_h3: np.ndarray
    C_h4: np.ndarray
    C3: float
    C4: float
    delta: float
    K_min: float
    K: float
    C_threshold: float = C_THRESHOLD
    C_bound: float = C_BOUND

    def error_bound(self, sum_norms, K=None):
        """High-probability bound on ``|v_1 - v1_hat|`` at sample size ``K``."""
        K = self.K if K is None else K
        H = len(self.C_h1)
        log_term = np.log(16 * H / self.delta)
        return (self.C_bound * sum_norms * np.sqrt(log_term / K)
                + self.C_bound * self.C4 * log_term * (K ** -0.75 + 1.0 / K))


def _log_arg(d, H, K, kappa, delta):
    return np.log(d * H ** 2 * K / (kappa * delta))


def sample_size_threshold(C3, d, H, kappa, delta, c=C_THRESHOLD, max_iter=500):
    """Smallest ``K`` with ``K >= c C3 d^2 log(d H^2 K / (kappa delta))^2``.

    Found as the largest fixed point of the right-hand side by iteration
    from above; returns ``inf`` when ``C3`` is infinite.
    """
    if not np.isfinite(C3):
        return float("inf")

    def rhs(K):
        return c * C3 * d ** 2 * max(_log_arg(d, H, K, kappa, delta), 0.0) ** 2

    K = max(1.0, rhs(1.0))
    for _ in range(max_iter):
        K_next = max(1.0, rhs(K))
        if abs(K_next - K) <= 1e-9 * K:
            break
        K = K_next
    # nudge upwards until the inequality holds at an integer
    K = float(np.ceil(K))
    while K < rhs(K):
        K += 1.0
    return K


def bound_constants(cov, delta, K=None):
    """Constants of the finite-sample error bound.

    ``C4`` contains ``log(K)`` and is evaluated at ``K`` (default: the
    sample-size threshold ``K_min``).  ``d`` is the dimension of the
    coverage basis of ``cov``.
    """
    _require_coverage(cov)
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    H = cov.H
    d = cov.dim
    span = H - np.arange(1, H + 1) + 1.0
    scale = cov.eta + cov.sigma_r ** 2
    iota_h, kappa = cov.iota_h, cov.kappa
    C_h3 = span ** 2 / scale
    C_h1 = np.cumsum((1.0 / iota_h)[::-1])[::-1]
    C_h2 = np.cumsum(np.sqrt(C_h3 / iota_h)[::-1])[::-1]
    C_h4 = np.array([np.sqrt(op_norm(L) * inv_op_norm(L))
                     for L in (cov.reduced(h)[1] for h in range(1, H + 1))])

    with np.errstate(divide="ignore"):
        sr4 = cov.sigma_r ** 4
        C3 = max(
            np.max(C_h3 * C_h2 ** 2 / (iota_h ** 2 * scale ** 3)),
            H ** 4 / (sr4 * kappa ** 2) if sr4 > 0 else np.inf,
            (H ** 2 / (sr4 * kappa ** 2) if sr4 > 0 else np.inf)
            * np.max(C_h3 / scale) * np.max(C_h3 / iota_h),
        )
    K_min = sample_size_threshold(C3, d, H, kappa, delta)
    K_eval = K_min if K is None else float(K)
    norms = np.array([cov.norm_lambda_inv(h) for h in range(1, H + 1)])
    if np.isfinite(K_eval):
        log_k = _log_arg(d, H, K_eval, kappa, delta)
        C4 = float(np.sum(np.sqrt(C_h4 * C_h2 * span * d / (iota_h * scale ** 2) * log_k) * norms))
    else:
        C4 = float("inf")
    return BoundConstants(C_h1=C_h1, C_h2=C_h2, C_h3=C_h3, C_h4=C_h4, C3=float(C3),
                          C4=C4, delta=float(delta), K_min=K_min, K=K_eval)


def monte_carlo_v_features(mdp, target, xi1, n_traj, seed, return_stderr=False,
                           chunk=200_000):
    """Empirical mean of ``phi(s_h, a_h)`` over ``n_traj`` target-policy rollouts, shape (H, d).

    With ``return_stderr`` the per-coordinate standard errors are returned too.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be at least 1")
    total = np.zeros((mdp.H, mdp.d))
    total_sq = np.zeros((mdp.H, mdp.d))
    done = 0
    index = 0
    while done < n_traj:
        n = min(chunk, n_traj - done)
        S, A, _, _ = rollout(mdp, target, xi1, n, stream(seed, index))
        F = mdp.phi[S, A]
        total += F.sum(axis=1)
        total_sq += (F ** 2).sum(axis=1)
        done += n
        index += 1
    mean = total / n_traj
    var = np.maximum(total_sq / n_traj - mean ** 2, 0.0)
    if return_stderr:
        return mean, np.sqrt(var / n_traj)
    return mean
