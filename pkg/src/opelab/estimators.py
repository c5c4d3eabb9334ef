"""Fitted-Q off-policy evaluation, plain and variance-weighted.

Both estimators run a backward loop over stages, regressing
``r + V_hat_{h+1}(s')`` on ``phi(s, a)``.  The variance-aware version first
fits the first two conditional moments of ``V_hat_{h+1}`` on a second
dataset, turns them into per-pair weights ``1 / sigma_hat^2`` and then
solves a weighted ridge problem.
"""

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .mdp import check_distribution, occupancy, policy_features, stage_params
from .numerics import cholesky, cho_solve
from .sampler import check_aligned


@dataclass(frozen=True)
class RidgeProblem:
    """``argmin_w lam ||w||^2 + sum_k weights_k (<features_k, w> - targets_k)^2``.

    ``weights`` are inverse variances ``1 / sigma_k^2``; all ones gives
    ordinary ridge regression.
    """

    features: np.ndarray
    targets: np.ndarray
    weights: Optional[np.ndarray] = None
    lam: float = 1.0

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.targets, dtype=float)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ValueError(f"features {X.shape} and targets {y.shape} disagree")
        wt = np.ones(X.shape[0]) if self.weights is None else np.asarray(self.weights, dtype=float)
        if wt.shape != y.shape or np.any(wt <= 0):
            raise ValueError("weights must be positive, one per sample")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "weights", wt)

    def gram(self):
        X = self.features
        return X.T @ (X * self.weights[:, None]) + self.lam * np.eye(X.shape[1])

    def moment(self):
        return self.features.T @ (self.weights * self.targets)


def weighted_ridge(problem):
    """Closed-form solution of a :class:`RidgeProblem` via the normal equations."""
    return cho_solve(cholesky(problem.gram()), problem.moment())


@dataclass(frozen=True)
class VaParams:
    """Tuning of the variance-aware estimator.

    ``eta`` is the floor applied to the estimated variance (scalar or one
    value per stage) and ``sigma_r**2`` is added on top of it.
    """

    lam: float = 1.0
    eta: object = 1.0
    sigma_r: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if np.any(np.asarray(self.eta, dtype=float) < 1.0):
            raise ValueError("eta must be at least 1")
        if not 0.0 <= self.sigma_r <= 1.0:
            raise ValueError("sigma_r must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class EstimatorOutput:
    """Everything an estimator run produced; stage axis indexed ``h - 1``.

    ``beta_hat``, ``theta_hat`` and ``Sigma_hat`` are ``None`` for the
    unweighted baseline, whose ``sigma2_hat`` is identically one.
    """

    method: str
    v1_hat: float
    w_hat: np.ndarray           # (H, d)
    V_hat: np.ndarray           # (H, n_s)
    Lambda_hat: np.ndarray      # (H, d, d)
    sigma2_hat: np.ndarray      # (H, n_s, n_a)
    lam: np.ndarray             # (H,)
    beta_hat: Optional[np.ndarray] = None
    theta_hat: Optional[np.ndarray] = None
    Sigma_hat: Optional[np.ndarray] = None

    def to_dict(self):
        out = {"method": self.method, "v1_hat": self.v1_hat}
        for name in ("w_hat", "V_hat", "Lambda_hat", "sigma2_hat", "lam",
                     "beta_hat", "theta_hat", "Sigma_hat"):
            value = getattr(self, name)
            out[name] = None if value is None else value.tolist()
        return out

    def to_json(self):
        return json.dumps(self.to_dict())


def _features(mdp, data, h):
    i = h - 1
    return mdp.phi[data.s[i], data.a[i]]


def fqi_ope(data, mdp, target, xi1, lam=1.0):
    """Backward fitted-Q evaluation with unweighted ridge regression.

    ``lam`` may be a scalar or one regularizer per stage.
    """
    xi1 = check_distribution(xi1, mdp.n_s)
    H, d = mdp.H, mdp.d
    lam = stage_params(lam, H, "lam")
    w_hat = np.zeros((H, d))
    V_hat = np.zeros((H, mdp.n_s))
    Lambda_hat = np.zeros((H, d, d))
    V_next = np.zeros(mdp.n_s)
    for h in range(H, 0, -1):
        i = h - 1
        y = data.r[i] + V_next[data.s_next[i]]
        prob = RidgeProblem(_features(mdp, data, h), y, lam=lam[i])
        Lambda_hat[i] = prob.gram()
        w_hat[i] = cho_solve(cholesky(Lambda_hat[i]), prob.moment())
        V_hat[i] = policy_features(mdp, target, h) @ w_hat[i]
        V_next = V_hat[i]
    return EstimatorOutput(
        method="fqi_ope", v1_hat=float(xi1 @ V_hat[0]), w_hat=w_hat, V_hat=V_hat,
        Lambda_hat=Lambda_hat, sigma2_hat=np.ones((H, mdp.n_s, mdp.n_a)), lam=lam)


def estimated_variance(mdp, beta, theta, h):
    """Clipped second moment minus squared clipped first moment, per (s, a)."""
    span = mdp.H - h + 1
    second = np.clip(mdp.phi @ beta, 0.0, span ** 2)
    first = np.clip(mdp.phi @ theta, 0.0, span)
    return second - first ** 2


def va_ope(D, D_check, mdp, target, xi1, params=None):
    """Variance-aware fitted-Q evaluation.

    ``D_check`` feeds the variance regressions and ``D`` the value
    regression; pass the same object twice to use one dataset for both.
    """
    params = params or VaParams()
    check_aligned(D, D_check)
    xi1 = check_distribution(xi1, mdp.n_s)
    H, d = mdp.H, mdp.d
    lam = params.lam
    eta = stage_params(params.eta, H)
    eye = np.eye(d)
    w_hat = np.zeros((H, d))
    beta_hat = np.zeros((H, d))
    theta_hat = np.zeros((H, d))
    V_hat = np.zeros((H, mdp.n_s))
    Lambda_hat = np.zeros((H, d, d))
    Sigma_hat = np.zeros((H, d, d))
    sigma2_hat = np.zeros((H, mdp.n_s, mdp.n_a))
    V_next = np.zeros(mdp.n_s)
    for h in range(H, 0, -1):
        i = h - 1
        X_check = _features(mdp, D_check, h)
        v_check = V_next[D_check.s_next[i]]
        Sigma_hat[i] = X_check.T @ X_check + lam * eye
        L = cholesky(Sigma_hat[i])
        beta_hat[i] = cho_solve(L, X_check.T @ v_check ** 2)
        theta_hat[i] = cho_solve(L, X_check.T @ v_check)
        var_hat = estimated_variance(mdp, beta_hat[i], theta_hat[i], h)
        sigma2_hat[i] = np.maximum(eta[i], var_hat) + params.sigma_r ** 2

        y = D.r[i] + V_next[D.s_next[i]]
        prob = RidgeProblem(_features(mdp, D, h), y,
                            weights=1.0 / sigma2_hat[i, D.s[i], D.a[i]], lam=lam)
        Lambda_hat[i] = prob.gram()
        w_hat[i] = cho_solve(cholesky(Lambda_hat[i]), prob.moment())
        V_hat[i] = policy_features(mdp, target, h) @ w_hat[i]
        V_next = V_hat[i]
    return EstimatorOutput(
        method="va_ope", v1_hat=float(xi1 @ V_hat[0]), w_hat=w_hat, V_hat=V_hat,
        Lambda_hat=Lambda_hat, sigma2_hat=sigma2_hat, lam=np.full(H, float(lam)),
        beta_hat=beta_hat, theta_hat=theta_hat, Sigma_hat=Sigma_hat)


def bellman_residual_diagnostic(output, data, mdp, target, xi1, exact):
    """Per-stage terms of the exact error decomposition of ``v_1 - v1_hat``.

    Returns an (H, 3) array whose columns are

    * the regularization bias propagated from the next-stage error,
      ``-lam v_h^T Lambda_hat^{-1} sum_s' (V_{h+1} - V_hat_{h+1})(s') mu_h(s')``;
    * the weighted sampling noise,
      ``v_h^T Lambda_hat^{-1} sum_k phi_k Delta_k / sigma_hat_k^2`` with
      ``Delta_k = [P_h V_hat_{h+1}](s_k, a_k) - V_hat_{h+1}(s'_k) - eps_k``;
    * the shrinkage bias ``lam v_h^T Lambda_hat^{-1} w_h``.

    ``data`` must be the dataset the value regressions were fitted on.
    The entries sum to ``exact.v1 - output.v1_hat`` up to rounding.
    """
    H = mdp.H
    nu_t = occupancy(mdp, target, xi1)
    v = np.einsum("hsa,sad->hd", nu_t, mdp.phi)
    R = mdp.expected_rewards()
    terms = np.zeros((H, 3))
    for h in range(1, H + 1):
        i = h - 1
        lam = output.lam[i]
        L = cholesky(output.Lambda_hat[i])
        Linv_v = cho_solve(L, v[i])
        if h < H:
            V_true, V_est = exact.V[h], output.V_hat[h]
        else:
            V_true = V_est = np.zeros(mdp.n_s)
        s, a, t = data.s[i], data.a[i], data.s_next[i]
        pv_est = mdp.phi[s, a] @ (mdp.mu[i].T @ V_est)
        eps = data.r[i] - R[i, s, a]
        delta = pv_est - V_est[t] - eps
        weighted = mdp.phi[s, a].T @ (delta / output.sigma2_hat[i, s, a])
        terms[i, 0] = -lam * Linv_v @ (mdp.mu[i].T @ (V_true - V_est))
        terms[i, 1] = Linv_v @ weighted
        terms[i, 2] = lam * Linv_v @ exact.w[i]
    return terms
