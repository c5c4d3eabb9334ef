"""Finite linear MDPs and exact (oracle) evaluation of population quantities.

Stages are numbered ``1..H`` in every public function that takes a stage
argument; arrays are stored with a leading stage axis indexed ``h - 1``.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateCoverage, InvalidMDP, InvalidStage
from .numerics import inv_quad_form, is_psd, sym_eig_extremes

CLAMP_TOL = 1e-12
COVERAGE_TOL = 1e-10
NOISE_KINDS = ("none", "uniform")


@dataclass(frozen=True)
class NoiseSpec:
    """Reward noise model.

    ``uniform`` adds ``eps ~ U[-w, w]`` to the expected reward ``r`` with
    ``w = min(half_width, r, 1 - r)``.  Shrinking the support rather than
    clipping the sum keeps the noise zero-mean while the realized reward
    stays in ``[0, 1]``; pairs with reward exactly 0 or 1 are noiseless.
    """

    kind: str = "none"
    half_width: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not 0.0 <= self.half_width <= 1.0:
            raise ValueError("half_width must lie in [0, 1]")

    def realize(self, expected, rng):
        expected = np.asarray(expected, dtype=float)
        if self.kind == "none" or self.half_width == 0.0:
            return expected.copy()
        width = np.clip(np.minimum(self.half_width, np.minimum(expected, 1.0 - expected)), 0.0, None)
        eps = width * rng.uniform(-1.0, 1.0, size=expected.shape)
        return np.clip(expected + eps, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class TabularLinearMDP:
    """Finite-state, finite-action, time-inhomogeneous linear MDP.

    Attributes
    ----------
    phi : ndarray of shape (n_s, n_a, d)
        Feature table.
    mu : ndarray of shape (H, n_s, d)
        ``mu[h-1, s']`` is the measure vector of next state ``s'`` at stage ``h``.
    gamma : ndarray of shape (H, d)
        Reward parameters.
    noise : NoiseSpec
    """

    phi: np.ndarray
    mu: np.ndarray
    gamma: np.ndarray
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        mu = np.array(self.mu, dtype=float)
        gamma = np.array(self.gamma, dtype=float)
        if phi.ndim != 3 or mu.ndim != 3 or gamma.ndim != 2:
            raise InvalidMDP("phi, mu, gamma must be 3-, 3- and 2-dimensional")
        n_s, _, d = phi.shape
        if mu.shape[1:] != (n_s, d) or gamma.shape != (mu.shape[0], d):
            raise InvalidMDP(
                f"inconsistent shapes phi={phi.shape} mu={mu.shape} gamma={gamma.shape}")
        if mu.shape[0] < 1:
            raise InvalidMDP("horizon must be at least 1")
        for arr in (phi, mu, gamma):
            arr.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "gamma", gamma)

    @property
    def d(self):
        return self.phi.shape[2]

    @property
    def H(self):
        return self.mu.shape[0]

    @property
    def n_s(self):
        return self.phi.shape[0]

    @property
    def n_a(self):
        return self.phi.shape[1]

    def expected_rewards(self):
        """Array of shape (H, n_s, n_a) with ``r_h(s, a)``."""
        return np.einsum("sad,hd->hsa", self.phi, self.gamma)

    def to_dict(self):
        return {
            "d": self.d, "H": self.H, "n_s": self.n_s, "n_a": self.n_a,
            "phi": self.phi.tolist(), "mu": self.mu.tolist(),
            "gamma": self.gamma.tolist(),
            "noise": {"kind": self.noise.kind, "half_width": self.noise.half_width},
        }

    @classmethod
    def from_dict(cls, doc):
        noise = doc.get("noise", {"kind": "none", "half_width": 0.0})
        mdp = cls(phi=doc["phi"], mu=doc["mu"], gamma=doc["gamma"],
                  noise=NoiseSpec(noise["kind"], float(noise["half_width"])))
        for key in ("d", "H", "n_s", "n_a"):
            if key in doc and doc[key] != getattr(mdp, key):
                raise InvalidMDP(f"field {key}={doc[key]} disagrees with array shapes")
        return mdp


def dumps_mdp(mdp):
    return json.dumps(mdp.to_dict())


def loads_mdp(text):
    return TabularLinearMDP.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class Policy:
    """Per-stage action distributions, ``probs[h-1, s, a] = pi_h(a|s)``."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 3:
            raise ValueError("policy table must have shape (H, n_s, n_a)")
        if np.any(probs < 0) or np.max(np.abs(probs.sum(axis=2) - 1.0)) > 1e-12:
            raise ValueError("policy rows must be probability distributions")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def stationary(cls, table, H):
        table = np.asarray(table, dtype=float)
        return cls(np.broadcast_to(table, (H,) + table.shape))

    @classmethod
    def deterministic(cls, actions, n_a):
        """Point-mass policy from an integer table of shape (H, n_s)."""
        actions = np.asarray(actions)
        probs = np.zeros(actions.shape + (n_a,))
        np.put_along_axis(probs, actions[..., None], 1.0, axis=-1)
        return cls(probs)


def check_distribution(xi1, n_s=None):
    xi1 = np.asarray(xi1, dtype=float)
    if xi1.ndim != 1 or np.any(xi1 < 0) or abs(xi1.sum() - 1.0) > 1e-12:
        raise ValueError("initial distribution must be a probability vector")
    if n_s is not None and xi1.shape[0] != n_s:
        raise ValueError(f"initial distribution has {xi1.shape[0]} states, expected {n_s}")
    return xi1


@dataclass(frozen=True)
class Violation:
    kind: str
    h: int
    s: int
    a: int
    value: float
    severity: str = "error"

    def __str__(self):
        return f"{self.severity}: {self.kind} at (h={self.h}, s={self.s}, a={self.a}): {self.value:.6g}"


def validate(mdp, include_warnings=False):
    """List every violated linear-MDP condition.

    Transition rows must be nonnegative and sum to one, expected rewards
    must lie in ``[0, 1]`` and ``||gamma_h|| <= 1``.  Feature norms above one
    are reported with severity ``"warning"`` only when ``include_warnings``.
    """
    out = []
    P = np.einsum("sad,htd->hsat", mdp.phi, mdp.mu)
    R = mdp.expected_rewards()
    for h, s, a in zip(*np.nonzero(np.abs(P.sum(axis=3) - 1.0) > 1e-10)):
        out.append(Violation("transition-sum", h + 1, s, a, P[h, s, a].sum()))
    for h, s, a in zip(*np.nonzero(np.min(P, axis=3) < -CLAMP_TOL)):
        out.append(Violation("transition-negative", h + 1, s, a, P[h, s, a].min()))
    for h, s, a in zip(*np.nonzero((R < -CLAMP_TOL) | (R > 1.0 + CLAMP_TOL))):
        out.append(Violation("reward-range", h + 1, s, a, R[h, s, a]))
    for h in np.nonzero(np.linalg.norm(mdp.gamma, axis=1) > 1.0 + CLAMP_TOL)[0]:
        out.append(Violation("gamma-norm", h + 1, -1, -1, np.linalg.norm(mdp.gamma[h])))
    if include_warnings:
        norms = np.linalg.norm(mdp.phi, axis=2)
        for s, a in zip(*np.nonzero(norms > 1.0 + CLAMP_TOL)):
            out.append(Violation("feature-norm", 0, s, a, norms[s, a], "warning"))
    return out


def _check_stage(mdp, h):
    if not 1 <= h <= mdp.H:
        raise InvalidStage(f"stage {h} outside 1..{mdp.H}")


def transition_kernel(mdp, h):
    """``P[s, a, s'] = <phi(s, a), mu_h(s')>`` at stage ``h`` (1-based)."""
    _check_stage(mdp, h)
    P = np.einsum("sad,td->sat", mdp.phi, mdp.mu[h - 1])
    P[(P < 0) & (P >= -CLAMP_TOL)] = 0.0
    P[(P > 1) & (P <= 1 + CLAMP_TOL)] = 1.0
    return P


def transition_kernels(mdp):
    return np.stack([transition_kernel(mdp, h) for h in range(1, mdp.H + 1)])


def policy_features(mdp, policy, h):
    """``phi_h^pi(s) = sum_a pi_h(a|s) phi(s, a)``, shape (n_s, d)."""
    _check_stage(mdp, h)
    return np.einsum("sa,sad->sd", policy.probs[h - 1], mdp.phi)


@dataclass(frozen=True, eq=False)
class ExactEval:
    """Ground-truth quantities for a target policy; stage axis indexed ``h - 1``."""

    w: np.ndarray        # (H, d)
    Q: np.ndarray        # (H, n_s, n_a)
    V: np.ndarray        # (H, n_s)
    v1: float
    var: np.ndarray      # (H, n_s, n_a), conditional variance of V_{h+1}
    phi_pi: np.ndarray   # (H, n_s, d)


def exact_eval(mdp, policy, xi1):
    """Backward Bellman recursion with expected rewards."""
    xi1 = check_distribution(xi1, mdp.n_s)
    H, n_s, n_a, d = mdp.H, mdp.n_s, mdp.n_a, mdp.d
    R = mdp.expected_rewards()
    Q = np.zeros((H, n_s, n_a))
    V = np.zeros((H, n_s))
    var = np.zeros((H, n_s, n_a))
    w = np.zeros((H, d))
    phi_pi = np.zeros((H, n_s, d))
    V_next = np.zeros(n_s)
    for h in range(H, 0, -1):
        P = transition_kernel(mdp, h)
        mean_next = P @ V_next
        Q[h - 1] = R[h - 1] + mean_next
        var[h - 1] = np.maximum(P @ V_next ** 2 - mean_next ** 2, 0.0)
        w[h - 1] = mdp.gamma[h - 1] + mdp.mu[h - 1].T @ V_next
        V[h - 1] = np.sum(policy.probs[h - 1] * Q[h - 1], axis=1)
        phi_pi[h - 1] = policy_features(mdp, policy, h)
        V_next = V[h - 1]
    return ExactEval(w=w, Q=Q, V=V, v1=float(xi1 @ V[0]), var=var, phi_pi=phi_pi)


def occupancy(mdp, policy, xi1):
    """State-action occupancy measures, shape (H, n_s, n_a)."""
    xi1 = check_distribution(xi1, mdp.n_s)
    nu = np.zeros((mdp.H, mdp.n_s, mdp.n_a))
    state = xi1
    for h in range(1, mdp.H + 1):
        nu[h - 1] = state[:, None] * policy.probs[h - 1]
        if h < mdp.H:
            state = np.einsum("sa,sat->t", nu[h - 1], transition_kernel(mdp, h))
    return nu


def feature_basis(mdp, tol=1e-10):
    """Orthonormal basis (d, r) of the span of all feature vectors."""
    F = mdp.phi.reshape(-1, mdp.d)
    _, sv, Vt = np.linalg.svd(F, full_matrices=False)
    rank = int(np.sum(sv > tol * max(sv[0], 1.0)))
    return Vt[:rank].T


@dataclass(frozen=True, eq=False)
class PopulationCovariances:
    """Population second-moment matrices and coverage constants.

    ``Sigma``, ``Lambda`` and ``v_pi`` live in R^d.  ``basis`` maps the
    coordinates used for coverage constants and inverse norms: it is the
    identity unless the covariances were restricted to the feature span.
    """

    Sigma: np.ndarray    # (H, d, d)
    Lambda: np.ndarray   # (H, d, d)
    v_pi: np.ndarray     # (H, d)
    kappa_h: np.ndarray  # (H,)
    iota_h: np.ndarray   # (H,)
    eta: np.ndarray      # (H,)
    sigma_r: float
    sigma2: np.ndarray   # (H, n_s, n_a), sigma_h(s, a)^2
    basis: np.ndarray    # (d, r)

    @property
    def H(self):
        return self.Sigma.shape[0]

    @property
    def kappa(self):
        return float(self.kappa_h.min())

    @property
    def iota(self):
        return float(self.iota_h.min())

    @property
    def dim(self):
        return self.basis.shape[1]

    def reduced(self, h):
        """(Sigma_h, Lambda_h, v_h) expressed in the coverage basis."""
        U = self.basis
        return U.T @ self.Sigma[h - 1] @ U, U.T @ self.Lambda[h - 1] @ U, U.T @ self.v_pi[h - 1]

    def norm_sigma_inv(self, h):
        S, _, v = self.reduced(h)
        return np.sqrt(inv_quad_form(S, v))

    def norm_lambda_inv(self, h):
        _, L, v = self.reduced(h)
        return np.sqrt(inv_quad_form(L, v))


def stage_params(value, H, name="eta"):
    arr = np.broadcast_to(np.asarray(value, dtype=float), (H,)).copy()
    if arr.shape != (H,):
        raise ValueError(f"{name} must be a scalar or have length {H}")
    return arr


def population_covariances(mdp, behavior, target, xi1, eta=1.0, sigma_r=1.0,
                           restrict_to_span=False):
    """Sigma_h, Lambda_h, v_h^pi and the coverage constants kappa, iota.

    ``sigma_h(s,a)^2 = max(eta_h, [V_h V_{h+1}^pi](s,a)) + sigma_r^2`` with the
    conditional variance taken under the target policy's value function.

    With ``restrict_to_span`` the coverage constants are computed on the
    span of the feature table instead of all of R^d, which is how a rank
    deficient feature map (e.g. a coordinate that is constant up to sign)
    is handled; ``v_h^pi`` always lies in that span.

    Raises
    ------
    DegenerateCoverage
        If some ``kappa_h`` is not positive.
    """
    eta = stage_params(eta, mdp.H)
    if np.any(eta <= 0):
        raise ValueError("eta must be positive")
    if not 0.0 <= sigma_r <= 1.0:
        raise ValueError("sigma_r must lie in [0, 1]")
    exact = exact_eval(mdp, target, xi1)
    nu_b = occupancy(mdp, behavior, xi1)
    nu_t = occupancy(mdp, target, xi1)
    sigma2 = np.maximum(eta[:, None, None], exact.var) + sigma_r ** 2
    Sigma = np.einsum("hsa,sai,saj->hij", nu_b, mdp.phi, mdp.phi)
    Lambda = np.einsum("hsa,sai,saj->hij", nu_b / sigma2, mdp.phi, mdp.phi)
    v_pi = np.einsum("hsa,sad->hd", nu_t, mdp.phi)
    basis = feature_basis(mdp) if restrict_to_span else np.eye(mdp.d)
    kappa_h = np.empty(mdp.H)
    iota_h = np.empty(mdp.H)
    for h in range(mdp.H):
        kappa_h[h] = sym_eig_extremes(basis.T @ Sigma[h] @ basis)[0]
        iota_h[h] = sym_eig_extremes(basis.T @ Lambda[h] @ basis)[0]
    cov = PopulationCovariances(Sigma=Sigma, Lambda=Lambda, v_pi=v_pi, kappa_h=kappa_h,
                                iota_h=iota_h, eta=eta, sigma_r=float(sigma_r),
                                sigma2=sigma2, basis=basis)
    if cov.kappa <= COVERAGE_TOL:
        bad = int(np.argmin(kappa_h)) + 1
        raise DegenerateCoverage(
            f"lambda_min(Sigma_{bad}) = {kappa_h[bad - 1]:.3e}; behavior data does not "
            "cover the feature space")
    return cov


def psd_domination_holds(cov, tol=1e-9):
    """Check ``[(H-h+1)^2 + 1] Lambda_h - Sigma_h`` is PSD at every stage."""
    H = cov.H
    return all(
        is_psd(((H - h + 1) ** 2 + 1) * cov.Lambda[h - 1] - cov.Sigma[h - 1], tol)
        for h in range(1, H + 1))


def random_linear_mdp(rng, n_s, n_a, d, H, noise=None):
    """Random valid linear MDP built from simplex features.

    Features are Dirichlet draws, each coordinate of ``mu_h`` is a
    distribution over next states and ``gamma_h`` has entries in ``[0, 1]``
    scaled to unit norm at most, so all linear-MDP conditions hold exactly.
    """
    phi = rng.dirichlet(np.ones(d), size=(n_s, n_a))
    mu = rng.dirichlet(np.ones(n_s), size=(H, d)).transpose(0, 2, 1)
    gamma = rng.uniform(0, 1, size=(H, d))
    gamma /= np.maximum(np.linalg.norm(gamma, axis=1, keepdims=True), 1.0)
    return TabularLinearMDP(phi, mu, gamma, noise or NoiseSpec())


def random_policy(rng, H, n_s, n_a, concentration=1.0):
    return Policy(rng.dirichlet(np.full(n_a, concentration), size=(H, n_s)))
