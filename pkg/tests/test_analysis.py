import numpy as np
import pytest

from opelab.analysis import (bound_constants, dominant_terms, monte_carlo_v_features,
                             sample_size_threshold)
from opelab.errors import DegenerateCoverage
from opelab.mdp import (Policy, PopulationCovariances, TabularLinearMDP, occupancy,
                        population_covariances)
from opelab.synth import SynthConfig, build

from conftest import random_problem


def synth_cov(H, p=0.6, **kw):
    mdp, behavior, target, xi1 = build(SynthConfig(H=H, p=p))
    return population_covariances(mdp, behavior, target, xi1, restrict_to_span=True, **kw)


@pytest.mark.parametrize("H", [1, 5, 10, 20])
def test_synthetic_ratio_closed_form(H):
    terms = dominant_terms(synth_cov(H), 1)
    assert terms.ratio == pytest.approx((H + 1) / (2 * np.sqrt(2)), rel=1e-9)
    # sigma_h^2 = 2 on this instance
    span = H - np.arange(1, H + 1) + 1.0
    va, fqi = terms.per_stage.T
    np.testing.assert_allclose(va, fqi / span * np.sqrt(2), rtol=1e-9)


def test_h1_ratio():
    assert dominant_terms(synth_cov(1), 1).ratio == pytest.approx(1 / np.sqrt(2), rel=1e-12)


def test_quadrupling_k_halves_terms():
    cov = synth_cov(5)
    a, b = dominant_terms(cov, 100), dominant_terms(cov, 400)
    assert b.d_va == pytest.approx(a.d_va / 2, rel=1e-12)
    assert b.d_fqi == pytest.approx(a.d_fqi / 2, rel=1e-12)
    assert b.ratio == pytest.approx(a.ratio, rel=1e-12)


def test_ratio_grows_with_horizon():
    assert dominant_terms(synth_cov(40), 1).ratio > dominant_terms(synth_cov(5), 1).ratio


@pytest.mark.parametrize("seed", range(10))
def test_weighted_norm_dominated(seed):
    # sigma_h^2 <= max(1, (H - h + 1)^2) + 1, so Lambda_h dominates a rescaled Sigma_h
    mdp, behavior, target, xi1 = random_problem(seed)
    cov = population_covariances(mdp, behavior, target, xi1, restrict_to_span=True)
    terms = dominant_terms(cov, 1)
    H = mdp.H
    span = H - np.arange(1, H + 1) + 1.0
    va, fqi = terms.per_stage.T
    assert np.all(va <= fqi / span * np.sqrt(np.maximum(1.0, span ** 2) + 1) + 1e-12)


def test_bound_constants_synthetic():
    cov = synth_cov(5)
    bc = bound_constants(cov, delta=0.05)
    assert bc.C_h3[-1] == pytest.approx(0.5)
    for name in ("C_h1", "C_h2", "C_h3", "C_h4"):
        arr = getattr(bc, name)
        assert arr.shape == (5,) and np.all(np.isfinite(arr)) and np.all(arr > 0)
    assert np.all(bc.C_h4 >= 1.0)
    assert np.all(np.diff(bc.C_h1) < 0) and np.all(np.diff(bc.C_h2) < 0)
    assert np.isfinite(bc.C3) and np.isfinite(bc.C4) and np.isfinite(bc.K_min)
    assert bc.K == bc.K_min
    sum_norms = sum(cov.norm_lambda_inv(h) for h in range(1, 6))
    assert bc.error_bound(sum_norms, 4 * bc.K_min) < bc.error_bound(sum_norms, bc.K_min)


def test_c_h1_single_stage():
    bc = bound_constants(synth_cov(1), delta=0.1)
    assert bc.C_h3[0] == pytest.approx(0.5)
    assert bc.C_h1[0] == pytest.approx(1 / synth_cov(1).iota)


def test_c_h4_identity_lambda():
    eye = np.eye(3)
    cov = PopulationCovariances(
        Sigma=np.array([eye]), Lambda=np.array([0.5 * eye]), v_pi=np.array([[1.0, 0, 0]]),
        kappa_h=np.array([1.0]), iota_h=np.array([0.5]), eta=np.array([1.0]), sigma_r=1.0,
        sigma2=None, basis=eye)
    bc = bound_constants(cov, delta=0.1)
    assert bc.C_h4[0] == pytest.approx(1.0)


def test_sigma_r_zero_gives_infinite_threshold():
    bc = bound_constants(synth_cov(3, sigma_r=0.0), delta=0.1)
    assert bc.C3 == np.inf and bc.K_min == np.inf


@pytest.mark.parametrize("C3, d", [(1.0, 2), (50.0, 9), (1e4, 3)])
def test_sample_size_threshold_is_fixed_point(C3, d):
    H, kappa, delta = 5, 0.3, 0.05
    K = sample_size_threshold(C3, d, H, kappa, delta)

    def rhs(k):
        return C3 * d ** 2 * np.log(d * H ** 2 * k / (kappa * delta)) ** 2

    assert K >= rhs(K) and K - 1 < rhs(K - 1)


def test_bound_constants_reject():
    cov = synth_cov(2)
    for delta in (0.0, 1.0):
        with pytest.raises(ValueError):
            bound_constants(cov, delta)


def test_degenerate_coverage_rejected():
    mdp, behavior, target, xi1 = build(SynthConfig(H=2, p=0.6))
    with pytest.raises(DegenerateCoverage):
        population_covariances(mdp, behavior, target, xi1)


def test_monte_carlo_v_features():
    mdp, _, target, xi1 = random_problem(4, n_s=3, n_a=3, d=3, H=3)
    exact = np.einsum("hsa,sad->hd", occupancy(mdp, target, xi1), mdp.phi)
    mean, se = monte_carlo_v_features(mdp, target, xi1, 100_000, seed=1, return_stderr=True,
                                      chunk=30_000)
    assert np.all(np.abs(mean - exact) <= 4 * se + 1e-12)
    again = monte_carlo_v_features(mdp, target, xi1, 100_000, seed=1, chunk=30_000)
    assert np.array_equal(mean, again)


def test_population_v_features_permutation_invariant():
    mdp, behavior, target, xi1 = random_problem(6, n_s=3, n_a=3, d=3, H=2)
    cov = population_covariances(mdp, behavior, target, xi1)
    perm = np.array([2, 0, 1])
    mdp_p = TabularLinearMDP(mdp.phi[perm], mdp.mu[:, perm], mdp.gamma)
    cov_p = population_covariances(mdp_p, Policy(behavior.probs[:, perm]),
                                   Policy(target.probs[:, perm]), xi1[perm])
    np.testing.assert_allclose(cov_p.v_pi, cov.v_pi, atol=1e-12)
    np.testing.assert_allclose(cov_p.Sigma, cov.Sigma, atol=1e-12)
