import itertools

import numpy as np
import pytest

from opelab.errors import DegenerateCoverage, InvalidStage
from opelab.mdp import (NoiseSpec, Policy, TabularLinearMDP, dumps_mdp, exact_eval, is_psd,
                        loads_mdp, occupancy, policy_features, population_covariances,
                        psd_domination_holds, transition_kernel, validate)
from opelab.sampler import rollout, sample_trajectories, stream
from opelab.synth import SynthConfig, build

from conftest import random_problem


def enumerate_paths(mdp, policy, xi1):
    """Brute force over every (s_1, a_1, ..., s_H, a_H) path.

    Returns the stage occupancies and, for each (h, s, a), the expected
    return-to-go computed from the path distribution conditioned on
    (s_h, a_h) = (s, a).
    """
    H, n_s, n_a = mdp.H, mdp.n_s, mdp.n_a
    P = [np.einsum("sad,td->sat", mdp.phi, mdp.mu[h]) for h in range(H)]
    R = np.einsum("sad,hd->hsa", mdp.phi, mdp.gamma)
    nu = np.zeros((H, n_s, n_a))
    ret_mass = np.zeros((H, n_s, n_a))
    for path in itertools.product(range(n_s), range(n_a), repeat=H):
        states, actions = path[0::2], path[1::2]
        prob = xi1[states[0]]
        for h in range(H):
            prob *= policy.probs[h, states[h], actions[h]]
            if h + 1 < H:
                prob *= P[h][states[h], actions[h], states[h + 1]]
        if prob == 0:
            continue
        rewards = [R[h, states[h], actions[h]] for h in range(H)]
        for h in range(H):
            nu[h, states[h], actions[h]] += prob
            ret_mass[h, states[h], actions[h]] += prob * sum(rewards[h:])
    with np.errstate(invalid="ignore", divide="ignore"):
        Q = ret_mass / nu
    return nu, Q


@pytest.mark.parametrize("seed", range(6))
def test_exact_eval_and_occupancy_match_path_enumeration(seed):
    mdp, behavior, target, xi1 = random_problem(seed, n_s=2, n_a=2, d=3, H=3)
    # full-support policy so every (h, s, a) is conditioned on a positive event
    nu_ref, Q_ref = enumerate_paths(mdp, behavior, xi1)
    ex = exact_eval(mdp, behavior, xi1)
    np.testing.assert_allclose(occupancy(mdp, behavior, xi1), nu_ref, atol=1e-12)
    mask = nu_ref > 1e-12
    np.testing.assert_allclose(ex.Q[mask], Q_ref[mask], atol=1e-10)
    v1_ref = np.sum(nu_ref[0] * Q_ref[0])
    assert ex.v1 == pytest.approx(v1_ref, abs=1e-10)


def test_validate_synthetic_is_clean(synth5):
    mdp = synth5[0]
    assert validate(mdp) == []
    warnings = validate(mdp, include_warnings=True)
    assert warnings and all(v.severity == "warning" and v.kind == "feature-norm" for v in warnings)


def test_validate_reward_range_violation(synth5):
    mdp = synth5[0]
    bad = TabularLinearMDP(mdp.phi, mdp.mu, 3 * mdp.gamma)
    kinds = [v.kind for v in validate(bad)]
    n_reward_one = int(np.sum(mdp.expected_rewards() > 0))
    assert kinds.count("reward-range") == n_reward_one
    assert kinds.count("gamma-norm") == mdp.H


def test_validate_negated_mu(synth5):
    mdp = synth5[0]
    mu = mdp.mu.copy()
    mu[0, 0] *= -1
    kinds = {v.kind for v in validate(TabularLinearMDP(mdp.phi, mu, mdp.gamma))}
    assert "transition-negative" in kinds


def test_transition_kernel_synthetic_alpha_zero(synth5):
    P = transition_kernel(synth5[0], 1)
    np.testing.assert_array_equal(P[0, 0], [1.0, 0.0])
    np.testing.assert_allclose(P.sum(axis=2), 1.0, atol=1e-12)


def test_transition_kernel_single_state():
    mdp = TabularLinearMDP(phi=[[[0.5, 0.5]]], mu=[[[1.0, 1.0]]], gamma=[[0.2, 0.2]])
    assert transition_kernel(mdp, 1)[0, 0, 0] == 1.0


@pytest.mark.parametrize("h", [0, 6, -1])
def test_transition_kernel_invalid_stage(synth5, h):
    with pytest.raises(InvalidStage):
        transition_kernel(synth5[0], h)


def test_policy_features(synth5):
    mdp, behavior, target, _ = synth5
    np.testing.assert_array_equal(policy_features(mdp, target, 1), mdp.phi[:, 0])
    p = 0.6
    expected = (1 - p) * mdp.phi[0, 0] + (p / 99) * mdp.phi[0, 1:].sum(axis=0)
    np.testing.assert_allclose(policy_features(mdp, behavior, 2)[0], expected, atol=1e-12)
    uniform = Policy.stationary(np.full((2, 100), 0.01), 5)
    np.testing.assert_allclose(policy_features(mdp, uniform, 1), mdp.phi.mean(axis=1), atol=1e-12)


def test_exact_eval_synthetic_h1():
    mdp, _, target, xi1 = build(SynthConfig(H=1, p=0.6))
    assert exact_eval(mdp, target, xi1).v1 == 0.5


def test_exact_eval_zero_rewards(synth5):
    mdp, _, target, xi1 = synth5
    zero = TabularLinearMDP(mdp.phi, mdp.mu, np.zeros_like(mdp.gamma))
    ex = exact_eval(zero, target, xi1)
    assert ex.v1 == 0.0 and np.all(ex.var == 0.0)


def test_exact_eval_matches_rollouts(synth5):
    mdp, _, target, xi1 = synth5
    n = 200_000
    _, _, R, _ = rollout(mdp, target, xi1, n, stream(11, 0))
    returns = R.sum(axis=0)
    se = returns.std() / np.sqrt(n)
    assert abs(returns.mean() - exact_eval(mdp, target, xi1).v1) <= 3 * se


@pytest.mark.parametrize("seed", range(20))
def test_exact_eval_invariants(seed):
    mdp, behavior, target, xi1 = random_problem(seed)
    for policy in (behavior, target):
        ex = exact_eval(mdp, policy, xi1)
        H = mdp.H
        assert np.max(np.abs(ex.Q - np.einsum("sad,hd->hsa", mdp.phi, ex.w))) <= 1e-10
        assert np.all(np.linalg.norm(ex.w, axis=1) <= 2 * H * np.sqrt(mdp.d) + 1e-9)
        for h in range(1, H + 1):
            assert np.all(ex.V[h - 1] >= -1e-10) and np.all(ex.V[h - 1] <= H - h + 1 + 1e-10)
            assert np.all(ex.var[h - 1] >= -1e-10) and np.all(ex.var[h - 1] <= (H - h) ** 2 + 1e-10)
        np.testing.assert_allclose(occupancy(mdp, policy, xi1).sum(axis=(1, 2)), 1.0, atol=1e-10)


def test_occupancy_h1_is_product():
    mdp, behavior, _, xi1 = random_problem(3, H=1)
    np.testing.assert_allclose(occupancy(mdp, behavior, xi1)[0],
                               xi1[:, None] * behavior.probs[0], atol=0)


def test_occupancy_absorbing_chain():
    # 3 absorbing states, one action, indicator features
    phi = np.eye(3)[:, None, :]
    mu = np.broadcast_to(np.eye(3), (4, 3, 3))
    mdp = TabularLinearMDP(phi, mu, np.zeros((4, 3)))
    pol = Policy(np.ones((4, 3, 1)))
    nu = occupancy(mdp, pol, [0.0, 1.0, 0.0])
    np.testing.assert_array_equal(nu[:, :, 0], np.tile([0.0, 1.0, 0.0], (4, 1)))


def test_occupancy_matches_trajectory_frequencies(synth5):
    mdp, behavior, _, xi1 = synth5
    n = 1_000_000
    data = sample_trajectories(mdp, behavior, xi1, n, seed=5)
    nu = occupancy(mdp, behavior, xi1)[1]
    counts = np.zeros_like(nu)
    np.add.at(counts, (data.s[1], data.a[1]), 1)
    freq = counts / n
    se = np.sqrt(nu * (1 - nu) / n)
    assert np.all(np.abs(freq - nu) <= 4 * se + 1e-12)


def test_population_covariances_rank_one_flagged():
    phi = np.zeros((2, 2, 2))
    phi[..., 0] = 1.0
    mu = np.zeros((3, 2, 2))
    mu[:, :, 0] = 0.5
    mdp = TabularLinearMDP(phi, mu, np.zeros((3, 2)))
    uniform = Policy(np.full((3, 2, 2), 0.5))
    with pytest.raises(DegenerateCoverage):
        population_covariances(mdp, uniform, uniform, [0.5, 0.5])


def test_synthetic_feature_map_is_rank_deficient(synth5):
    mdp, behavior, target, xi1 = synth5
    with pytest.raises(DegenerateCoverage):
        population_covariances(mdp, behavior, target, xi1)
    cov = population_covariances(mdp, behavior, target, xi1, restrict_to_span=True)
    assert cov.dim == mdp.d - 1 and cov.kappa > 0


def test_saturated_eta_rescales_sigma():
    mdp, behavior, target, xi1 = random_problem(7, n_s=3, n_a=4, d=3, H=4)
    H = mdp.H
    eta = [(H - h + 1) ** 2 for h in range(1, H + 1)]
    cov = population_covariances(mdp, behavior, target, xi1, eta=eta, sigma_r=1.0)
    for h in range(1, H + 1):
        c = (H - h + 1) ** 2 + 1
        np.testing.assert_allclose(cov.sigma2[h - 1], c, atol=0)
        np.testing.assert_allclose(cov.Lambda[h - 1], cov.Sigma[h - 1] / c, rtol=1e-13, atol=1e-15)


@pytest.mark.parametrize("H", [1, 5, 10])
def test_synthetic_psd_domination(H):
    mdp, behavior, target, xi1 = build(SynthConfig(H=H, p=0.6))
    cov = population_covariances(mdp, behavior, target, xi1, restrict_to_span=True)
    assert psd_domination_holds(cov)
    assert all(is_psd(L, 1e-9) for L in cov.Lambda)
    assert cov.kappa == cov.kappa_h.min() and cov.iota == cov.iota_h.min()


def test_mdp_json_round_trip(synth5):
    mdp = synth5[0]
    back = loads_mdp(dumps_mdp(mdp))
    for name in ("phi", "mu", "gamma"):
        assert np.array_equal(getattr(back, name), getattr(mdp, name))
    assert back.noise == mdp.noise

    rng = np.random.default_rng(0)
    noisy = TabularLinearMDP(rng.random((2, 3, 4)), rng.random((2, 2, 4)), rng.random((2, 4)),
                             NoiseSpec("uniform", 0.25))
    back = loads_mdp(dumps_mdp(noisy))
    assert np.array_equal(back.phi, noisy.phi) and back.noise == noisy.noise


def test_noise_stays_in_unit_interval_and_zero_mean():
    rng = np.random.default_rng(0)
    spec = NoiseSpec("uniform", 0.5)
    expected = np.repeat([0.0, 0.1, 0.5, 0.9, 1.0], 40_000)
    r = spec.realize(expected, rng)
    assert r.min() >= 0 and r.max() <= 1
    for level in (0.1, 0.5, 0.9):
        sel = r[expected == level]
        assert abs(sel.mean() - level) <= 4 * sel.std() / np.sqrt(sel.size)
