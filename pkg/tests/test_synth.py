import numpy as np
import pytest

from opelab.errors import OutOfRange
from opelab.mdp import exact_eval, transition_kernel, validate
from opelab.synth import SynthConfig, build, delta, encode_action, parse_alpha


@pytest.mark.parametrize("a, expected", [
    (0, [-1] * 8),
    (5, [-1, -1, -1, -1, -1, 1, -1, 1]),
    (99, [-1, 1, 1, -1, -1, -1, 1, 1]),
])
def test_encode_action(a, expected):
    np.testing.assert_array_equal(encode_action(a), expected)


@pytest.mark.parametrize("a", [-1, 100, 255])
def test_encode_action_rejects(a):
    with pytest.raises(OutOfRange):
        encode_action(a)


def test_delta_is_symmetric():
    assert delta(0, 0) == delta(1, 1) == 1.0
    assert delta(0, 7) == delta(1, 0) == 0.0
    for a in range(1, 100):
        assert delta(0, a) == 0.0 and delta(1, a) == 1.0


@pytest.mark.parametrize("H", [1, 2, 7])
def test_rewards_are_delta(H):
    mdp, *_ = build(SynthConfig(H=H, p=0.3))
    R = mdp.expected_rewards()
    expected = np.array([[delta(s, a) for a in range(100)] for s in range(2)])
    for h in range(H):
        np.testing.assert_allclose(R[h], expected, atol=1e-15)


@pytest.mark.parametrize("bits", ["00", "01", "10", "11"])
def test_transitions_follow_alpha(bits):
    mdp, *_ = build(SynthConfig(H=2, p=0.5, alpha=parse_alpha(bits, 2)))
    for h, b in enumerate(bits, start=1):
        P = transition_kernel(mdp, h)
        for s in range(2):
            for a in range(100):
                nxt = int(delta(s, a)) ^ int(b) ^ 1
                assert P[s, a, nxt] == 1.0


def test_target_stays_in_state_zero_from_state_zero():
    mdp, _, target, _ = build(SynthConfig(H=2, p=0.6))
    ex = exact_eval(mdp, target, [1.0, 0.0])
    assert ex.v1 == 2.0


@pytest.mark.parametrize("p", [0.1, 0.6, 0.99])
def test_policies_are_distributions(p):
    mdp, behavior, target, xi1 = build(SynthConfig(H=3, p=p))
    np.testing.assert_allclose(behavior.probs.sum(axis=2), 1.0, atol=1e-12)
    assert behavior.probs[0, 0, 0] == pytest.approx(1 - p)
    assert np.all(target.probs[..., 0] == 1.0)
    np.testing.assert_array_equal(xi1, [0.5, 0.5])
    assert validate(mdp) == []


def test_encoding_scale_leaves_dynamics_unchanged():
    base, *_ = build(SynthConfig(H=3, p=0.6))
    scaled, *_ = build(SynthConfig(H=3, p=0.6, encoding_scale=0.25))
    for h in range(1, 4):
        np.testing.assert_array_equal(transition_kernel(base, h), transition_kernel(scaled, h))
    np.testing.assert_array_equal(base.expected_rewards(), scaled.expected_rewards())
    assert not np.array_equal(base.phi, scaled.phi)


@pytest.mark.parametrize("kw", [dict(H=0, p=0.5), dict(H=2, p=0.0), dict(H=2, p=1.0),
                                dict(H=2, p=0.5, alpha=(0, 2)), dict(H=2, p=0.5, alpha=(0,)),
                                dict(H=2, p=0.5, encoding_scale=0.0)])
def test_config_rejects(kw):
    with pytest.raises(ValueError):
        SynthConfig(**kw)


def test_parse_alpha():
    assert parse_alpha("0110", 4) == (0, 1, 1, 0)
    assert parse_alpha(None, 3) == (0, 0, 0)
    with pytest.raises(ValueError):
        parse_alpha("012", 3)
