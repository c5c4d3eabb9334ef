"""The two-state, hundred-action XOR instance used in the experiments."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidMDP, OutOfRange
from .mdp import NoiseSpec, Policy, TabularLinearMDP, validate

N_STATES = 2
N_ACTIONS = 100
N_BITS = 8
D = N_BITS + 2


@dataclass(frozen=True)
class SynthConfig:
    H: int
    p: float
    alpha: tuple = None
    encoding_scale: float = 1.0
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        if self.H < 1:
            raise ValueError("H must be at least 1")
        alpha = (0,) * self.H if self.alpha is None else tuple(int(b) for b in self.alpha)
        if len(alpha) != self.H or any(b not in (0, 1) for b in alpha):
            raise ValueError("alpha must be a sequence of H bits")
        object.__setattr__(self, "alpha", alpha)
        if not 0.0 < self.p < 1.0:
            raise ValueError("p must lie in (0, 1)")
        if not self.encoding_scale > 0:
            raise ValueError("encoding_scale must be positive")


def parse_alpha(bits, H):
    """``"0110"`` -> ``(0, 1, 1, 0)``; ``None`` gives all zeros."""
    if bits is None:
        return (0,) * H
    if len(bits) != H or set(bits) - {"0", "1"}:
        raise ValueError(f"alpha must be a bit string of length {H}")
    return tuple(int(c) for c in bits)


def encode_action(a):
    """8-bit binary code of ``a`` (most significant bit first) with 0 -> -1, 1 -> +1."""
    if not 0 <= a < N_ACTIONS:
        raise OutOfRange(f"action {a} outside 0..{N_ACTIONS - 1}")
    bits = (a >> np.arange(N_BITS - 1, -1, -1)) & 1
    return 2.0 * bits - 1.0


def delta(s, a):
    return 1.0 if (s == 0) == (a == 0) else 0.0


def build(cfg):
    """Return ``(mdp, behavior, target, xi1)`` for the given configuration.

    The behavior policy plays ``a = 0`` with probability ``1 - p`` and every
    other action with probability ``p / 99``; the target always plays 0.
    """
    phi = np.zeros((N_STATES, N_ACTIONS, D))
    for a in range(N_ACTIONS):
        code = cfg.encoding_scale * encode_action(a)
        for s in range(N_STATES):
            dl = delta(s, a)
            phi[s, a] = np.concatenate([code, [dl, 1.0 - dl]])
    mu = np.zeros((cfg.H, N_STATES, D))
    for h, bit in enumerate(cfg.alpha):
        for s in range(N_STATES):
            mu[h, s, -2] = (1 - s) ^ bit
            mu[h, s, -1] = s ^ bit
    gamma = np.zeros((cfg.H, D))
    gamma[:, -2] = 1.0
    mdp = TabularLinearMDP(phi, mu, gamma, cfg.noise)
    errors = validate(mdp)
    if errors:
        raise InvalidMDP("; ".join(map(str, errors[:5])))

    row = np.full(N_ACTIONS, cfg.p / (N_ACTIONS - 1))
    row[0] = 1.0 - cfg.p
    behavior = Policy.stationary(np.tile(row, (N_STATES, 1)), cfg.H)
    target = Policy.deterministic(np.zeros((cfg.H, N_STATES), dtype=int), N_ACTIONS)
    xi1 = np.full(N_STATES, 1.0 / N_STATES)
    return mdp, behavior, target, xi1
