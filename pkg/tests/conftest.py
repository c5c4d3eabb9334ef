import numpy as np
import pytest

from opelab.mdp import random_linear_mdp, random_policy
from opelab.synth import SynthConfig, build


@pytest.fixture(scope="session")
def synth5():
    return build(SynthConfig(H=5, p=0.6))


def random_problem(seed, n_s=None, n_a=None, d=None, H=None):
    """A random valid linear MDP with fully supported behavior policy."""
    rng = np.random.default_rng(seed)
    n_s = n_s or int(rng.integers(1, 5))
    n_a = n_a or int(rng.integers(1, 7))
    d = d or int(rng.integers(1, 6))
    H = H or int(rng.integers(1, 5))
    mdp = random_linear_mdp(rng, n_s, n_a, d, H)
    behavior = random_policy(rng, H, n_s, n_a)
    target = random_policy(rng, H, n_s, n_a, concentration=0.3)
    xi1 = rng.dirichlet(np.ones(n_s))
    return mdp, behavior, target, xi1
