"""
The synthetic XOR instance
==========================

Two states, a hundred actions and a feature map made of an 8-bit action
code plus a one-hot of ``delta(s, a)``.  The target policy always plays
action 0, so it collects reward 1 in state 0 and then stays there.
"""

# %%
import numpy as np

from opelab import SynthConfig, build, exact_eval, population_covariances, validate

mdp, behavior, target, xi1 = build(SynthConfig(H=5, p=0.6))
print("d =", mdp.d, " n_s =", mdp.n_s, " n_a =", mdp.n_a)
print("violations:", validate(mdp))

# %%
# Ground truth.  Starting uniformly, half the mass sits in state 0 and
# collects H, the other half collects nothing at step 1 and H - 1 later.
ex = exact_eval(mdp, target, xi1)
print("v1 =", ex.v1, " V_1 =", ex.V[0])

# %%
# Every action code starts with bit 0, so the first feature coordinate is
# a fixed combination of the last two and the feature covariance is
# singular.  Coverage is measured on the feature span instead.
cov = population_covariances(mdp, behavior, target, xi1, restrict_to_span=True)
print("span dim =", cov.dim, " kappa =", round(cov.kappa, 4), " iota =", round(cov.iota, 4))
print("sigma_h^2 values:", np.unique(cov.sigma2))
