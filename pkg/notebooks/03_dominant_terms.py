"""
Dominant error terms across horizons
====================================

Exact computation, no sampling.  On the synthetic instance
``sigma_h^2 = 2`` at every stage, so ``Lambda_h = Sigma_h / 2`` and the
ratio of the two leading terms has the closed form ``(H + 1) / (2 sqrt 2)``.
"""

# %%
import numpy as np

from opelab import SynthConfig, build, dominant_terms, population_covariances
from opelab.analysis import bound_constants

for H in (1, 5, 10, 20, 40):
    mdp, behavior, target, xi1 = build(SynthConfig(H=H, p=0.6))
    cov = population_covariances(mdp, behavior, target, xi1, restrict_to_span=True)
    t = dominant_terms(cov, K=1)
    print(f"H={H:3d}  d_va={t.d_va:9.4f}  d_fqi={t.d_fqi:9.4f}  ratio={t.ratio:7.4f}  "
          f"closed form={(H + 1) / (2 * np.sqrt(2)):7.4f}")

# %%
# Bound constants with the unspecified universal constants set to one.
bc = bound_constants(cov, delta=0.05)
print("K_min =", bc.K_min, " C3 =", bc.C3, " C4 =", bc.C4)
