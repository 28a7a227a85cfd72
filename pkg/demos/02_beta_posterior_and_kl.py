"""
The Beta posterior and its KL divergence
========================================

A preference is described by a Beta distribution over the probability z that
the chosen response beats the rejected one. Mean mu and concentration tau
give the shapes (mu tau, (1 - mu) tau). The closed-form KL divergence to the
uniform prior is checked against an independent quadrature.
"""

import numpy as np

from betapref.beta import UNIFORM_PRIOR, BetaParams, expected_log_z, kl_beta, kl_beta_quadrature

for mu, tau in [(0.5, 2.0), (0.75, 4.0), (0.9, 20.0), (0.99, 200.0)]:
    q = BetaParams.from_mean_concentration(mu, tau)
    print(
        f"mu={mu:<5} tau={tau:<6} shapes=({q.alpha:.2f}, {q.beta:.2f})  "
        f"E[log z]={expected_log_z(q): .4f}  KL={kl_beta(q, UNIFORM_PRIOR):.6f}  "
        f"quadrature={kl_beta_quadrature(q, UNIFORM_PRIOR, 256):.6f}"
    )

# Agreement on random shape pairs.
rng = np.random.default_rng(0)
errs = [
    abs(kl_beta(BetaParams(a, b), BetaParams(c, d)) - kl_beta_quadrature(BetaParams(a, b), BetaParams(c, d)))
    for a, b, c, d in rng.uniform(0.1, 50, (200, 4))
]
print(f"\nmax disagreement over 200 random pairs: {max(errs):.1e}")

# At a fixed mean, the KL first dips (Beta(1.6, 0.4) is U-shaped, Beta(6.4, 1.6) is not)
# and then grows like (1/2) log tau as the posterior sharpens.
for tau in [2, 8, 32, 128]:
    print(f"tau={tau:<4} KL(Beta(0.8 tau, 0.2 tau) || U) = {kl_beta(BetaParams(0.8 * tau, 0.2 * tau), UNIFORM_PRIOR):.3f}")
