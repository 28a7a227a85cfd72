"""
Geometry of the loss
====================

The loss is -(psi(mu tau) - psi(tau)) + lambda(N) KL(q || prior). On its own,
the first term drives mu to one. The KL term puts a barrier at the edge and
gives the loss an interior minimiser. This script shows the edge
coefficients, the minimiser and the tempering effect of a larger KL weight.
"""

from betapref.beta import UNIFORM_PRIOR
from betapref.objective import (
    LossConfig,
    VariationalOutput,
    edge_coefficient_check,
    icrm_loss,
    interior_optimum,
    lambda_schedule,
)

# Near mu = 1 the utility gradient behaves like lambda * beta0 / (eps * tau).
eps = [1e-3, 1e-4, 1e-5, 1e-6]
print("eps        eps*dL/du   predicted   rel. deviation")
for e, measured, predicted in edge_coefficient_check(3.0, 0.1, UNIFORM_PRIOR, eps):
    print(f"{e:<9.0e}  {measured:.6f}    {predicted:.6f}    {abs(measured - predicted) / predicted:.1e}")

# Without the KL weight there is no barrier: the coefficient vanishes.
print("\nlambda = 0:", [f"{m:.1e}" for _, m, _ in edge_coefficient_check(3.0, 0.0, UNIFORM_PRIOR, eps)])

# The minimiser is interior and tempers as lambda grows. For a uniform prior it
# has the closed form mu* = (1 + lam) / (1 + 2 lam), tau* = 2 + 1 / lam.
print("\nlambda   mu*      tau*     loss*    closed form mu*, tau*")
for lam in [0.01, 0.1, 0.5, 1.0]:
    res = interior_optimum(LossConfig(lam, UNIFORM_PRIOR, 1), 400, 400, 200.0)
    print(f"{lam:<7}  {res.mu:.4f}  {res.tau:7.2f}  {res.loss:.4f}   "
          f"{(1 + lam) / (1 + 2 * lam):.4f}, {2 + 1 / lam:.2f}   [{res.status}]")

# The KL weight shrinks with the number of demonstrations.
print("\nlambda(N) for base 0.1:", {n: lambda_schedule(LossConfig(0.1, n_demos=n)) for n in (1, 4, 16)})

# At the prior point (mu 1/2, tau 2) the KL vanishes and the loss is exactly 1.
prior_point = VariationalOutput.from_mean_concentration(0.5, 2.0)
print("loss at the prior point:", [icrm_loss(prior_point, LossConfig(lam)) for lam in (0.1, 1.0, 10.0)])
