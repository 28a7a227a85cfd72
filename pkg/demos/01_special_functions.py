"""
Digamma and friends
===================

The loss is built from the digamma function and its derivatives. The package
evaluates them in-house with the recurrence plus an asymptotic series, so
this script checks a few classic identities against their closed forms.
"""

import math

import numpy as np

from betapref.specfun import digamma, log_gamma, sigmoid, softplus, tetragamma, trigamma

ZETA3 = 1.2020569031595942

# Known values: psi(1) = -gamma, psi1(1) = pi^2/6, psi2(1) = -2 zeta(3).
print("digamma(1)    ", digamma(1.0), " expected", -0.5772156649015329)
print("trigamma(1)   ", trigamma(1.0), " expected", math.pi**2 / 6)
print("tetragamma(1) ", tetragamma(1.0), " expected", -2 * ZETA3)
print("log_gamma(5)  ", log_gamma(5.0), " expected", math.log(24))

# The recurrences hold across many orders of magnitude.
x = np.exp(np.linspace(math.log(1e-3), math.log(1e3), 7))
print("\n   x          psi(x+1)-psi(x)-1/x")
for xi, r in zip(x, digamma(x + 1) - digamma(x) - 1 / x):
    print(f"{xi:10.4g}   {r: .2e}")

# The trigamma derivative matches a central difference.
h = 1e-4
fd = (trigamma(5 + h) - trigamma(5 - h)) / (2 * h)
print("\ntetragamma(5)", tetragamma(5.0), " central difference of trigamma", fd)

# sigmoid / softplus stay finite at the extremes.
print("\nsoftplus(-700), softplus(700):", softplus(-700.0), softplus(700.0))
print("sigmoid(-40) + sigmoid(40) =", sigmoid(-40.0) + sigmoid(40.0))
