"""Variational Beta-posterior preference loss, its gradients and its theory checks.

A pair of head scores (u_w, u_l, s_w, s_l) is mapped to a Beta posterior over
the probability that the chosen response beats the rejected one:

    mu  = sigmoid(u_w - u_l)
    tau = softplus(s_w) + softplus(s_l) + 1
    q   = Beta(mu * tau, (1 - mu) * tau)

and trained with the negative ELBO

    L = -(psi(mu tau) - psi(tau)) + lambda(N) * KL(q || Beta(a0, b0)),
    lambda(N) = lambda / N.

The outcome is always taken in the chosen-preferred orientation; a reversed
preference is expressed by swapping the pair before it gets here.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize

from .beta import UNIFORM_PRIOR, BetaParams, kl_beta_arrays
from .errors import DomainError, PreconditionError
from .specfun import digamma, sigmoid, softplus, trigamma


@dataclass(frozen=True)
class HeadScores:
    u_w: float
    u_l: float
    s_w: float
    s_l: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.u_w, self.u_l, self.s_w, self.s_l)):
            raise DomainError("head scores must be finite")


@dataclass(frozen=True)
class VariationalOutput:
    """Mean/concentration of the Beta posterior together with its shapes.

    ``beta_q`` is carried separately rather than recomputed as
    ``(1 - mu) * tau`` so that it keeps full relative precision when mu is
    within rounding distance of one. The positive shapes are what guarantee
    0 < mu < 1; the stored float ``mu`` itself may round to 0.0 or 1.0 once
    |u_w - u_l| exceeds about 37.
    """

    mu: float
    tau: float
    alpha_q: float
    beta_q: float

    def __post_init__(self):
        if not (0.0 <= self.mu <= 1.0):
            raise DomainError(f"mu must lie in (0, 1), got {self.mu}")
        if not (math.isfinite(self.tau) and self.tau > 0.0):
            raise DomainError(f"tau must be finite and > 0, got {self.tau}")
        if not (self.alpha_q > 0.0 and self.beta_q > 0.0):
            raise DomainError("Beta shapes underflowed to zero")

    @classmethod
    def from_mean_concentration(cls, mu: float, tau: float) -> "VariationalOutput":
        return cls(mu, tau, mu * tau, (1.0 - mu) * tau)

    @property
    def posterior(self) -> BetaParams:
        return BetaParams(self.alpha_q, self.beta_q)


@dataclass(frozen=True)
class LossConfig:
    lambda_base: float = 0.1
    prior: BetaParams = field(default=UNIFORM_PRIOR)
    n_demos: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.lambda_base) and self.lambda_base >= 0.0):
            raise PreconditionError("lambda_base must be finite and >= 0")
        if self.n_demos < 1:
            raise PreconditionError("n_demos must be >= 1")


class GradPair(NamedTuple):
    d_mu: float
    d_tau: float


class HeadGrads(NamedTuple):
    d_u_w: float
    d_u_l: float
    d_s_w: float
    d_s_l: float


def reparameterize(h: HeadScores) -> VariationalOutput:
    delta = h.u_w - h.u_l
    mu = sigmoid(delta)
    tau = softplus(h.s_w) + softplus(h.s_l) + 1.0
    return VariationalOutput(mu, tau, mu * tau, sigmoid(-delta) * tau)


def lambda_schedule(cfg: LossConfig) -> float:
    return cfg.lambda_base / cfg.n_demos


# Array cores. Everything is written in terms of the shapes (alpha, beta) so
# that 1 - mu = beta / tau never suffers cancellation.


def loss_from_shapes(alpha, beta, lam, prior: BetaParams = UNIFORM_PRIOR):
    """Elementwise loss for arrays of posterior shapes and KL weights."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    tau = alpha + beta
    recon = digamma(tau) - digamma(alpha)
    kl = kl_beta_arrays(alpha, beta, prior.alpha, prior.beta)
    return recon + lam * kl


def grad_from_shapes(alpha, beta, lam, prior: BetaParams = UNIFORM_PRIOR):
    """Elementwise (dL/dmu, dL/dtau) for arrays of posterior shapes."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    tau = alpha + beta
    mu = alpha / tau
    one_minus_mu = beta / tau
    a0, b0 = prior.alpha, prior.beta
    tri_a = trigamma(alpha)
    tri_b = trigamma(beta)
    tri_t = trigamma(tau)
    ka = (alpha - a0) * tri_a
    kb = (beta - b0) * tri_b
    d_mu = -tau * tri_a + lam * tau * (ka - kb)
    d_tau = -mu * tri_a + tri_t + lam * (mu * ka + one_minus_mu * kb - (tau - a0 - b0) * tri_t)
    return d_mu, d_tau


def icrm_loss(v: VariationalOutput, cfg: LossConfig) -> float:
    return float(loss_from_shapes(v.alpha_q, v.beta_q, lambda_schedule(cfg), cfg.prior))


def bt_loss(delta_r: float) -> float:
    """Bradley-Terry negative log-likelihood -log sigmoid(r_w - r_l)."""
    return softplus(-delta_r)


def grad_mu_tau(v: VariationalOutput, cfg: LossConfig) -> GradPair:
    d_mu, d_tau = grad_from_shapes(v.alpha_q, v.beta_q, lambda_schedule(cfg), cfg.prior)
    return GradPair(float(d_mu), float(d_tau))


def grad_heads(h: HeadScores, cfg: LossConfig) -> HeadGrads:
    """Gradient of the loss with respect to the four head scores."""
    v = reparameterize(h)
    g = grad_mu_tau(v, cfg)
    d_delta = g.d_mu * v.mu * (v.beta_q / v.tau)
    return HeadGrads(
        d_delta,
        -d_delta,
        g.d_tau * sigmoid(h.s_w),
        g.d_tau * sigmoid(h.s_l),
    )


def _confidence_logit(tau: float) -> float:
    # s with softplus(s) = (tau - 1) / 2, so that s_w = s_l = s reproduces tau.
    return math.log(math.expm1(0.5 * (tau - 1.0)))


def edge_coefficient_check(
    tau: float,
    lam: float,
    prior: BetaParams,
    epsilons,
    channel: str = "utility",
) -> list[tuple[float, float, float]]:
    """Scaled gradient coefficients as mu approaches one at fixed tau.

    For each epsilon the head scores are set to u_w - u_l = logit(1 - eps)
    and s_w = s_l chosen to give ``tau``. The returned ``measured`` value is
    ``eps * dL/d(delta u)`` for the utility channel and ``eps * dL/dtau`` for
    the confidence channel; ``predicted`` is the limiting value
    ``lam * b0 / tau`` or ``-lam * b0 / tau**2`` respectively.
    """
    if channel not in ("utility", "confidence"):
        raise ValueError(f"unknown channel {channel!r}")
    if not tau > 1.0:
        raise PreconditionError("tau must exceed 1 to be reachable through the heads")
    if lam < 0.0:
        raise PreconditionError("lambda must be >= 0")
    eps_list = [float(e) for e in epsilons]
    if any(a <= b for a, b in zip(eps_list, eps_list[1:])):
        raise PreconditionError("epsilons must be sorted strictly descending")
    for e in eps_list:
        if not e > 0.0 or e >= 0.01:
            raise DomainError(f"epsilon {e} outside (0, 0.01)")
        if e * tau < np.finfo(float).tiny:
            raise DomainError(f"epsilon {e} too small: logit(1 - eps) overflows")

    cfg = LossConfig(lam, prior, 1)
    s = _confidence_logit(tau)
    rows = []
    for e in eps_list:
        delta = math.log1p(-e) - math.log(e)
        h = HeadScores(delta, 0.0, s, s)
        if channel == "utility":
            measured = e * grad_heads(h, cfg).d_u_w
            predicted = lam * prior.beta / tau
        else:
            measured = e * grad_mu_tau(reparameterize(h), cfg).d_tau
            predicted = -lam * prior.beta / tau**2
        rows.append((e, measured, predicted))
    return rows


@dataclass(frozen=True)
class InteriorOptimum:
    mu: float
    tau: float
    loss: float
    status: str
    band_losses: dict

    @property
    def interior(self) -> bool:
        return self.status == "interior"


MU_INTERIOR_MARGIN = 1e-3


def interior_optimum(
    cfg: LossConfig,
    grid_mu: int = 400,
    grid_tau: int = 400,
    tau_max: float = 200.0,
    tau_min: float = 1e-3,
    mu_edge: float = 1e-6,
) -> InteriorOptimum:
    """Global minimiser of the loss over (0, 1) x (0, tau_max].

    Brute-force search on a grid uniform in (logit mu, log tau), followed by
    L-BFGS-B refinement in the same coordinates. ``band_losses`` holds the
    smallest loss on each of the four edges of the grid.

    ``status`` is ``"interior"`` when mu* lies in [1e-3, 1 - 1e-3] and
    tau* <= 0.9 tau_max, ``"tau_max_too_small"`` when tau* crowds the upper
    limit, and ``"boundary"`` otherwise.
    """
    lam = lambda_schedule(cfg)
    if not lam > 0.0:
        raise PreconditionError("interior optimum needs lambda(N) > 0")
    if grid_mu < 200 or grid_tau < 200:
        raise PreconditionError("grids must have at least 200 points per axis")
    if tau_max < 100.0:
        raise PreconditionError("tau_max must be >= 100")
    prior = cfg.prior

    y_edge = math.log1p(-mu_edge) - math.log(mu_edge)
    ys = np.linspace(-y_edge, y_edge, grid_mu)
    log_taus = np.linspace(math.log(tau_min), math.log(tau_max), grid_tau)
    Y, LT = np.meshgrid(ys, log_taus, indexing="ij")
    T = np.exp(LT)
    losses = loss_from_shapes(sigmoid(Y) * T, sigmoid(-Y) * T, lam, prior)

    # Deterministic argmin: lowest loss, then smaller tau, then smaller mu.
    flat = losses.ravel()
    best = flat.min()
    ties = np.flatnonzero(flat == best)
    order = np.lexsort((Y.ravel()[ties], LT.ravel()[ties]))
    i, j = np.unravel_index(ties[order[0]], losses.shape)

    def fun(x):
        y, lt = x
        tau = math.exp(lt)
        a, b = sigmoid(y) * tau, sigmoid(-y) * tau
        val = float(loss_from_shapes(a, b, lam, prior))
        d_mu, d_tau = grad_from_shapes(a, b, lam, prior)
        jac = np.array([float(d_mu) * sigmoid(y) * sigmoid(-y), float(d_tau) * tau])
        return val, jac

    res = minimize(
        fun,
        np.array([ys[i], log_taus[j]]),
        jac=True,
        method="L-BFGS-B",
        bounds=[(ys[0], ys[-1]), (log_taus[0], log_taus[-1])],
        options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 500},
    )
    y_star, lt_star = res.x
    loss_star = float(res.fun)
    if loss_star > best:
        y_star, lt_star, loss_star = ys[i], log_taus[j], float(best)
    mu_star = sigmoid(y_star)
    tau_star = math.exp(lt_star)

    bands = {
        "mu_low": float(losses[0, :].min()),
        "mu_high": float(losses[-1, :].min()),
        "tau_low": float(losses[:, 0].min()),
        "tau_high": float(losses[:, -1].min()),
    }
    if tau_star > 0.9 * tau_max:
        status = "tau_max_too_small"
    elif MU_INTERIOR_MARGIN <= mu_star <= 1.0 - MU_INTERIOR_MARGIN:
        status = "interior"
    else:
        status = "boundary"
    return InteriorOptimum(mu_star, tau_star, loss_star, status, bands)
