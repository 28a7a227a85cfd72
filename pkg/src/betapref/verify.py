"""Invariant suite run by ``betapref verify``.

Each check is a function ``check(rng) -> CheckResult`` registered under a
stable name. Checks resolve the functions they test through their modules at
call time, so a patched implementation (for instance a KL with its sign
flipped) is caught by the check that owns it.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import beta, model, objective, specfun
from .beta import BetaParams
from .synth import DemonstrationSet, PreferenceTriple


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    worst: dict = field(default_factory=dict)
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "detail": self.detail,
            "worst": self.worst,
            "seconds": self.seconds,
        }


def central_difference(f, x: float, h: float) -> float:
    """Fourth-order central difference (-f(x+2h) + 8f(x+h) - 8f(x-h) + f(x-2h)) / 12h."""
    return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12.0 * h)


def within(measured: float, reference: float, rel: float, floor: float) -> bool:
    return abs(measured - reference) <= max(rel * abs(reference), floor)


def _rel_err(measured, reference, floor):
    return abs(measured - reference) / max(abs(reference), floor)


# Individual checks.


def check_specfun_recurrence(rng) -> CheckResult:
    xs = np.exp(rng.uniform(math.log(1e-3), math.log(1e3), 400))
    checks = {
        "log_gamma": (lambda x: specfun.log_gamma(x + 1) - specfun.log_gamma(x), np.log(xs)),
        "digamma": (lambda x: specfun.digamma(x + 1) - specfun.digamma(x), 1.0 / xs),
        "trigamma": (lambda x: specfun.trigamma(x) - specfun.trigamma(x + 1), 1.0 / xs**2),
        "tetragamma": (lambda x: specfun.tetragamma(x + 1) - specfun.tetragamma(x), 2.0 / xs**3),
    }
    worst = {}
    ok = True
    for name, (lhs, rhs) in checks.items():
        got = lhs(xs)
        err = np.abs(got - rhs) / np.maximum(np.abs(rhs), 1.0)
        i = int(np.argmax(err))
        worst[name] = {"x": float(xs[i]), "err": float(err[i])}
        ok &= bool(err[i] <= 1e-9)
    anchors = [
        (specfun.digamma(1.0), -specfun.EULER_GAMMA),
        (specfun.trigamma(1.0), math.pi**2 / 6.0),
        (specfun.tetragamma(1.0), -2.0 * 1.2020569031595942),
        (specfun.log_gamma(0.5), 0.5 * math.log(math.pi)),
    ]
    anchor_err = max(abs(a - b) for a, b in anchors)
    worst["anchors"] = {"err": anchor_err}
    ok &= anchor_err <= 1e-12
    return CheckResult("specfun_recurrence", ok, "shift recurrences and known values", worst)


def check_kl_agreement(rng, pairs: int = 500, tol: float = 1e-7) -> CheckResult:
    shapes = rng.uniform(0.1, 50.0, size=(pairs, 4))
    worst = {"err": -1.0}
    for a, b, a0, b0 in shapes:
        q, p = BetaParams(a, b), BetaParams(a0, b0)
        closed = beta.kl_beta(q, p)
        quad = beta.kl_beta_quadrature(q, p)
        err = abs(closed - quad) if math.isfinite(closed) else math.inf
        if not err <= worst["err"]:
            worst = {"err": err, "q": [a, b], "p": [a0, b0], "closed": closed, "quadrature": quad}
    ok = worst["err"] <= tol
    return CheckResult("kl_agreement", ok, f"closed-form KL vs quadrature on {pairs} pairs, tol {tol}", worst)


def _random_loss_point(rng):
    mu = rng.uniform(0.05, 0.95)
    tau = math.exp(rng.uniform(math.log(1.5), math.log(50.0)))
    lam = math.exp(rng.uniform(math.log(0.01), math.log(1.0)))
    prior = BetaParams(rng.uniform(0.5, 5.0), rng.uniform(0.5, 5.0))
    return mu, tau, lam, prior


def check_mu_tau_gradients(rng, points: int = 200, rel: float = 1e-5, floor: float = 1e-8) -> CheckResult:
    worst = {"rel_err": -1.0}
    ok = True
    for _ in range(points):
        mu, tau, lam, prior = _random_loss_point(rng)

        def loss(m, t):
            return float(objective.loss_from_shapes(m * t, (1.0 - m) * t, lam, prior))

        d_mu, d_tau = objective.grad_from_shapes(mu * tau, (1.0 - mu) * tau, lam, prior)
        fd_mu = central_difference(lambda m: loss(m, tau), mu, 1e-3 * min(mu, 1 - mu))
        fd_tau = central_difference(lambda t: loss(mu, t), tau, 1e-3 * tau)
        for name, got, ref in (("d_mu", d_mu, fd_mu), ("d_tau", d_tau, fd_tau)):
            ok &= within(float(got), ref, rel, floor)
            e = _rel_err(float(got), ref, floor)
            if e > worst["rel_err"]:
                worst = {"rel_err": e, "which": name, "mu": mu, "tau": tau, "lambda": lam,
                         "prior": [prior.alpha, prior.beta], "analytic": float(got), "fd": ref}
    return CheckResult("mu_tau_gradients", ok, f"analytic dL/dmu, dL/dtau vs finite differences, rel {rel}", worst)


def check_head_gradients(rng, points: int = 200, rel: float = 1e-5, floor: float = 1e-8) -> CheckResult:
    worst = {"rel_err": -1.0}
    ok = True
    for _ in range(points):
        heads = rng.normal(0.0, 1.5, 4)
        cfg = objective.LossConfig(math.exp(rng.uniform(math.log(0.01), 0.0)), BetaParams(1.0, 1.0), 1)
        grads = objective.grad_heads(objective.HeadScores(*heads), cfg)
        for k in range(4):
            def loss(v, k=k):
                h = heads.copy()
                h[k] = v
                return objective.icrm_loss(objective.reparameterize(objective.HeadScores(*h)), cfg)

            fd = central_difference(loss, heads[k], 1e-3)
            ok &= within(grads[k], fd, rel, floor)
            e = _rel_err(grads[k], fd, floor)
            if e > worst["rel_err"]:
                worst = {"rel_err": e, "component": objective.HeadGrads._fields[k],
                         "heads": heads.tolist(), "analytic": grads[k], "fd": fd}
    return CheckResult("head_gradients", ok, f"grad_heads vs finite differences, rel {rel}", worst)


def random_instance(rng, dim: int, n: int):
    """A random (params, context, pair, cfg) instance for gradient checks."""
    params = model.ModelParams(
        rng.normal(0.0, 0.3, (dim, dim)), rng.normal(0.0, 0.3, dim), rng.normal(0.0, 0.5, 3)
    )
    triples = [PreferenceTriple(*rng.standard_normal((3, dim)), int(rng.integers(0, 2))) for _ in range(n)]
    context = DemonstrationSet(triples, 1.0, float(rng.uniform(0.5, 1.0)))
    pair = PreferenceTriple(*rng.standard_normal((3, dim)), 1)
    cfg = objective.LossConfig(float(rng.uniform(0.05, 1.0)), BetaParams(1.0, 1.0), n)
    return params, context, pair, cfg


def check_model_gradients(rng, instances: int = 50, rel: float = 1e-4, floor: float = 1e-7) -> CheckResult:
    worst = {"rel_err": -1.0}
    ok = True
    for _ in range(instances):
        params, context, pair, cfg = random_instance(rng, 4, int(rng.integers(1, 6)))
        grad = model.backward(params, context, pair, cfg)
        for name, arr, g_arr in zip(("w_agg", "b_agg", "w_conf"), params.arrays(), grad.arrays()):
            for idx in np.ndindex(arr.shape):
                x0 = arr[idx]

                def loss(v, arr=arr, idx=idx):
                    arr[idx] = v
                    return model.instance_loss(params, context, pair, cfg)

                fd = central_difference(loss, x0, 1e-4)
                arr[idx] = x0
                got = float(g_arr[idx])
                ok &= within(got, fd, rel, floor)
                e = _rel_err(got, fd, floor)
                if e > worst["rel_err"]:
                    worst = {"rel_err": e, "param": name, "index": list(idx), "analytic": got, "fd": fd}
    return CheckResult("model_gradients", ok, f"model backward vs finite differences, rel {rel}", worst)


def check_edge_coefficients(rng) -> CheckResult:
    eps = [1e-3, 1e-4, 1e-5, 1e-6]
    worst = {}
    ok = True
    for channel in ("utility", "confidence"):
        rows = objective.edge_coefficient_check(3.0, 0.1, BetaParams(1.0, 1.0), eps, channel)
        devs = [abs(m - p) / abs(p) for _, m, p in rows]
        monotone = all(a > b for a, b in zip(devs, devs[1:]))
        ok &= monotone and devs[-1] <= 1e-3
        worst[channel] = {"deviations": devs, "monotone": monotone}
    return CheckResult("edge_coefficients", ok, "scaled gradient coefficients approach their limits as mu -> 1", worst)


def check_interior_optimum(rng) -> CheckResult:
    worst = {}
    ok = True
    for lam in (0.01, 0.1, 0.5, 1.0):
        opt = objective.interior_optimum(objective.LossConfig(lam, BetaParams(1.0, 1.0), 1))
        bands_above = all(v > opt.loss for v in opt.band_losses.values())
        good = opt.interior and opt.tau <= 180.0 and bands_above
        # Closed form for a uniform prior.
        closed = ((1 + lam) / (1 + 2 * lam), 2 + 1 / lam, math.log1p(1 / lam))
        close = abs(opt.mu - closed[0]) < 1e-4 and abs(opt.tau - closed[1]) < 1e-3 * closed[1]
        ok &= good and close
        worst[str(lam)] = {"mu": opt.mu, "tau": opt.tau, "loss": opt.loss, "status": opt.status,
                           "bands_above": bands_above, "closed_form": list(closed)}
    return CheckResult("interior_optimum", ok, "loss has a strictly interior global minimiser", worst)


CHECKS = {
    "specfun_recurrence": check_specfun_recurrence,
    "kl_agreement": check_kl_agreement,
    "mu_tau_gradients": check_mu_tau_gradients,
    "head_gradients": check_head_gradients,
    "model_gradients": check_model_gradients,
    "edge_coefficients": check_edge_coefficients,
    "interior_optimum": check_interior_optimum,
}


def run_checks(seed: int, names=None) -> list[CheckResult]:
    """Run the named checks (default: all) with a seeded RNG per check.

    An exception inside a check is reported as a failure of that check.
    """
    results = []
    for name in names or CHECKS:
        rng = np.random.default_rng([seed, list(CHECKS).index(name)])
        start = time.perf_counter()
        try:
            res = CHECKS[name](rng)
        except Exception as exc:  # reported, not raised: the suite must name the failing check
            res = CheckResult(name, False, f"raised {type(exc).__name__}: {exc}")
        res.seconds = time.perf_counter() - start
        results.append(res)
    return results
