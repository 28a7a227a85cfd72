"""Measurement procedures: accuracy, tau-vs-N calibration, Pareto sweeps,
hypervolume, correlation statistics and a toy bandit for reward alignment.

Every held-out triple is scored under its own freshly drawn context, so the
evaluated comparison never appears among its own demonstrations.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, PreconditionError, StructuralError
from .model import Batch, ModelParams, confidence_features, forward_batch, score_single
from .specfun import sigmoid, softplus
from .synth import (
    DEFAULT_MARGIN_SCALE,
    DemonstrationSet,
    ObjectiveVector,
    draw_context_summaries,
    draw_pairs,
    mixed_slot_weights,
)

DEFAULT_MIX_RATIOS = (0.0, 0.25, 0.5, 0.75, 1.0)
BANDIT_ACCURACIES = (0.2, 0.4, 0.6, 0.8)


@dataclass(frozen=True)
class ParetoPoint:
    respond_acc: float
    refuse_acc: float
    mix_ratio: float
    n_demos: int

    def __post_init__(self):
        for name in ("respond_acc", "refuse_acc", "mix_ratio"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise PreconditionError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class CorrelationReport:
    pearson_r: float
    r2_ols: float
    r2_iso: float

    def as_dict(self) -> dict:
        return {"pearson_r": self.pearson_r, "r2_ols": self.r2_ols, "r2_iso": self.r2_iso}


# Accuracy.


def _mu(params: ModelParams, batch: Batch) -> np.ndarray:
    delta_u, _, _ = forward_batch(params, batch)
    return sigmoid(delta_u)


def accuracy(params: ModelParams, context_source, eval_set) -> float:
    """Fraction of held-out triples ranked correctly (mu > 0.5) under context.

    ``context_source`` is one DemonstrationSet shared by every triple, or a
    callable ``i -> DemonstrationSet`` giving triple ``i`` its own context.
    Triples are scored in their preferred orientation; mu == 0.5 counts as
    incorrect.
    """
    eval_set = list(eval_set)
    if not eval_set:
        raise PreconditionError("accuracy needs a nonempty evaluation set")
    if isinstance(context_source, DemonstrationSet):
        contexts = [context_source] * len(eval_set)
    else:
        contexts = [context_source(i) for i in range(len(eval_set))]
    pairs = [t.oriented() for t in eval_set]
    if pairs[0].phi_chosen.shape[0] != params.dim:
        raise StructuralError("evaluation features do not match the model dimension")
    return float(np.mean(_mu(params, Batch.from_examples(contexts, pairs)) > 0.5))


def summary_batch(rng, slot_weights, target: ObjectiveVector, margin_scale: float, count: int) -> Batch:
    """``count`` held-out pairs labelled by ``target``, each with a fresh context."""
    ctx_mean, agreement = draw_context_summaries(rng, slot_weights, margin_scale, count)
    n = np.asarray(slot_weights).shape[0]
    _, p_w, p_l, _ = draw_pairs(rng, target.weights, margin_scale, (count,), target.dim)
    return Batch(ctx_mean, confidence_features(agreement, np.full(count, n)), p_w, p_l)


def context_accuracy(
    params: ModelParams,
    context_obj: ObjectiveVector,
    label_obj: ObjectiveVector,
    n: int,
    count: int = 2000,
    seed: int = 0,
    margin_scale: float = DEFAULT_MARGIN_SCALE,
) -> float:
    """Accuracy on ``label_obj`` labels with N-demonstration contexts from ``context_obj``."""
    if count < 1 or n < 1:
        raise PreconditionError("count and n must be >= 1")
    if context_obj.dim != params.dim or label_obj.dim != params.dim:
        raise StructuralError("objective dimension does not match the model")
    rng = np.random.default_rng(seed)
    slots = np.broadcast_to(context_obj.weights, (n, params.dim))
    batch = summary_batch(rng, slots, label_obj, margin_scale, count)
    return float(np.mean(_mu(params, batch) > 0.5))


def static_accuracy(params: ModelParams, label_obj: ObjectiveVector, count: int = 2000, seed: int = 0,
                    margin_scale: float = DEFAULT_MARGIN_SCALE) -> float:
    """Accuracy of the context-free score ``b . phi`` (the Bradley-Terry baseline)."""
    rng = np.random.default_rng(seed)
    _, p_w, p_l, _ = draw_pairs(rng, label_obj.weights, margin_scale, (count,), label_obj.dim)
    return float(np.mean((p_w - p_l) @ params.b_agg > 0.0))


# Calibration.


def calibration_curve(
    params: ModelParams,
    objective: ObjectiveVector,
    n_values,
    seeds,
    count: int = 256,
    margin_scale: float = DEFAULT_MARGIN_SCALE,
) -> list[tuple[int, float, float]]:
    """(N, mean tau, std tau) with tau averaged over ``count`` contexts per seed.

    The std is the population std over seeds.
    """
    n_values = list(n_values)
    seeds = list(seeds)
    if not n_values:
        raise PreconditionError("n_values must be nonempty")
    if not seeds:
        raise PreconditionError("seeds must be nonempty")
    rows = []
    for n in n_values:
        per_seed = []
        for seed in seeds:
            rng = np.random.default_rng([seed, n])
            slots = np.broadcast_to(objective.weights, (n, objective.dim))
            _, agreement = draw_context_summaries(rng, slots, margin_scale, count)
            s = confidence_features(agreement, np.full(count, n)) @ params.w_conf
            per_seed.append(float(np.mean(2.0 * softplus(s) + 1.0)))
        rows.append((int(n), float(np.mean(per_seed)), float(np.std(per_seed))))
    return rows


# Pareto sweep and hypervolume.


def pareto_sweep(
    params: ModelParams,
    obj_a: ObjectiveVector,
    obj_b: ObjectiveVector,
    n: int,
    mix_ratios=DEFAULT_MIX_RATIOS,
    seeds=(0,),
    count: int = 1000,
    margin_scale: float = DEFAULT_MARGIN_SCALE,
) -> list[ParetoPoint]:
    """One seed-averaged (respond_acc, refuse_acc) point per mix ratio.

    respond_acc is accuracy on ``obj_a`` labels and refuse_acc on ``obj_b``
    labels, both under contexts mixed at the given ratio.
    """
    ratios = [float(r) for r in mix_ratios]
    if not ratios or any(not 0.0 <= r <= 1.0 for r in ratios):
        raise PreconditionError("mix ratios must be a nonempty list in [0, 1]")
    points = []
    for r in ratios:
        slots = mixed_slot_weights(obj_a, obj_b, n, r)
        respond, refuse = [], []
        for seed in seeds:
            rng = np.random.default_rng([seed, n, int(round(r * 1000))])
            respond.append(np.mean(_mu(params, summary_batch(rng, slots, obj_a, margin_scale, count)) > 0.5))
            refuse.append(np.mean(_mu(params, summary_batch(rng, slots, obj_b, margin_scale, count)) > 0.5))
        points.append(ParetoPoint(float(np.mean(respond)), float(np.mean(refuse)), r, int(n)))
    return points


def _xy(p):
    if isinstance(p, ParetoPoint):
        return p.respond_acc, p.refuse_acc
    return float(p[0]), float(p[1])


def hypervolume(points, ref=(0.0, 0.0)) -> float:
    """Area dominated by ``points`` (maximisation) relative to ``ref``.

    Points may be ParetoPoints or (x, y) pairs.
    """
    rx, ry = float(ref[0]), float(ref[1])
    xy = [_xy(p) for p in points]
    for x, y in xy:
        if x < rx or y < ry:
            raise DomainError(f"point ({x}, {y}) lies below the reference ({rx}, {ry})")
    # Sweep by descending x; a point adds area only if it raises the best y.
    area = 0.0
    best_y = ry
    for x, y in sorted(xy, key=lambda p: (-p[0], -p[1])):
        if y > best_y:
            area += (x - rx) * (y - best_y)
            best_y = y
    return area


# Correlation statistics.


def _paired(xs, ys):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise PreconditionError("xs and ys must be 1-d arrays of equal length")
    if xs.size < 3:
        raise PreconditionError("need at least 3 points")
    if np.all(xs == xs[0]):
        raise DomainError("xs has zero variance")
    if np.all(ys == ys[0]):
        raise DomainError("ys has zero variance")
    return xs, ys


def pearson(xs, ys) -> float:
    xs, ys = _paired(xs, ys)
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    r = float(np.sum(dx * dy) / math.sqrt(np.sum(dx * dx) * np.sum(dy * dy)))
    return min(1.0, max(-1.0, r))


def r2_ols(xs, ys) -> float:
    """Coefficient of determination of the least-squares line."""
    xs, ys = _paired(xs, ys)
    slope, intercept = np.polyfit(xs, ys, 1)
    ssr = np.sum((ys - (slope * xs + intercept)) ** 2)
    sst = np.sum((ys - ys.mean()) ** 2)
    return float(1.0 - ssr / sst)


def pava(ys, weights=None) -> np.ndarray:
    """Weighted least-squares nondecreasing fit (pool adjacent violators)."""
    ys = np.asarray(ys, dtype=float)
    w = np.ones_like(ys) if weights is None else np.asarray(weights, dtype=float)
    means, wts, sizes = [], [], []
    for y, wi in zip(ys, w):
        means.append(y)
        wts.append(wi)
        sizes.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m2, w2, n2 = means.pop(), wts.pop(), sizes.pop()
            total = wts[-1] + w2
            means[-1] = (means[-1] * wts[-1] + m2 * w2) / total
            wts[-1] = total
            sizes[-1] += n2
    return np.repeat(means, sizes)


def isotonic_fit(xs, ys) -> np.ndarray:
    """Nondecreasing fit of ys ordered by xs; tied xs share one pooled value."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    ux, inverse, counts = np.unique(xs, return_inverse=True, return_counts=True)
    group_mean = np.bincount(inverse, weights=ys) / counts
    fit = pava(group_mean, counts)
    return fit[inverse]


def r2_iso(xs, ys) -> float:
    xs, ys = _paired(xs, ys)
    ssr = np.sum((ys - isotonic_fit(xs, ys)) ** 2)
    sst = np.sum((ys - ys.mean()) ** 2)
    return float(1.0 - ssr / sst)


def correlation_report(xs, ys) -> CorrelationReport:
    return CorrelationReport(pearson(xs, ys), r2_ols(xs, ys), r2_iso(xs, ys))


# Bandit harness.


@dataclass(frozen=True)
class BanditArm:
    """A candidate generator: its responses are correct with probability ``accuracy``.

    A correct response has features ``z + shift * w``, an incorrect one
    ``z - shift * w``, with ``z`` standard normal and ``w`` the task objective.
    """

    accuracy: float
    weights: np.ndarray
    shift: float = 2.0

    def sample(self, rng, count: int):
        """``count`` tasks as (features, gold_correct) arrays."""
        correct = rng.random(count) < self.accuracy
        z = rng.standard_normal((count, self.weights.shape[0]))
        sign = np.where(correct, 1.0, -1.0)[:, None]
        return z + sign * self.shift * self.weights, correct


def make_bandit_arms(objective: ObjectiveVector, accuracies=BANDIT_ACCURACIES, shift: float = 2.0) -> list:
    return [BanditArm(float(a), objective.weights, shift) for a in accuracies]


@dataclass
class BanditResult:
    report: CorrelationReport | None
    best_arm_prob: float
    initial_best_arm_prob: float
    batch_reward: np.ndarray = field(repr=False)
    batch_gold: np.ndarray = field(repr=False)
    probs: np.ndarray = field(repr=False)


def bandit_alignment(
    params: ModelParams | None,
    context: DemonstrationSet | None,
    arms,
    steps: int = 200,
    batch_size: int = 256,
    learning_rate: float = 0.1,
    seed: int = 0,
    reward_fn=None,
) -> BanditResult:
    """Softmax policy over arms trained by REINFORCE on reward-model scores.

    Each step samples ``batch_size`` arm choices, draws one response per
    choice and rewards it with ``score_single(params, context, ., .)`` (or
    ``reward_fn(features, gold_correct)`` when given). The policy gradient
    uses the batch-mean reward as baseline and divides by the batch reward
    std, so the step size does not depend on the reward model's scale. The report correlates per-batch
    mean reward with per-batch gold accuracy; it is None when either series
    is constant.
    """
    arms = list(arms)
    if len(arms) < 2 or len({a.accuracy for a in arms}) < 2:
        raise PreconditionError("need at least 2 arms with distinct gold accuracy")
    if reward_fn is None:
        if params is None or context is None:
            raise PreconditionError("either reward_fn or (params, context) is required")
        if arms[0].weights.shape[0] != params.dim:
            raise StructuralError("arm features do not match the model dimension")
        g_s = None

        def reward_fn(features, gold):
            nonlocal g_s
            if g_s is None:
                # Reward is linear in features at a fixed context; evaluate
                # score_single once on basis vectors to get it in closed form.
                zero = np.zeros(params.dim)
                g_s = np.array([score_single(params, context, zero, e) for e in np.eye(params.dim)])
            return features @ g_s

    rng = np.random.default_rng(seed)
    k = len(arms)
    best = int(np.argmax([a.accuracy for a in arms]))
    logits = np.zeros(k)
    rewards = np.empty(steps)
    golds = np.empty(steps)
    probs = np.empty((steps + 1, k))
    for t in range(steps):
        p = np.exp(logits - logits.max())
        p /= p.sum()
        probs[t] = p
        choice = rng.choice(k, size=batch_size, p=p)
        r = np.empty(batch_size)
        gold = np.empty(batch_size, dtype=bool)
        for j in range(k):
            idx = np.flatnonzero(choice == j)
            if idx.size:
                feats, correct = arms[j].sample(rng, idx.size)
                r[idx] = reward_fn(feats, correct)
                gold[idx] = correct
        rewards[t] = r.mean()
        golds[t] = gold.mean()
        adv = r - r.mean()
        spread = adv.std()
        adv = adv / spread if spread > 0.0 else adv
        onehot = np.eye(k)[choice]
        logits += learning_rate * (adv[:, None] * (onehot - p)).mean(axis=0)
    p = np.exp(logits - logits.max())
    probs[steps] = p / p.sum()
    try:
        report = correlation_report(rewards, golds)
    except DomainError:
        report = None
    return BanditResult(report, float(probs[steps, best]), float(probs[0, best]), rewards, golds, probs)
