"""Context-conditioned linear reward head.

The context is summarised by the mean of its oriented preference directions
``m = mean_j (phi_chosen_j - phi_rejected_j)``. A linear aggregator turns it
into a scoring direction ``g = W m + b`` and a candidate scores ``u = g . phi``.
The confidence logit is shared by both candidates and sees only context
statistics: ``s = w_conf . [agreement, log(1 + N), 1]``.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .beta import UNIFORM_PRIOR, BetaParams
from .errors import DomainError, NumericFailure, PreconditionError, StructuralError
from .objective import (
    HeadScores,
    LossConfig,
    grad_from_shapes,
    lambda_schedule,
    loss_from_shapes,
)
from .specfun import log_sigmoid, sigmoid, softplus
from .synth import (
    DEFAULT_DIM,
    DEFAULT_MARGIN_SCALE,
    DemonstrationSet,
    PreferenceTriple,
    draw_pairs,
    gen_objective,
)

CHECKPOINT_SCHEMA = 1
N_CONF_FEATURES = 3


@dataclass
class ModelParams:
    w_agg: np.ndarray
    b_agg: np.ndarray
    w_conf: np.ndarray

    def __post_init__(self):
        self.w_agg = np.asarray(self.w_agg, dtype=float)
        self.b_agg = np.asarray(self.b_agg, dtype=float)
        self.w_conf = np.asarray(self.w_conf, dtype=float)
        d = self.b_agg.shape[0] if self.b_agg.ndim == 1 else -1
        if self.w_agg.shape != (d, d) or self.w_conf.shape != (N_CONF_FEATURES,):
            raise StructuralError(
                f"inconsistent parameter shapes: w_agg {self.w_agg.shape}, "
                f"b_agg {self.b_agg.shape}, w_conf {self.w_conf.shape}"
            )

    @property
    def dim(self) -> int:
        return self.b_agg.shape[0]

    @classmethod
    def zeros(cls, dim: int) -> "ModelParams":
        return cls(np.zeros((dim, dim)), np.zeros(dim), np.zeros(N_CONF_FEATURES))

    @classmethod
    def init(cls, dim: int, seed: int) -> "ModelParams":
        rng = np.random.default_rng(seed)
        w = rng.normal(0.0, 1.0 / math.sqrt(dim + 1), size=(dim, dim))
        return cls(w, np.zeros(dim), np.zeros(N_CONF_FEATURES))

    def copy(self) -> "ModelParams":
        return ModelParams(self.w_agg.copy(), self.b_agg.copy(), self.w_conf.copy())

    def arrays(self):
        return self.w_agg, self.b_agg, self.w_conf

    def finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def _fmt(values) -> str:
    return "[" + ", ".join(format(float(v), ".17g") for v in np.ravel(values)) + "]"


def checkpoint_json(params: ModelParams) -> str:
    """Checkpoint document; floats are written with 17 significant digits."""
    return (
        "{\n"
        f'  "schema_version": {CHECKPOINT_SCHEMA},\n'
        f'  "dim": {params.dim},\n'
        f'  "w_agg": {_fmt(params.w_agg)},\n'
        f'  "b_agg": {_fmt(params.b_agg)},\n'
        f'  "w_conf": {_fmt(params.w_conf)}\n'
        "}\n"
    )


def params_from_json(text: str) -> ModelParams:
    doc = json.loads(text)
    if doc.get("schema_version") != CHECKPOINT_SCHEMA:
        raise StructuralError(f"unsupported checkpoint schema {doc.get('schema_version')}")
    d = int(doc["dim"])
    w = np.asarray(doc["w_agg"], dtype=float)
    if w.size != d * d:
        raise StructuralError(f"w_agg has {w.size} entries, expected {d * d}")
    return ModelParams(w.reshape(d, d), doc["b_agg"], doc["w_conf"])


def save_checkpoint(params: ModelParams, path) -> None:
    with open(path, "w") as fh:
        fh.write(checkpoint_json(params))


def load_checkpoint(path) -> ModelParams:
    with open(path) as fh:
        return params_from_json(fh.read())


def confidence_features(agreement, n):
    agreement = np.asarray(agreement, dtype=float)
    n = np.asarray(n, dtype=float)
    return np.stack(np.broadcast_arrays(agreement, np.log1p(n), np.ones_like(agreement)), axis=-1)


def _check_dim(params: ModelParams, *vectors):
    for v in vectors:
        if np.shape(v)[-1] != params.dim:
            raise StructuralError(f"feature dimension {np.shape(v)[-1]} != model dimension {params.dim}")


def context_direction(params: ModelParams, context: DemonstrationSet) -> np.ndarray:
    _check_dim(params, context.triples[0].phi_chosen)
    return params.w_agg @ context.mean_direction() + params.b_agg


def context_confidence(params: ModelParams, context: DemonstrationSet) -> float:
    return float(confidence_features(context.agreement, context.n) @ params.w_conf)


def forward(params: ModelParams, context: DemonstrationSet, pair: PreferenceTriple) -> HeadScores:
    _check_dim(params, pair.phi_chosen, pair.phi_rejected)
    g = context_direction(params, context)
    s = context_confidence(params, context)
    return HeadScores(float(g @ pair.phi_chosen), float(g @ pair.phi_rejected), s, s)


def score_single(params: ModelParams, context: DemonstrationSet, phi_prompt, phi_candidate) -> float:
    """Single-response reward softplus(s) * u under the given context."""
    _check_dim(params, phi_candidate)
    g = context_direction(params, context)
    s = context_confidence(params, context)
    return float(softplus(s) * (g @ np.asarray(phi_candidate, dtype=float)))


# Batched machinery used by training and evaluation.


@dataclass
class Batch:
    """A batch of (context summary, candidate pair) instances.

    ``ctx_mean`` is each context's mean oriented direction, ``features`` the
    confidence-head inputs, ``lam`` the per-instance KL weight lambda(N).
    """

    ctx_mean: np.ndarray
    features: np.ndarray
    phi_w: np.ndarray
    phi_l: np.ndarray
    lam: np.ndarray = field(default=None)

    @classmethod
    def from_examples(cls, contexts, pairs, cfg: LossConfig | None = None) -> "Batch":
        ctx_mean = np.stack([c.mean_direction() for c in contexts])
        feats = np.stack([confidence_features(c.agreement, c.n) for c in contexts])
        lam = None
        if cfg is not None:
            lam = np.array([cfg.lambda_base / c.n for c in contexts])
        return cls(
            ctx_mean,
            feats,
            np.stack([p.phi_chosen for p in pairs]),
            np.stack([p.phi_rejected for p in pairs]),
            lam,
        )


def forward_batch(params: ModelParams, batch: Batch):
    """Returns (delta_u, s, g) for every instance."""
    g = batch.ctx_mean @ params.w_agg.T + params.b_agg
    delta_u = np.sum(g * (batch.phi_w - batch.phi_l), axis=-1)
    s = batch.features @ params.w_conf
    return delta_u, s, g


def icrm_loss_and_grad(params: ModelParams, batch: Batch, prior: BetaParams = UNIFORM_PRIOR):
    """Mean loss over the batch, its parameter gradient, and per-instance (mu, tau)."""
    delta_u, s, _ = forward_batch(params, batch)
    mu = sigmoid(delta_u)
    one_minus = sigmoid(-delta_u)
    sp = softplus(s)
    tau = 2.0 * sp + 1.0
    alpha, beta = mu * tau, one_minus * tau
    losses = loss_from_shapes(alpha, beta, batch.lam, prior)
    d_mu, d_tau = grad_from_shapes(alpha, beta, batch.lam, prior)

    n = delta_u.shape[0]
    d_delta = d_mu * mu * one_minus / n
    d_s = d_tau * 2.0 * sigmoid(s) / n
    d_g = d_delta[:, None] * (batch.phi_w - batch.phi_l)
    grad = ModelParams(d_g.T @ batch.ctx_mean, d_g.sum(axis=0), batch.features.T @ d_s)
    return float(np.mean(losses)), grad, mu, tau


def bt_loss_and_grad(params: ModelParams, batch: Batch):
    """Bradley-Terry loss on the context-free score b . phi.

    Only ``b_agg`` receives gradient; the returned gradient has zero
    aggregator and confidence components.
    """
    diff = batch.phi_w - batch.phi_l
    delta_r = diff @ params.b_agg
    losses = -log_sigmoid(delta_r)
    n = delta_r.shape[0]
    d_b = -(sigmoid(-delta_r) / n) @ diff
    grad = ModelParams(np.zeros_like(params.w_agg), d_b, np.zeros(N_CONF_FEATURES))
    mu = sigmoid(delta_r)
    return float(np.mean(losses)), grad, mu


def backward(params: ModelParams, context: DemonstrationSet, pair: PreferenceTriple, cfg: LossConfig) -> ModelParams:
    """Gradient of the loss of one (context, pair) instance w.r.t. the parameters.

    The KL weight is ``lambda_schedule(cfg)``; set ``cfg.n_demos`` to the
    context size to follow the usual schedule.
    """
    _check_dim(params, pair.phi_chosen, context.triples[0].phi_chosen)
    batch = Batch.from_examples([context], [pair])
    batch.lam = np.array([lambda_schedule(cfg)])
    _, grad, _, _ = icrm_loss_and_grad(params, batch, cfg.prior)
    return grad


def instance_loss(params: ModelParams, context: DemonstrationSet, pair: PreferenceTriple, cfg: LossConfig) -> float:
    batch = Batch.from_examples([context], [pair])
    batch.lam = np.array([lambda_schedule(cfg)])
    loss, _, _, _ = icrm_loss_and_grad(params, batch, cfg.prior)
    return loss


# Training.


@dataclass(frozen=True)
class World:
    """Synthetic training world.

    ICRM training draws each instance's objective from a library of
    ``n_objectives`` base objectives ``gen_objective(dim, standard_seed + j)``
    and their reversals, so ranking a held-out pair requires reading the
    context. ``n_objectives=0`` draws a fresh random unit objective per
    instance instead. The standard objective (j = 0) is the fixed preference
    a static Bradley-Terry baseline is fitted to and the default target of
    evaluation.
    """

    dim: int = DEFAULT_DIM
    margin_scale: float = DEFAULT_MARGIN_SCALE
    n_values: tuple = (1, 2, 4, 8, 16)
    standard_seed: int = 0
    n_objectives: int = 2

    def __post_init__(self):
        if self.n_objectives < 0:
            raise PreconditionError("n_objectives must be >= 0")
        if not self.n_values or min(self.n_values) < 1:
            raise PreconditionError("n_values must be nonempty and >= 1")

    def standard_objective(self):
        return gen_objective(self.dim, self.standard_seed)

    def objective(self, j: int):
        return gen_objective(self.dim, self.standard_seed + j)

    def library(self) -> np.ndarray | None:
        """(2K, d) training objectives, or None for fresh random draws."""
        if self.n_objectives == 0:
            return None
        base = np.stack([self.objective(j).weights for j in range(self.n_objectives)])
        return np.concatenate([base, -base])


@dataclass(frozen=True)
class TrainConfig:
    objective: str = "icrm"
    lambda_base: float = 0.1
    prior: BetaParams = UNIFORM_PRIOR
    steps: int = 2000
    batch_size: int = 64
    learning_rate: float = 0.01
    momentum: float = 0.9
    max_grad_norm: float | None = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.objective not in ("icrm", "bt"):
            raise PreconditionError(f"objective must be 'icrm' or 'bt', got {self.objective!r}")
        if self.steps < 1 or self.batch_size < 1:
            raise PreconditionError("steps and batch_size must be >= 1")
        if not self.learning_rate >= 0.0:
            raise PreconditionError("learning_rate must be >= 0")
        if self.lambda_base < 0.0:
            raise PreconditionError("lambda_base must be >= 0")


@dataclass
class TrainTrace:
    step: np.ndarray
    loss: np.ndarray
    mu_mean: np.ndarray
    tau_mean: np.ndarray

    HEADER = ("step", "loss", "mu_mean", "tau_mean")

    def __len__(self):
        return len(self.step)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.HEADER)
        for row in zip(self.step, self.loss, self.mu_mean, self.tau_mean):
            w.writerow([int(row[0])] + [format(float(v), ".17g") for v in row[1:]])
        return buf.getvalue()

    def final(self, window: int = 100) -> dict:
        k = min(window, len(self))
        return {
            "loss": float(np.mean(self.loss[-k:])),
            "mu_mean": float(np.mean(self.mu_mean[-k:])),
            "tau_mean": float(np.mean(self.tau_mean[-k:])),
        }


def sample_training_batch(rng, world: World, batch_size: int, weights=None, lambda_base: float = 0.0) -> Batch:
    """Draw one batch of (context, held-out pair) instances.

    With ``weights=None`` each instance's objective is drawn from the
    world's library (or at random, see ``World``). Contexts are padded to
    the largest N and masked.
    """
    d = world.dim
    library = world.library() if weights is None else None
    if library is not None:
        weights = library[rng.integers(0, len(library), size=batch_size)]
    elif weights is None:
        weights = rng.standard_normal((batch_size, d))
        weights /= np.linalg.norm(weights, axis=1, keepdims=True)
    else:
        weights = np.broadcast_to(np.asarray(weights, dtype=float), (batch_size, d))
    n = rng.choice(np.asarray(world.n_values), size=batch_size)
    n_max = int(max(world.n_values))
    _, c_w, c_l, agrees = draw_pairs(rng, weights[:, None, :], world.margin_scale, (batch_size, n_max), d)
    mask = np.arange(n_max)[None, :] < n[:, None]
    ctx_mean = np.einsum("bn,bnd->bd", mask, c_w - c_l) / n[:, None]
    frac = np.sum(agrees & mask, axis=1) / n
    agreement = np.maximum(frac, 1.0 - frac)
    _, p_w, p_l, _ = draw_pairs(rng, weights, world.margin_scale, (batch_size,), d)
    return Batch(ctx_mean, confidence_features(agreement, n), p_w, p_l, lambda_base / n)


BT_TAU = 2.0 * math.log(2.0) + 1.0


def train(world: World, cfg: TrainConfig, init: ModelParams | None = None):
    """Minibatch gradient descent with heavy-ball momentum.

    The loss grows exponentially in the margin of a confidently wrong pair,
    so the global gradient norm is clipped at ``cfg.max_grad_norm``.

    Returns the final parameters and a per-step trace. For the ``"bt"``
    objective the model is the static score ``b . phi`` trained on the
    world's standard objective; its trace records tau as the constant of an
    untouched confidence head.

    Raises:
        NumericFailure: the loss or parameters became non-finite; ``.step``
            names the step and ``.trace`` holds the records before it.
    """
    rng = np.random.default_rng(cfg.seed)
    if init is not None:
        params = init.copy()
    elif cfg.objective == "icrm":
        params = ModelParams.init(world.dim, cfg.seed)
    else:
        params = ModelParams.zeros(world.dim)
    velocity = [np.zeros_like(a) for a in params.arrays()]
    fixed_w = world.standard_objective().weights if cfg.objective == "bt" else None

    steps = np.arange(1, cfg.steps + 1)
    losses = np.empty(cfg.steps)
    mus = np.empty(cfg.steps)
    taus = np.empty(cfg.steps)
    def fail(message, step, done, cause=None):
        partial = TrainTrace(steps[:done], losses[:done], mus[:done], taus[:done])
        raise NumericFailure(f"{message} at step {step}", step=step, trace=partial) from cause

    for k in range(cfg.steps):
        batch = sample_training_batch(rng, world, cfg.batch_size, fixed_w, cfg.lambda_base)
        if cfg.objective == "icrm":
            try:
                loss, grad, mu, tau = icrm_loss_and_grad(params, batch, cfg.prior)
            except DomainError as exc:
                fail("posterior shapes underflowed", k + 1, k, exc)
            tau_mean = float(np.mean(tau))
        else:
            loss, grad, mu = bt_loss_and_grad(params, batch)
            tau_mean = BT_TAU
        if not math.isfinite(loss):
            fail("non-finite loss", k + 1, k)
        losses[k] = loss
        mus[k] = np.mean(mu)
        taus[k] = tau_mean
        if cfg.max_grad_norm is not None:
            norm = math.sqrt(sum(float(np.sum(g * g)) for g in grad.arrays()))
            if norm > cfg.max_grad_norm:
                grad = ModelParams(*(g * (cfg.max_grad_norm / norm) for g in grad.arrays()))
        for v, p, g in zip(velocity, params.arrays(), grad.arrays()):
            v *= cfg.momentum
            v -= cfg.learning_rate * g
            p += v
        if not params.finite():
            fail("parameters became non-finite", k + 1, k + 1)
    return params, TrainTrace(steps, losses, mus, taus)
