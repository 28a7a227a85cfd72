"""Synthetic preference worlds.

Responses are standard-normal feature vectors. An objective is a unit
direction ``w``; a pair (a, b) is compared under a Bradley-Terry model with
true preference ``sigmoid(margin_scale * w . (phi_a - phi_b))`` and the
winner is stored as the chosen response.

Labels are drawn with a sign-symmetric rule: a uniform draw decides whether
the label *agrees* with the sign of the true margin (probability
``sigmoid(|margin|)``). Negating the objective therefore flips every label
on identical random draws, which is what makes reversed evaluation exact.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import PreconditionError, StructuralError
from .specfun import sigmoid

DEFAULT_DIM = 16
DEFAULT_MARGIN_SCALE = 2.0
TRIPLE_FIELDS = ("phi_prompt", "phi_chosen", "phi_rejected", "outcome")


@dataclass(frozen=True)
class ObjectiveVector:
    weights: np.ndarray
    name: str = "objective"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or not np.all(np.isfinite(w)) or not np.linalg.norm(w) > 0.0:
            raise PreconditionError("objective weights must be a finite nonzero vector")
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    def reversed(self) -> "ObjectiveVector":
        return reversed_objective(self)


@dataclass(frozen=True)
class PreferenceTriple:
    phi_prompt: np.ndarray
    phi_chosen: np.ndarray
    phi_rejected: np.ndarray
    outcome: int = 1

    @property
    def direction(self) -> np.ndarray:
        """phi_chosen - phi_rejected, oriented toward the preferred response."""
        sign = 1.0 if self.outcome == 1 else -1.0
        return sign * (self.phi_chosen - self.phi_rejected)

    def swapped(self) -> "PreferenceTriple":
        return PreferenceTriple(self.phi_prompt, self.phi_rejected, self.phi_chosen, 1 - self.outcome)

    def oriented(self) -> "PreferenceTriple":
        """The same comparison with the preferred response in the chosen slot."""
        return self if self.outcome == 1 else self.swapped()

    def to_record(self) -> dict:
        return {
            "phi_prompt": self.phi_prompt.tolist(),
            "phi_chosen": self.phi_chosen.tolist(),
            "phi_rejected": self.phi_rejected.tolist(),
            "outcome": int(self.outcome),
        }

    @classmethod
    def from_record(cls, rec: dict) -> "PreferenceTriple":
        missing = [k for k in TRIPLE_FIELDS if k not in rec]
        if missing:
            raise StructuralError(f"triple record missing fields {missing}")
        arrays = [np.asarray(rec[k], dtype=float) for k in TRIPLE_FIELDS[:3]]
        if len({a.shape for a in arrays}) != 1 or arrays[0].ndim != 1:
            raise StructuralError("triple feature vectors must share one 1-d shape")
        outcome = int(rec["outcome"])
        if outcome not in (0, 1):
            raise StructuralError(f"outcome must be 0 or 1, got {rec['outcome']}")
        return cls(*arrays, outcome)


@dataclass(frozen=True)
class DemonstrationSet:
    """An ordered in-context set of preference triples.

    ``mix_ratio`` is the fraction drawn from the first objective.
    ``agreement`` is the fraction of triples whose label agrees, in the
    majority direction, with the sign of the true margin under the objective
    that generated it.
    """

    triples: tuple
    mix_ratio: float = 1.0
    agreement: float = 1.0
    sources: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "triples", tuple(self.triples))
        if len(self.triples) < 1:
            raise PreconditionError("a demonstration set needs at least one triple")
        dims = {t.phi_chosen.shape[0] for t in self.triples}
        if len(dims) != 1:
            raise StructuralError("demonstrations have inconsistent dimensions")

    def __len__(self):
        return len(self.triples)

    @property
    def n(self) -> int:
        return len(self.triples)

    @property
    def dim(self) -> int:
        return self.triples[0].phi_chosen.shape[0]

    def directions(self) -> np.ndarray:
        return np.stack([t.direction for t in self.triples])

    def mean_direction(self) -> np.ndarray:
        return self.directions().mean(axis=0)

    def reordered(self, order) -> "DemonstrationSet":
        return DemonstrationSet(
            [self.triples[i] for i in order], self.mix_ratio, self.agreement
        )


def gen_objective(dim: int, seed: int) -> ObjectiveVector:
    if dim < 2:
        raise PreconditionError("objective dimension must be >= 2")
    w = np.random.default_rng(seed).standard_normal(dim)
    return ObjectiveVector(w / np.linalg.norm(w), f"objective-{seed}")


def reversed_objective(obj: ObjectiveVector) -> ObjectiveVector:
    name = obj.name[9:-1] if obj.name.startswith("reversed(") else f"reversed({obj.name})"
    return ObjectiveVector(-obj.weights, name)


def label_pairs(weights, phi_a, phi_b, margin_scale, uniforms):
    """Sign-symmetric Bradley-Terry labelling.

    Returns ``(a_wins, agrees)`` where ``agrees`` marks labels that match the
    sign of the true margin. ``weights`` broadcasts against the leading axes
    of ``phi_a``.
    """
    margin = margin_scale * np.sum(weights * (phi_a - phi_b), axis=-1)
    agrees = uniforms < sigmoid(np.abs(margin))
    a_wins = agrees == (margin >= 0.0)
    return a_wins, agrees


def draw_pairs(rng, weights, margin_scale, shape, dim):
    """Vectorised pair draws; returns (prompt, chosen, rejected, agrees)."""
    phi_prompt = rng.standard_normal((*shape, dim))
    phi_a = rng.standard_normal((*shape, dim))
    phi_b = rng.standard_normal((*shape, dim))
    u = rng.random(shape)
    a_wins, agrees = label_pairs(weights, phi_a, phi_b, margin_scale, u)
    win = a_wins[..., None]
    chosen = np.where(win, phi_a, phi_b)
    rejected = np.where(win, phi_b, phi_a)
    return phi_prompt, chosen, rejected, agrees


def sample_triple(obj: ObjectiveVector, margin_scale: float, seed: int) -> PreferenceTriple:
    rng = np.random.default_rng(seed)
    prompt, chosen, rejected, _ = draw_pairs(rng, obj.weights, margin_scale, (), obj.dim)
    return PreferenceTriple(prompt, chosen, rejected, 1)


def sample_triples(obj: ObjectiveVector, margin_scale: float, count: int, seed: int) -> list:
    rng = np.random.default_rng(seed)
    prompt, chosen, rejected, _ = draw_pairs(rng, obj.weights, margin_scale, (count,), obj.dim)
    return [PreferenceTriple(prompt[i], chosen[i], rejected[i], 1) for i in range(count)]


def split_count(n: int, mix_ratio: float) -> int:
    """Number of demonstrations drawn from the first objective (round half up)."""
    return int(math.floor(mix_ratio * n + 0.5))


def majority_agreement(agrees) -> np.ndarray:
    """Fraction of entries on the majority side, along the last axis."""
    frac = np.mean(agrees, axis=-1)
    return np.maximum(frac, 1.0 - frac)


def build_context(
    obj_a: ObjectiveVector,
    obj_b: ObjectiveVector,
    n: int,
    mix_ratio: float,
    margin_scale: float = DEFAULT_MARGIN_SCALE,
    seed: int = 0,
) -> DemonstrationSet:
    """Context of ``n`` demonstrations, ``split_count(n, mix_ratio)`` from ``obj_a``."""
    if n < 1:
        raise PreconditionError("context size must be >= 1")
    if not 0.0 <= mix_ratio <= 1.0:
        raise PreconditionError("mix_ratio must lie in [0, 1]")
    if obj_a.dim != obj_b.dim:
        raise StructuralError("objectives have different dimensions")
    rng = np.random.default_rng(seed)
    n_a = split_count(n, mix_ratio)
    weights = mixed_slot_weights(obj_a, obj_b, n, mix_ratio)
    prompt, chosen, rejected, agrees = draw_pairs(rng, weights, margin_scale, (n,), obj_a.dim)
    order = rng.permutation(n)
    sources = tuple("a" if i < n_a else "b" for i in order)
    triples = [PreferenceTriple(prompt[i], chosen[i], rejected[i], 1) for i in order]
    return DemonstrationSet(triples, mix_ratio, float(majority_agreement(agrees)), sources)


def draw_context_summaries(rng, slot_weights, margin_scale, count):
    """Summaries of ``count`` independent contexts without building triples.

    ``slot_weights`` has shape (n, d): the generating objective of each of
    the n context slots (rows may differ, as in a mixed context). Returns
    ``(mean_direction, agreement)`` with shapes (count, d) and (count,),
    matching ``DemonstrationSet.mean_direction`` and ``.agreement``.
    """
    slot_weights = np.asarray(slot_weights, dtype=float)
    n, d = slot_weights.shape
    _, chosen, rejected, agrees = draw_pairs(rng, slot_weights[None], margin_scale, (count, n), d)
    return (chosen - rejected).mean(axis=1), majority_agreement(agrees)


def mixed_slot_weights(obj_a: ObjectiveVector, obj_b: ObjectiveVector, n: int, mix_ratio: float) -> np.ndarray:
    """(n, d) generating objectives of a context, ``split_count`` rows from ``obj_a``."""
    n_a = split_count(n, mix_ratio)
    return np.where(np.arange(n)[:, None] < n_a, obj_a.weights, obj_b.weights)


def save_triples(path, triples) -> None:
    with open(path, "w") as fh:
        for t in triples:
            fh.write(json.dumps(t.to_record()) + "\n")


def load_triples(path) -> list:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append(PreferenceTriple.from_record(json.loads(line)))
        except (json.JSONDecodeError, StructuralError) as exc:
            raise StructuralError(f"{path}:{lineno}: {exc}") from exc
    return out
