"""
A synthetic preference world
============================

Responses are feature vectors, and an objective is a unit vector w. A pair is
labelled by a Bradley-Terry coin with P(a beats b) = sigmoid(m w . (phi_a - phi_b)).
Contexts are small sets of such labelled pairs, optionally mixing two
conflicting objectives.
"""

import numpy as np

from betapref.synth import build_context, gen_objective, sample_triples

obj = gen_objective(8, 0)
other = gen_objective(8, 1)
print(obj.name, np.round(obj.weights, 3))
print("reversed:", obj.reversed().name, "cosine with original", obj.reversed().weights @ obj.weights)

# Label noise depends on the margin scale.
for scale in [0.0, 0.5, 2.0, 50.0]:
    ts = sample_triples(obj, scale, 20_000, seed=1)
    agree = np.mean([obj.weights @ t.direction > 0 for t in ts])
    print(f"margin scale {scale:>4}: labels agree with the true sign {agree:.3f}")

# A context's mean preference direction points toward its objective.
for n in [1, 4, 16, 64]:
    ctx = build_context(obj, obj, n, 1.0, seed=n)
    m = ctx.mean_direction()
    print(f"N={n:<3} cos(mean direction, w) = {m @ obj.weights / np.linalg.norm(m):.3f}  agreement {ctx.agreement:.2f}")

# Mixing two objectives tilts the direction from one to the other.
print("\nmix  sources          cos to A  cos to B")
for r in [0.0, 0.25, 0.5, 0.75, 1.0]:
    ms = np.mean([build_context(obj, other, 8, r, seed=s).mean_direction() for s in range(400)], axis=0)
    ctx = build_context(obj, other, 8, r, seed=0)
    unit = ms / np.linalg.norm(ms)
    print(f"{r:<4} {''.join(ctx.sources):<16} {unit @ obj.weights: .3f}    {unit @ other.weights: .3f}")
