"""
Steering with context and growing confidence
============================================

A trained head reads its context. More demonstrations mean higher accuracy.
A reversed context on reversed labels works as well as the standard one.
A static Bradley-Terry score cannot follow the reversal. The concentration tau
also grows with the number of demonstrations.
"""

import numpy as np

from betapref.evaluate import calibration_curve, context_accuracy, static_accuracy
from betapref.model import TrainConfig, World, train

world = World()
std = world.standard_objective()
rev = std.reversed()
icrm = [train(world, TrainConfig(lambda_base=0.1, seed=s))[0] for s in range(3)]
bt = train(world, TrainConfig(objective="bt", seed=0))[0]

print(" N    standard  reversed   (accuracy, 3 models x 4000 pairs)")
for n in [1, 2, 4, 8, 16, 32]:
    a = np.mean([context_accuracy(p, std, std, n, 4000, s) for s, p in enumerate(icrm)])
    r = np.mean([context_accuracy(p, rev, rev, n, 4000, s) for s, p in enumerate(icrm)])
    print(f"{n:2d}    {a:.3f}     {r:.3f}")

print(f"\nstatic BT score: standard {static_accuracy(bt, std, 4000):.3f}, reversed {static_accuracy(bt, rev, 4000):.3f}")

print("\n N   mean tau  (std over seeds)")
curve = calibration_curve(icrm[0], std, [1, 2, 4, 8, 16, 32], seeds=[0, 1, 2, 3])
for n, m, s in curve:
    print(f"{n:2d}   {m:7.3f}  ({s:.3f})")
