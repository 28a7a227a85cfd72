"""
Trading off two objectives through the context
==============================================

Mix demonstrations from objective A ("respond") and objective B ("refuse") at
a fixed ratio and score held-out pairs under both. Sweeping the ratio traces
a trade-off curve. With more demonstrations the curve moves outward and the
dominated area (hypervolume) grows.
"""

from betapref.evaluate import hypervolume, pareto_sweep
from betapref.model import TrainConfig, World, train

world = World()
params, _ = train(world, TrainConfig(lambda_base=0.1, seed=0))
obj_a, obj_b = world.standard_objective(), world.objective(1)
print(f"cosine between the objectives: {obj_a.weights @ obj_b.weights:.3f}")

for n in [1, 4, 16]:
    points = pareto_sweep(params, obj_a, obj_b, n, seeds=(0, 1, 2, 3))
    print(f"\nN = {n}")
    print(" mix   respond  refuse")
    for p in points:
        print(f" {p.mix_ratio:<4}  {p.respond_acc:.3f}    {p.refuse_acc:.3f}")
    print(f" hypervolume {hypervolume(points):.3f}")
