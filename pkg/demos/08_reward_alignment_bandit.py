"""
Does the reward track gold accuracy?
====================================

Four candidate generators ("arms") answer tasks correctly with probability
0.2, 0.4, 0.6 and 0.8. A correct answer's features lean toward the objective
and a wrong one's lean away. A softmax policy is trained by REINFORCE on the
reward softplus(s) * u from the trained head under an informative context.
Per-batch mean reward should track per-batch gold accuracy, and the policy
should concentrate on the best arm.
"""

from betapref.evaluate import bandit_alignment, make_bandit_arms
from betapref.model import TrainConfig, World, train
from betapref.synth import build_context

world = World()
std = world.standard_objective()
arms = make_bandit_arms(std)
for seed in range(3):
    params, _ = train(world, TrainConfig(lambda_base=0.1, seed=seed))
    context = build_context(std, std, 16, 1.0, seed=100 + seed)
    res = bandit_alignment(params, context, arms, seed=seed)
    rep = res.report
    print(f"seed {seed}: pearson {rep.pearson_r:.3f}  R2 ols {rep.r2_ols:.3f}  R2 iso {rep.r2_iso:.3f}  "
          f"best-arm probability {res.initial_best_arm_prob:.2f} -> {res.best_arm_prob:.3f}")
    print("        arm probabilities at steps 0/50/200:",
          [[round(float(v), 2) for v in res.probs[t]] for t in (0, 50, 200)])
