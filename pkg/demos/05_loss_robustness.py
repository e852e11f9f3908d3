"""A compressed run of the injected-loss robustness study.

Replicas of the photon-subtracted EPR stand-in receive increasing vacuum
replacement; a handful of independently trained networks vote on each
replica while tomography tracks the reconstructed minimum. The full-size
protocol (30 trainings, 100 replicas per level) runs in the acceptance
suite; the shape of the transition is already visible here.
"""

import numpy as np

from wignet import TrainConfig, wigner_min
from wignet.harness import (
    RobustnessConfig,
    cmd_robustness,
    experimental_corpus_config,
    make_experimental_analog,
)

TWO_PI = 2 * np.pi

rng = np.random.default_rng(3001)
form, base = make_experimental_analog(rng, reps=2500)
print(f"stand-in state: analytic (2pi)^2 W_min = {TWO_PI**2 * wigner_min(form):+.4f}")
print(f"base pool: {len(base)} quadratures")

robust = RobustnessConfig(
    loss_grid=(0.0, 0.02, 0.04, 0.06, 0.08, 0.10, 0.12),
    replicas=20,
    trainings=6,
)
corpus = experimental_corpus_config(n_states=800, reps=500)
print("training 6 networks on an experimental-parameter corpus (a few minutes)...")
report = cmd_robustness(
    robust, base, master_seed=99, workers=2, corpus=corpus, train_config=TrainConfig(seed=1)
)

print("\nloss level | maxlik (2pi)^2 Wmin | consensus negative % | consensus positive %")
for i, level in enumerate(report.loss_levels):
    scaled = TWO_PI**2 * report.maxlik_wmin_mean[i]
    spread = TWO_PI**2 * report.maxlik_wmin_std[i]
    print(
        f"   {level:5.2f}    | {scaled:+7.4f} +- {spread:6.4f} |"
        f" {report.consensus_negative_pct()[i]:9.0f}        |"
        f" {report.consensus_positive_pct()[i]:9.0f}"
    )
report.save_json("robustness_demo.json")
print("\nwrote robustness_demo.json")
