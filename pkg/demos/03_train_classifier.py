"""Train the negativity classifier on a small simulated corpus.

A compressed version of the full experiment: generate labeled states,
train the 30/20/10 network with Adam and early stopping, and read off the
validation metrics and ROC area. The full-size corpus (4000 states, 1000
repetitions) is exercised by the acceptance suite; here a few hundred
states already separate the classes well.
"""

import numpy as np

from wignet import TrainConfig, evaluate, roc_curve, train
from wignet.harness import CorpusConfig, cmd_generate

config = CorpusConfig(mode_count=2, n_states=500, reps=400)
print("generating 500 two-mode states (this takes a minute)...")
dataset, manifest = cmd_generate(config, master_seed=2024, workers=2)
print(
    f"kept {len(dataset)} states after band filtering "
    f"({manifest['n_negative']} negative, {manifest['n_positive']} positive)"
)

model, history = train(dataset, TrainConfig(seed=5))
print(f"trained for {len(history)} epochs (early stopping)")
print(f"final epoch: train_loss={history[-1]['train_loss']:.4f} val_loss={history[-1]['val_loss']:.4f}")

metrics = evaluate(model, dataset.subset("val"))
print(f"\nvalidation accuracy  : {metrics.accuracy:.3f}")
print(f"recall / specificity : {metrics.recall:.3f} / {metrics.specificity:.3f}")
curve = roc_curve(model, dataset.subset("val"), np.linspace(0, 1, 101))
print(f"ROC area under curve : {curve.auc:.3f}")
