"""End-to-end walkthrough: synthetic data -> two models -> blended ensemble.

Everything is seeded, so the numbers printed here come out the same on
every run and every machine.
"""

import numpy as np

from embedfuse.data import SynthConfig, generate_synthetic, split_dataset
from embedfuse.ensemble import EnsembleConfig, blend, sweep_alpha
from embedfuse.head import TrainConfig, head_predict, train
from embedfuse.knn import KnnConfig, knn_fit, knn_predict_batch
from embedfuse.metrics import avg_cos_sim

# 1. A paired dataset: unit-norm image embeddings, text embeddings that are
#    a fixed linear transform of them plus a little noise.
dataset, mixing = generate_synthetic(
    SynthConfig(count=2000, dim_img=16, dim_txt=16, noise_sigma=0.05, seed=7)
)
train_set, val_set, test_set = split_dataset(dataset, (0.8, 0.1, 0.1), seed=7)
print(f"split: {train_set.count} train / {val_set.count} val / {test_set.count} test")

# 2. Model A: the trainable projection head.
config = TrainConfig(epochs=15, batch_size=32, seed=7, hidden_dim=32)
params, history = train(config, train_set, val_set)
for stats in history[:3]:
    print(
        f"epoch {stats.epoch}: train_loss={stats.train_loss:.4f} "
        f"val={stats.val_avg_cossim:.4f}"
    )
print("...")
a_preds = head_predict(params, val_set)
a_score = avg_cos_sim(a_preds, val_set.texts).avg_cossim
print(f"model a (head) val avg cosine:      {a_score:.4f}")

# 3. Model B: distance-weighted nearest neighbors over the train corpus.
index = knn_fit(train_set, KnnConfig(k=5, index_space="image"))
b_preds = knn_predict_batch(index, val_set.images)
b_score = avg_cos_sim(b_preds, val_set.texts).avg_cossim
print(f"model b (neighbors) val avg cosine: {b_score:.4f}")

# 4. Blend them. The grid must cover both endpoints, so the best blend can
#    never score below either component on the split it was tuned on.
grid = np.linspace(0.0, 1.0, 21)
best_alpha, scored = sweep_alpha(a_preds, b_preds, val_set.texts, grid)
print(f"best alpha on val: {best_alpha:.2f}")

mixed = blend(a_preds, b_preds, EnsembleConfig(alpha_ens=best_alpha))
for name, preds in (("a", a_preds), ("b", b_preds), ("ensemble", mixed)):
    score = avg_cos_sim(preds, val_set.texts).avg_cossim
    print(f"{name:9s} val avg cosine: {score:.4f}")
