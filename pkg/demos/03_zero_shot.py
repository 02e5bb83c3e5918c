"""
Zero-shot classification
========================

Train on six classes, then classify the remaining four by nearest label
vector. The generalized setting ranks over all ten labels instead.
"""

from semembed import LossConfig, TrainConfig, SyntheticSpec, generate_synthetic, train
from semembed.inference import zero_shot_eval
from semembed.synthetic import split_classes

data = generate_synthetic(SyntheticSpec(classes=10, per_class=50, feature_dim=16, embed_dim=8,
                                        seed=1))
seen = list(data.labels.ids[:6])
train_set, test_set, seen_labels, unseen_labels = split_classes(data, seen)

state = train(train_set, seen_labels, LossConfig(), TrainConfig(epochs=100, rng_seed=1))

standard = zero_shot_eval(state.model, test_set, unseen_labels, training_labels=seen, ks=(1, 2))
print("unseen labels only (chance 0.25)")
print(standard.to_text())

generalized = zero_shot_eval(state.model, test_set, unseen_labels, seen_labels, ks=(1, 2))
print("seen + unseen labels (chance 0.10)")
print(generalized.to_text())
