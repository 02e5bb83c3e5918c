"""
Mining single-label instances from multi-label images
=====================================================

A linear multi-label scorer is fit on whole-image features; each ground-truth
label then picks the candidate region it scores highest.
"""

import numpy as np

from semembed.mining import MultiLabelImage, assign_regions, filter_proposals, mine_dataset, train_scorer

rng = np.random.default_rng(0)
prototypes = {"cat": np.array([1.0, 0, 0, 0]), "dog": np.array([0, 1.0, 0, 0]),
              "car": np.array([0, 0, 1.0, 0])}

images = []
for n in range(60):
    labels = list(rng.choice(list(prototypes), size=int(rng.integers(1, 3)), replace=False))
    regions = [(f"r{k}", prototypes[lab] + 0.1 * rng.standard_normal(4))
               for k, lab in enumerate(labels)]
    regions.append(("bg", 0.1 * rng.standard_normal(4)))
    whole = sum(prototypes[lab] for lab in labels) + 0.1 * rng.standard_normal(4)
    images.append(MultiLabelImage(f"img{n}", whole, labels, regions))

scorer = train_scorer(images, epochs=100, lr=0.2, seed=0)
mined = mine_dataset(images, scorer)
print(len(mined), "instances mined from", len(images), "images")
for inst in mined[:6]:
    print(inst.id, inst.label)

# column-wise argmax, ties to the first region
print(assign_regions([[0.1, 0.9], [0.8, 0.2], [0.3, 0.3]]) + 1)

# proposals must cover 0.3 of each side with aspect ratio within [0.25, 4]
print(filter_proposals([(0, 0, 30, 30), (0, 0, 29, 30), (0, 0, 80, 15)], 100, 100))
