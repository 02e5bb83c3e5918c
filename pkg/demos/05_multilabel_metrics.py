"""
Multi-label evaluation
======================

Per-class and overall precision/recall over the top-k labels, plus mAP and
per-image mAP@N.
"""

from semembed.metrics import PredictionRanking, evaluate_multi_label

rankings = [
    PredictionRanking("i1", ["a", "b", "x", "c", "y"], [0.9, 0.8, 0.5, 0.3, 0.1]),
    PredictionRanking("i2", ["c", "x", "y", "a", "b"], [0.7, 0.6, 0.4, 0.2, 0.1]),
]
truth = [{"a", "b"}, {"c"}]

report = evaluate_multi_label(rankings, truth, k=3, map_ns=(1, 3))
for key, value in report.flat().items():
    print(f"{key:8s} {value:.4f}")
