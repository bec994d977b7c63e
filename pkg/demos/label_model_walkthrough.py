"""A walkthrough of the weak-supervision label model on planted data.

We generate a corpus with known ground truth, let five noisy labeling
functions vote, and watch the model recover each function's accuracy
from nothing but their agreement structure. No human labels involved.

Run:  python3 demos/label_model_walkthrough.py
"""
import numpy as np

from screenloop.label_model import estimate_accuracies, raw_scores, predict
from screenloop.metrics import roc_auc
from screenloop.synthetic import planted_label_matrix

# Five labeling functions with planted accuracies. Each votes on every
# document and is right with exactly its planted probability.
planted = [0.9, 0.85, 0.8, 0.75, 0.7]
values, truth = planted_label_matrix(50_000, planted, class_prior=0.3, seed=0)

print("planted accuracies: ", ["%.2f" % a for a in planted])

# The triplet method. For any three conditionally independent functions,
# pairwise agreement rates pin down each one's accuracy in closed form;
# we average the estimate over all valid triplets, after discarding
# pairs whose agreement is indistinguishable from chance (Wilson test).
est = estimate_accuracies(values)
print("estimated:          ", ["%.3f" % a for a in est.accuracies])
print("triplets per LF:    ", list(est.support))

# Predictions are accuracy-weighted log-odds sums. Abstains (0.5)
# contribute nothing, strong functions dominate.
scores = raw_scores(values, est)
print()
print("ensemble AUC: %.4f" % roc_auc(scores, truth))
for j in range(values.shape[1]):
    print("  LF %d alone: %.4f" % (j, roc_auc(values[:, j], truth)))

# A function the model knows nothing about stays silent: appending an
# all-abstain column changes no prediction.
extended = np.hstack([values, np.full((values.shape[0], 1), 0.5)])
est2 = estimate_accuracies(extended)
delta = max(
    abs(predict(extended[i], est2) - predict(values[i], est))
    for i in range(200)
)
print()
print("largest prediction change from an all-abstain column: %.2e" % delta)
