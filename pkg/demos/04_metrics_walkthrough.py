"""Why accuracy misleads on imbalanced data, metric by metric.

Walks a hand-sized confusion matrix through the imbalance-aware summary
scores, then shows the ROC construction and its pair-counting identity.
Run from the repository root: python3 demos/04_metrics_walkthrough.py
"""

import numpy as np

from mogan.metrics import (auc, binary_rates, confusion, evaluate, fam,
                           fault_collapse, imbalance_metrics, mcc, roc_points)

# 940 healthy, 60 faulty: a detector that never alarms is 94% accurate
y_true = np.array([0] * 940 + [1] * 60)
never = np.zeros_like(y_true)
acc = np.mean(never == y_true)
rep = evaluate(y_true, never, 2)
print(f"never-alarm detector: accuracy {acc:.3f}, "
      f"G-mean {rep.g_mean:.3f}, degenerate flag {rep.degenerate}")

# a useful detector: catches 48/60 faults at a 5% false alarm rate
y_pred = never.copy()
y_pred[940:988] = 1          # 48 true detections
y_pred[:47] = 1              # 47 false alarms
cm = confusion(y_true, y_pred, 2)
r = binary_rates(fault_collapse(cm))
print(f"\nworking detector: sensitivity {r.sensitivity:.3f}, "
      f"specificity {r.specificity:.3f}, precision {r.precision:.3f}")

bac, gmean, f, _ = imbalance_metrics(r.sensitivity, r.specificity)
corr, _ = mcc(fault_collapse(cm))
print("summary scores over (sensitivity, specificity):")
print(f"  balanced accuracy {bac:.4f}   (arithmetic mean)")
print(f"  G-mean            {gmean:.4f}   (geometric mean, <= BAC always)")
print(f"  F-measure         {f:.4f}   (harmonic-style mean at alpha 1)")
print(f"  MCC               {corr:.4f}   (correlation, uses all 4 cells)")

# ROC: sweep a threshold over scores, one diagonal segment per tie block
scores = np.concatenate([np.random.default_rng(0).uniform(0.0, 0.4, 940),
                         np.random.default_rng(1).uniform(0.1, 1.0, 60)])
pts = roc_points(scores, y_true == 1)
area = auc(scores, y_true == 1)
print(f"\nROC from {len(pts)} threshold points, trapezoid AUC {area:.4f}")

# the same number as a probability: P(random fault outscores random healthy)
pos, neg = scores[y_true == 1], scores[y_true == 0]
wins = (pos[:, None] > neg[None, :]).mean()
ties = (pos[:, None] == neg[None, :]).mean()
print(f"pair-count form {wins + 0.5 * ties:.4f} (identical by construction)")

combined = fam(area, corr, f)
print(f"\ncombined score (AUC + MCC + F)/3 = {combined:.4f}")
