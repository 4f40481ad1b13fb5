"""Classical oversamplers head to head on an imbalanced fault set.

Balances the training split with each method, fits the same reference
classifier on each result, and compares imbalance-aware test metrics.
Run from the repository root: python3 demos/02_oversampler_comparison.py
"""

import numpy as np

from mogan import (Standardizer, apply_plan, balance_plan, default_fault_specs,
                   evaluate, stratified_split, synthesize_dataset)
from mogan.dataio import LabeledDataset
from mogan.model import train_classifier

ds = synthesize_dataset(default_fault_specs(), (600, 40, 40, 40), 64, seed=0)
train_raw, test_raw, _, _ = stratified_split(ds, 0.7, seed=0)
std = Standardizer.fit(train_raw.features)
train = LabeledDataset(std.apply(train_raw.features), train_raw.labels,
                       ds.class_names)
test = LabeledDataset(std.apply(test_raw.features), test_raw.labels,
                      ds.class_names)
print(f"train counts {train.class_counts().tolist()}, "
      f"test counts {test.class_counts().tolist()}")

plan = balance_plan(train)
print(f"balance plan (synthetic rows per class): {plan.tolist()}\n")

print(f"{'method':12s} {'G-mean':>8s} {'BAC':>8s} {'F':>8s} {'MCC':>8s}")
for method in ("none", "random", "smote", "borderline", "adasyn"):
    fit_ds = train
    if method != "none":
        fit_ds = apply_plan(train, plan, method, k=5, seed=0)
    clf = train_classifier(fit_ds, epochs=40, batch_size=32, seed=0)
    preds = clf.predict(test.features)
    scores = clf.scores(test.features)
    rep = evaluate(test.labels, preds, test.n_classes, scores=scores)
    print(f"{method:12s} {rep.g_mean:8.4f} {rep.balanced_accuracy:8.4f} "
          f"{rep.f_measure:8.4f} {rep.mcc:8.4f}")

print("\nper-class recall without resampling vs with SMOTE:")
bare = train_classifier(train, epochs=40, batch_size=32, seed=0)
balanced = train_classifier(apply_plan(train, plan, "smote", k=5, seed=0),
                            epochs=40, batch_size=32, seed=0)
for name, clf in (("none", bare), ("smote", balanced)):
    rep = evaluate(test.labels, clf.predict(test.features), test.n_classes)
    recalls = [round(float(r), 3) for r in rep.per_class_recall]
    print(f"  {name:8s} {dict(zip(test.class_names, recalls))}")
