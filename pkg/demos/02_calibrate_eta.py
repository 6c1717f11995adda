"""
Calibrating the world: descriptor noise and LoRA scale
======================================================

Two knobs decide whether the reference experiment is informative:

* ``eta`` adds noise to the frozen class descriptors. The untuned model's
  accuracy on the streamed classes should sit in the 60-75% band, the
  analog of a decent but imperfect pretrained zero-shot classifier.
* ``pet_scale`` (LoRA alpha / rank) sets how far the low-rank delta moves per
  Adam step at the fixed learning rate 5e-4. Too small and neither strategy
  learns anything within a single pass.

Run: python3 demos/02_calibrate_eta.py
"""

from dataclasses import replace

import numpy as np

from sitlab import train_online
from sitlab.reference import MODEL, SEEDS, TRAIN, build_world
from sitlab.trainer import evaluate


def frozen_accuracy(eta, seed):
    w = build_world(seed, eta=eta)
    ids = list(w.dataset.stream_classes)
    X, Y = w.dataset.test_subset(ids)
    return evaluate(w.params, ids, w.dataset.descriptor_matrix(ids), X, Y)[0]


print("eta    frozen accuracy on streamed classes (mean over seeds 1-5)")
for eta in (0.0, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.6):
    accs = [frozen_accuracy(eta, s) for s in SEEDS]
    band = "<- in band" if 0.60 <= np.mean(accs) <= 0.75 else ""
    print(f"{eta:<6} {np.mean(accs):.3f} +- {np.std(accs, ddof=1):.3f}  {band}")

# with eta fixed at 0.25, sweep the LoRA scale and look at both strategies
print("\npet_scale   SIT A_last   AIT A_last   gap")
for scale in (1.0, 4.0, 8.0, 16.0, 32.0):
    model = replace(MODEL, pet_scale=scale)
    res = {"sit": [], "ait": []}
    for seed in SEEDS:
        w = build_world(seed, model=model)
        for s in res:
            art = train_online(w.dataset, w.schedule, w.params, replace(TRAIN, strategy=s))
            res[s].append(art.a_last)
    sit, ait = np.mean(res["sit"]), np.mean(res["ait"])
    print(f"{scale:<11} {sit:.4f}       {ait:.4f}       {sit - ait:+.4f}")

# at small scales AIT is slightly ahead: the deltas move so little that the extra
# negatives act as mild regularization. The SIT advantage only appears once the
# updates are large enough for AIT's push on absent classes to bias predictions
# toward recent ones. 16 gives the clearest separation and is the reference
# value, so the reference gap is conditional on this choice.
