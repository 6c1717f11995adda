"""
Which encoder to tune: image path, text path, or both
=====================================================

With SIT on the reference stream, tune only the image-side LoRA, only the
text-side LoRA, or both, and compare stream accuracy (A_auc) against
held-out zero-shot accuracy after training.

The held-out classes come from the same Gaussian family as the streamed
ones, so there is no domain shift to protect against. With only 5 held-out
classes x 20 test samples the per-seed zero-shot numbers are noisy; pass a
larger seed count to see the averages settle.

Run: python3 demos/04_tuning_paths.py [num_seeds]
"""

import sys
from dataclasses import replace

import numpy as np

from sitlab import train_online
from sitlab.reference import MODEL, TRAIN, build_world

n_seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 5
seeds = range(1, n_seeds + 1)
variants = {"both": {}, "image only": dict(tune_text=False), "text only": dict(tune_image=False)}

res = {}
for name, kw in variants.items():
    model = replace(MODEL, **kw)
    rows = []
    for seed in seeds:
        w = build_world(seed, model=model)
        art = train_online(w.dataset, w.schedule, w.params, TRAIN)
        rows.append((art.a_auc, art.a_last, art.zero_shot_before, art.zero_shot_after))
    res[name] = np.array(rows)

print(f"{n_seeds} seeds, mean (std)")
print(f"{'variant':<12}{'A_auc':>16}{'A_last':>16}{'zs before':>12}{'zs after':>16}")
for name, r in res.items():
    m, s = r.mean(axis=0), r.std(axis=0, ddof=1) if len(r) > 1 else np.zeros(4)
    print(f"{name:<12}{m[0]:>9.4f} ({s[0]:.3f}){m[1]:>9.4f} ({s[1]:.3f}){m[2]:>12.3f}"
          f"{m[3]:>9.3f} ({s[3]:.3f})")

img, txt = res["image only"], res["text only"]
d_zs = txt[:, 3] - img[:, 3]
d_auc = img[:, 0] - txt[:, 0]
print(f"\nzero-shot after, text - image: mean {d_zs.mean():+.4f} (se {d_zs.std(ddof=1) / np.sqrt(len(d_zs)):.4f}),"
      f" >= 0 on {np.sum(d_zs >= 0)}/{len(d_zs)} seeds")
print(f"A_auc, image - text:           mean {d_auc.mean():+.4f} (se {d_auc.std(ddof=1) / np.sqrt(len(d_auc)):.4f}),"
      f" >= 0 on {np.sum(d_auc >= 0)}/{len(d_auc)} seeds")
