"""
Scoring predicted masks against ground truth
============================================

Matching is greedy per category: predictions in confidence order, each
claiming the best still-unclaimed truth whose mask overlap clears the
IoU threshold. Scores are reported at 0.5, 0.75 and averaged over the
0.5:0.95 grid. F1 is the harmonic mean of mAP and mAR.
"""

import numpy as np

from capseg import EvalMode, InstanceMask, Category, evaluate, f1_from, iou_thresholds


def rect(y0, x0, h, w, category=Category.CM, score=1.0, inst_id=0):
    mask = np.zeros((40, 60), dtype=bool)
    mask[y0:y0 + h, x0:x0 + w] = True
    return InstanceMask(mask=mask, category=category, score=score, id=inst_id)


print("threshold grid:", iou_thresholds())

# One truth, one prediction shifted 5 px: overlap 300 px, union 500 px,
# IoU exactly 0.6. It counts as a hit at 0.5, 0.55 and 0.6, a miss at
# the seven higher thresholds, so the range average lands on 0.3.
truth = rect(10, 10, 20, 20)
pred = rect(10, 15, 20, 20)
report = evaluate({1: [truth]}, {1: [pred]})
print(f"IoU 0.6 fixture: mAP@0.5={report.map_at(0.5)}, mAP@0.75={report.map_at(0.75)}, "
      f"mAP@range={report.map_range}")

# Add a spurious second prediction: precision drops, recall stays.
noise = rect(0, 45, 6, 6, score=0.3, inst_id=1)
perfect, extra = rect(10, 10, 20, 20), [rect(10, 10, 20, 20), noise]
report = evaluate({1: [perfect]}, {1: extra})
print(f"one true + one spurious: mAP@0.5={report.map_at(0.5)}, mAR@0.5={report.mar_at(0.5)}")

# Two reporting modes: per-image precision/recall averaged over images,
# or dataset-pooled ranking with an interpolated precision envelope.
# The envelope forgives a low-confidence trailing false positive (full
# recall was already reached at precision 1), so pooled AP stays at 1
# where the per-image ratio above dropped to 0.5.
pooled = evaluate({1: [perfect]}, {1: extra}, mode=EvalMode.POOLED)
print(f"pooled mode: mAP@0.5={pooled.map_at(0.5):.4f}, mAR@0.5={pooled.mar_at(0.5)}")

# f1_from reproduces published headline numbers from their mAP/mAR pairs.
print(f"f1_from(0.824, 0.844) = {f1_from(0.824, 0.844):.4f} (published 0.834)")
print(f"f1_from(0.106, 0.323) = {f1_from(0.106, 0.323):.4f} (published 0.159)")
