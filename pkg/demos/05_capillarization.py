"""
Capillarization measurements and their errors
=============================================

Seven values summarize one field of view: counts of muscle cells and
capillaries, their total areas in square micrometers, and three density
ratios (capillaries per field area, per muscle area, per muscle cell).
Predictions are judged by relative error against the same measurements
on ground truth.
"""

import numpy as np

from capseg import (
    AreaMode,
    Category,
    ErrorAggregation,
    FovSpec,
    InstanceMask,
    aggregate_errors,
    assess,
    measure,
)


def rect(y0, x0, h, w, category, inst_id):
    mask = np.zeros((128, 128), dtype=bool)
    mask[y0:y0 + h, x0:x0 + w] = True
    return InstanceMask(mask=mask, category=category, score=1.0, id=inst_id)


# Field of view: 32 um across 128 px, so each pixel is 0.0625 um^2.
fov = FovSpec(width_um=32.0, height_um=32.0, width_px=128, height_px=128)
print(f"pixel size {fov.pixel_size_um} um, field area {fov.area_um2} um^2")

truth = [
    rect(10, 10, 40, 40, Category.CM, 1),
    rect(60, 60, 40, 40, Category.CM, 2),
    rect(5, 100, 8, 8, Category.CAP, 3),
    rect(100, 5, 8, 8, Category.CAP, 4),
    rect(115, 115, 8, 8, Category.CAP, 5),
]
measured = measure(truth, fov, AreaMode.PER_INSTANCE)
print("truth:", measured.as_dict())

# A model that misses one capillary and under-segments the cells.
predicted = [
    rect(10, 10, 40, 36, Category.CM, 1),
    rect(60, 60, 40, 36, Category.CM, 2),
    rect(5, 100, 8, 8, Category.CAP, 3),
    rect(100, 5, 8, 8, Category.CAP, 4),
]
errors = assess(measure(predicted, fov, AreaMode.PER_INSTANCE), measured)
for name, value in errors.items():
    print(f"  relative error {name}: {value if value is None else round(value, 4)}")

# Across many images the per-image errors are averaged, by magnitude or
# signed, with a sample standard deviation and an exclusion count for
# images where a ratio was undefined.
per_image = [errors, {k: (0.0 if v is None else v * 0.5) for k, v in errors.items()}]
summary = aggregate_errors(per_image, ErrorAggregation.MEAN_ABS)
cap_count = summary["cap_count"]
print(f"cap_count error: mean {cap_count.mean:.4f}, sd {cap_count.sd:.4f}, "
      f"n_used {cap_count.n_used}, n_excluded {cap_count.n_excluded}")
