"""
Denoising and contrast stretching
=================================

Acquired frames arrive as 16-bit grayscale with sensor noise and a
compressed intensity range. Cleanup is two steps: an adaptive 3x3
smoothing filter that backs off wherever local variance exceeds the
noise floor (so edges survive), then a percentile stretch to the full
16-bit range.
"""

import numpy as np

from capseg import contrast_stretch, preprocess_image, wiener3x3

rng = np.random.default_rng(7)

# A flat field at 20000 counts with Gaussian noise, plus one bright
# structure whose edge should not be smeared away.
image = rng.normal(20000, 300, size=(64, 64)).clip(0, 65535).astype(np.uint16)
image[20:40, 20:40] = 45000

smoothed = wiener3x3(image)
flat = (slice(0, 15), slice(0, 15))
print(f"flat-region spread before {image[flat].std():.1f}, after {smoothed[flat].std():.1f}")
edge_before = int(image[30, 19]) - int(image[30, 20])
edge_after = int(smoothed[30, 19]) - int(smoothed[30, 20])
print(f"edge step before {abs(edge_before)}, after {abs(edge_after)} (mostly intact)")

# The filter is an identity when told there is no noise at all.
assert np.array_equal(wiener3x3(image, noise_var=0.0), image)

# Stretching maps the 1st..99th percentile onto 0..65535; order of
# pixel intensities is preserved, outliers clamp at the ends.
stretched = contrast_stretch(smoothed)
print(f"range before {smoothed.min()}..{smoothed.max()}, after {stretched.min()}..{stretched.max()}")

# preprocess_image chains both with one call.
cleaned = preprocess_image(image)
assert np.array_equal(cleaned, contrast_stretch(wiener3x3(image)))
print("chained preprocessing equals the composition:", True)
