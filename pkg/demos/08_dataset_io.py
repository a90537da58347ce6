"""
On-disk artifacts and their guarantees
======================================

Every stage communicates through files with fixed schemas: a dataset
manifest, detection and mask stores, prompt files, CSV reports. The
serializer pins key order, indentation and float formatting, so equal
data always produce equal bytes, and re-saving a loaded file reproduces
it exactly. That byte discipline is what makes pipeline reruns
comparable with a plain file hash.
"""

import tempfile
from pathlib import Path

import numpy as np

from capseg import (
    AnnotationRecord,
    DatasetManifest,
    ImageRecord,
    load_manifest,
    polygon_to_mask,
    rle_decode,
    rle_encode,
    save_manifest,
    validate_manifest,
)

# A tiny manifest: one 16x16 image, one square cell annotation.
mask = np.zeros((16, 16), dtype=bool)
mask[2:12, 3:13] = True
manifest = DatasetManifest(
    images=[ImageRecord(id=1, file="frame.png", width=16, height=16, fov_um=(4.0, 4.0))],
    annotations=[AnnotationRecord(1, 1, 1, (3.0, 2.0, 10.0, 10.0), rle=rle_encode(mask))],
)

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "dataset.json"
    save_manifest(manifest, path)
    first = path.read_bytes()
    save_manifest(load_manifest(path), path)
    second = path.read_bytes()
    print(f"manifest round-trip byte-identical: {first == second} ({len(first)} bytes)")
    print("validator findings:", validate_manifest(load_manifest(path)))

# Run-length encoding walks the mask column by column and always starts
# with the count of leading background pixels.
rle = rle_encode(mask)
print(f"counts start with {rle.counts[:3]}..., decode matches: "
      f"{np.array_equal(rle_decode(rle), mask)}")

# Polygon annotations are accepted too; rasterization tests each pixel
# center against the ring, so an axis-aligned rectangle lands exactly
# on its integer bounds.
ring = (3.0, 2.0, 13.0, 2.0, 13.0, 12.0, 3.0, 12.0)
from_polygon = polygon_to_mask([ring], 16, 16)
print("polygon raster equals the RLE mask:", np.array_equal(from_polygon, mask))
