"""
Seeded synthetic tissue scenes
==============================

A scene is a field of polygonal muscle cells separated by a bright
membrane band, with small capillary rings tucked into the junctions
between cells. Everything is derived from one integer seed, so the same
spec always renders the same image and the same ground-truth labels.
"""

import tempfile
from pathlib import Path

import numpy as np

from capseg import SceneSpec, generate_scene, scene_to_dataset, validate_manifest

# Build one scene. The spec is plain data; the seed is part of it.
spec = SceneSpec(width=256, height=256, cm_count_range=(6, 10), capillaries_per_cm_range=(2, 4), seed=42)
scene = generate_scene(spec)

instances = scene.instances()
cm = [inst for inst in instances if inst.category.name == "CM"]
caps = [inst for inst in instances if inst.category.name == "CAP"]
print(f"scene with seed {spec.seed}: {len(cm)} muscle cells, {len(caps)} capillaries")
print(f"image: {scene.image.shape}, dtype {scene.image.dtype}, "
      f"intensity range {scene.image.min()}..{scene.image.max()}")

# Every capillary is smaller than every muscle cell, by construction.
smallest_cm = min(inst.mask.sum() for inst in cm)
largest_cap = max(inst.mask.sum() for inst in caps)
print(f"smallest cell {smallest_cm} px, largest capillary {largest_cap} px")

# The same seed reproduces the scene bit for bit; a different seed does not.
again = generate_scene(spec)
assert np.array_equal(again.image, scene.image)
assert np.array_equal(again.truth.labels, scene.truth.labels)
other = generate_scene(SceneSpec(seed=43))
print("same seed identical:", np.array_equal(again.image, scene.image),
      "| different seed identical:", np.array_equal(other.image, scene.image))

# A list of scenes becomes an on-disk dataset: one manifest plus one
# 16-bit PNG per scene, annotations carrying boxes and run-length masks.
with tempfile.TemporaryDirectory() as tmp:
    manifest = scene_to_dataset([scene, other], tmp)
    problems = validate_manifest(manifest)
    files = sorted(p.name for p in Path(tmp).iterdir())
    print(f"dataset files: {files}")
    print(f"annotations: {len(manifest.annotations)}, validator findings: {problems}")
