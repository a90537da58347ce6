"""
From detections to segmentation prompts
=======================================

A promptable segmenter wants, per object, a box and a handful of
labeled points. The generator walks every detection and collects the
centroids of all detections that fall inside its box: its own centroid
labeled 1 (foreground), intruding neighbors labeled 0 (background).
Densely packed objects are exactly where those negative points earn
their keep.
"""

from capseg import BoundingBox, Category, Detection, PromptMode, generate_prompts

# Three detections: a big cell whose box swallows a capillary centroid,
# plus a second cell off to the side.
detections = [
    Detection(box=BoundingBox(10, 10, 90, 90), category=Category.CM, confidence=0.94, id=0),
    Detection(box=BoundingBox(60, 60, 80, 80), category=Category.CAP, confidence=0.88, id=1),
    Detection(box=BoundingBox(95, 10, 150, 70), category=Category.CM, confidence=0.91, id=2),
]

prompts = generate_prompts(detections, PromptMode.BOX_AND_POINTS)
for prompt in prompts:
    labels = [(round(p.point.x, 1), round(p.point.y, 1), p.label) for p in prompt.points]
    print(f"detection {prompt.source_id} ({prompt.category.name}): box={prompt.box is not None}, "
          f"points={labels}")

# The first prompt carries a negative point: the capillary's centroid
# (70, 70) lies inside the cell's box, so the segmenter is told to
# steer around it. The capillary's own box contains no intruders.

# The two ablation modes drop one half of the signal each.
points_only = generate_prompts(detections, PromptMode.POINTS_ONLY)
box_only = generate_prompts(detections, PromptMode.BOX_ONLY)
print("points_only boxes:", [p.box for p in points_only])
print("box_only point counts:", [len(p.points) for p in box_only])

# Generation is quadratic in the number of detections (every centroid is
# tested against every box) and never mutates its input.
