"""Prompt generation: worked 3-box example, mode laws, brute-force oracle.

The oracle is an independent double loop over (target, candidate) pairs
testing centroid containment directly; the vectorized generator must
match it point for point, label for label, in order.
"""

import numpy as np
import pytest

from capseg import (
    BoundingBox,
    Category,
    Detection,
    LabeledPoint,
    Prompt,
    PromptMode,
    generate_prompts,
    prompt_stats,
)


def det(x0, y0, x1, y1, det_id, category=Category.CM, confidence=0.9):
    return Detection(
        box=BoundingBox(x0, y0, x1, y1), category=category, confidence=confidence, id=det_id
    )


def brute_force_prompts(detections, mode):
    """Independent containment oracle: double loop, no vectorization."""
    out = []
    for i, d in enumerate(detections):
        points = []
        if mode is not PromptMode.BOX_ONLY:
            for j, other in enumerate(detections):
                c = other.box.centroid()
                if d.box.contains(c):
                    points.append(LabeledPoint(point=c, label=1 if j == i else 0))
        out.append(
            Prompt(
                box=None if mode is PromptMode.POINTS_ONLY else d.box,
                points=tuple(points),
                category=d.category,
                source_id=d.id,
            )
        )
    return out


def random_detections(rng, n, frame=100.0):
    dets = []
    for i in range(n):
        x0 = rng.uniform(0, frame - 2)
        y0 = rng.uniform(0, frame - 2)
        w = rng.uniform(1, (frame - x0) / 2)
        h = rng.uniform(1, (frame - y0) / 2)
        dets.append(
            det(
                x0,
                y0,
                x0 + w,
                y0 + h,
                det_id=i,
                category=Category.CM if rng.random() < 0.5 else Category.CAP,
                confidence=float(rng.uniform(0, 1)),
            )
        )
    return dets


class TestWorkedExample:
    # B1=[0,0,10,10], B2=[2,2,12,12], B3=[20,20,30,30]
    def setup_method(self):
        self.dets = [det(0, 0, 10, 10, 0), det(2, 2, 12, 12, 1), det(20, 20, 30, 30, 2)]

    def test_box_and_points_sets(self):
        s1, s2, s3 = generate_prompts(self.dets, PromptMode.BOX_AND_POINTS)
        assert {(p.point.x, p.point.y, p.label) for p in s1.points} == {(5, 5, 1), (7, 7, 0)}
        assert {(p.point.x, p.point.y, p.label) for p in s2.points} == {(7, 7, 1), (5, 5, 0)}
        assert {(p.point.x, p.point.y, p.label) for p in s3.points} == {(25, 25, 1)}

    def test_boxes_and_ids_preserved(self):
        prompts = generate_prompts(self.dets, PromptMode.BOX_AND_POINTS)
        assert [p.source_id for p in prompts] == [0, 1, 2]
        assert [p.box for p in prompts] == [d.box for d in self.dets]

    def test_stats_fraction(self):
        prompts = generate_prompts(self.dets, PromptMode.BOX_AND_POINTS)
        st = prompt_stats(prompts)
        assert st.fraction_with_negative == 2 / 3
        assert st.negatives_per_prompt == (1, 1, 0)


class TestModes:
    def test_single_detection_points(self):
        (p,) = generate_prompts([det(0, 0, 10, 10, 0)], PromptMode.BOX_AND_POINTS)
        assert p.points == (LabeledPoint(point=p.box.centroid(), label=1),)

    def test_box_only_empty_points(self):
        rng = np.random.default_rng(21)
        dets = random_detections(rng, 12)
        for p in generate_prompts(dets, PromptMode.BOX_ONLY):
            assert p.points == ()
            assert p.box is not None

    def test_points_only_no_box(self):
        rng = np.random.default_rng(22)
        dets = random_detections(rng, 12)
        for p in generate_prompts(dets, PromptMode.POINTS_ONLY):
            assert p.box is None

    def test_mode_consistency(self):
        # BoxAndPoints restricted to points == PointsOnly; to boxes == BoxOnly
        rng = np.random.default_rng(23)
        dets = random_detections(rng, 15)
        full = generate_prompts(dets, PromptMode.BOX_AND_POINTS)
        points_only = generate_prompts(dets, PromptMode.POINTS_ONLY)
        box_only = generate_prompts(dets, PromptMode.BOX_ONLY)
        assert [p.points for p in full] == [p.points for p in points_only]
        assert [p.box for p in full] == [p.box for p in box_only]

    def test_empty_detections(self):
        assert generate_prompts([], PromptMode.BOX_AND_POINTS) == []

    def test_duplicate_ids_rejected(self):
        dets = [det(0, 0, 10, 10, 3), det(20, 20, 30, 30, 3)]
        with pytest.raises(ValueError, match="duplicate"):
            generate_prompts(dets, PromptMode.BOX_AND_POINTS)


class TestOracleEquivalence:
    @pytest.mark.parametrize("mode", list(PromptMode))
    def test_random_scenes_match_oracle(self, mode):
        rng = np.random.default_rng(24)
        for _ in range(100):
            dets = random_detections(rng, int(rng.integers(1, 51)))
            assert generate_prompts(dets, mode) == brute_force_prompts(dets, mode)

    def test_self_inclusion_and_exclusivity(self):
        rng = np.random.default_rng(25)
        for _ in range(50):
            dets = random_detections(rng, int(rng.integers(1, 30)))
            for d, prompt in zip(dets, generate_prompts(dets, PromptMode.BOX_AND_POINTS)):
                positives = [lp for lp in prompt.points if lp.label == 1]
                assert len(positives) == 1
                assert positives[0].point == d.box.centroid()
                seen = [(lp.point.x, lp.point.y, lp.label) for lp in prompt.points]
                assert len(seen) == len(set(seen))
                for lp in prompt.points:
                    assert d.box.contains(lp.point)


class TestEdgeGeometry:
    def test_identical_boxes_full_mutual_containment(self):
        dets = [det(0, 0, 10, 10, i) for i in range(5)]
        prompts = generate_prompts(dets, PromptMode.BOX_AND_POINTS)
        for p in prompts:
            assert p.negative_count() == 4
        assert prompt_stats(prompts).fraction_with_negative == 1.0

    def test_coincident_centroids_both_kept(self):
        # concentric boxes share a centroid; both points appear with distinct labels
        dets = [det(0, 0, 10, 10, 0), det(2, 2, 8, 8, 1)]
        s1, s2 = generate_prompts(dets, PromptMode.BOX_AND_POINTS)
        assert [lp.label for lp in s1.points] == [1, 0]
        assert [lp.label for lp in s2.points] == [0, 1]
        assert s1.points[0].point == s1.points[1].point

    def test_centroid_on_boundary_included(self):
        # centroid of the second box lies exactly on the first box's edge
        dets = [det(0, 0, 10, 10, 0), det(8, 0, 12, 10, 1)]
        s1, _ = generate_prompts(dets, PromptMode.BOX_AND_POINTS)
        assert (10.0, 5.0, 0) in {(p.point.x, p.point.y, p.label) for p in s1.points}

    def test_category_agnostic_negatives(self):
        # a capillary centroid inside a CM box becomes a negative point
        dets = [
            det(0, 0, 20, 20, 0, category=Category.CM),
            det(8, 8, 12, 12, 1, category=Category.CAP),
        ]
        s1, _ = generate_prompts(dets, PromptMode.BOX_AND_POINTS)
        assert s1.negative_count() == 1
