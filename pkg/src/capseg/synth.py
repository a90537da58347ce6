"""Deterministic synthetic myocardium cross-sections with exact ground truth.

A scene is built from a seeded Voronoi partition of the frame:

1. Cell sites are drawn uniformly, then Lloyd-relaxed on the pixel grid
   a configurable number of iterations so cells are evenly packed.
2. A pixel belongs to the interior of cell ``i`` when site ``i`` is its
   nearest site and the second-nearest site is at least
   ``membrane_thickness_px`` farther away; a band of the same thickness
   along the frame edge is also membrane. Each interior is an
   intersection of convex regions, hence convex.
3. Capillaries are small ellipses carved out of cell interiors near the
   junction points where three cells meet (or near rim points for cells
   short on junctions). A one-pixel rim around each capillary is removed
   from the muscle cell and rendered bright, like the membranes.
4. The rendered image is bright membranes and rims over dim interiors
   plus seeded Gaussian noise, quantized to 16-bit at the very end.

Everything derives from ``numpy.random.default_rng`` (PCG64) seeded per
scene and per attempt, and geometric parameters are snapped to a 1/256
pixel grid before any pixel test, so a spec and seed always reproduce
bit-identical output. A scene whose capillaries cannot be placed under
the validity rules is retried with a derived seed a bounded number of
times, then reported as infeasible.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .instances import Category, InstanceMask, LabelImage
from .masks import mask_tight_box, rle_encode
from .prompts import Detection
from . import io as dataset_io

__all__ = ["SceneSpec", "SyntheticScene", "generate_scene", "scene_to_dataset"]

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_MAX_ATTEMPTS = 20
# capillary size rules relative to muscle cells
_CAP_MAX_FRACTION_OF_MEAN_CM = 0.05


class _RetryScene(Exception):
    """Internal: this attempt produced an invalid scene; reseed and retry."""


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of one synthetic scene; all randomness comes from ``seed``."""

    width: int = 256
    height: int = 256
    cm_count_range: tuple[int, int] = (6, 10)
    capillaries_per_cm_range: tuple[int, int] = (2, 4)
    membrane_thickness_px: int = 3
    relaxation_iters: int = 1
    seed: int = 0
    membrane_bright_level: int = 52000
    interior_level: int = 12000
    noise_sd: float = 1200.0

    def __post_init__(self):
        if self.width < 32 or self.height < 32:
            raise ValueError("scene must be at least 32x32 pixels")
        lo, hi = self.cm_count_range
        if not 1 <= lo <= hi:
            raise ValueError(f"cm_count_range must satisfy 1 <= lo <= hi, got {self.cm_count_range}")
        clo, chi = self.capillaries_per_cm_range
        if not 0 <= clo <= chi:
            raise ValueError(
                f"capillaries_per_cm_range must satisfy 0 <= lo <= hi, "
                f"got {self.capillaries_per_cm_range}"
            )
        if self.membrane_thickness_px < 1:
            raise ValueError("membrane_thickness_px must be >= 1")
        if self.relaxation_iters < 0:
            raise ValueError("relaxation_iters must be >= 0")
        for name in ("membrane_bright_level", "interior_level"):
            level = getattr(self, name)
            if not 0 < level <= 65535:
                raise ValueError(f"{name} must be a positive 16-bit value")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")


@dataclass
class SyntheticScene:
    """Rendered image plus exact ground truth for one synthetic frame."""

    image: np.ndarray
    truth: LabelImage
    spec: SceneSpec

    def instances(self) -> list[InstanceMask]:
        return self.truth.instances()

    def detections(self) -> list[Detection]:
        """Ground-truth detections: tight boxes, true categories, confidence 1."""
        out = []
        for det_id, inst_id in enumerate(self.truth.instance_ids()):
            out.append(
                Detection(
                    box=mask_tight_box(self.truth.instance_mask(inst_id)),
                    category=self.truth.categories[inst_id],
                    confidence=1.0,
                    id=det_id,
                )
            )
        return out


def _snap(values):
    """Snap coordinates to a 1/256-pixel grid for cross-platform stability."""
    return np.round(np.asarray(values, dtype=np.float64) * 256.0) / 256.0


def _pixel_centers(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    cx = np.arange(width, dtype=np.float64) + 0.5
    cy = np.arange(height, dtype=np.float64) + 0.5
    return cx, cy


def _site_distances(sites: np.ndarray, width: int, height: int) -> np.ndarray:
    """Distance from every pixel center to every site: shape [n, H, W]."""
    cx, cy = _pixel_centers(width, height)
    dx = cx[None, None, :] - sites[:, 0, None, None]
    dy = cy[None, :, None] - sites[:, 1, None, None]
    return np.sqrt(dx * dx + dy * dy)


def _lloyd_relax(sites: np.ndarray, width: int, height: int, iters: int) -> np.ndarray:
    cx, cy = _pixel_centers(width, height)
    for _ in range(iters):
        dist = _site_distances(sites, width, height)
        nearest = np.argmin(dist, axis=0)
        new_sites = sites.copy()
        for i in range(len(sites)):
            rows, cols = np.nonzero(nearest == i)
            if rows.size:
                new_sites[i] = (cols.mean() + 0.5, rows.mean() + 0.5)
        sites = _snap(new_sites)
    return sites


def _connected(mask: np.ndarray) -> bool:
    _, n = ndimage.label(mask, structure=_CROSS)
    return n == 1


def _centroid_pixel_inside(mask: np.ndarray) -> bool:
    """The pixel under the tight-box centroid must belong to the instance."""
    c = mask_tight_box(mask).centroid()
    return bool(mask[int(np.floor(c.y)), int(np.floor(c.x))])


def _cell_interiors(spec: SceneSpec, sites: np.ndarray) -> np.ndarray:
    """Label map of convex cell interiors, 1-based; 0 is membrane."""
    n = len(sites)
    dist = _site_distances(sites, spec.width, spec.height)
    nearest = np.argmin(dist, axis=0)
    d_sorted = np.sort(dist, axis=0)
    d1 = d_sorted[0]
    d2 = d_sorted[1] if n > 1 else np.full_like(d1, np.inf)
    cx, cy = _pixel_centers(spec.width, spec.height)
    edge = np.minimum.outer(
        np.minimum(cy, spec.height - cy), np.minimum(cx, spec.width - cx)
    )
    interior = (d2 - d1 >= spec.membrane_thickness_px) & (edge >= spec.membrane_thickness_px)
    labels = np.where(interior, nearest + 1, 0).astype(np.int32)
    return labels


def _junction_points(spec: SceneSpec, sites: np.ndarray) -> list[tuple[float, float]]:
    """Approximate Voronoi vertices: pixels where three regions nearly meet."""
    n = len(sites)
    if n < 3:
        return []
    dist = _site_distances(sites, spec.width, spec.height)
    d_sorted = np.sort(dist, axis=0)
    near_triple = d_sorted[2] - d_sorted[0] <= 1.5
    comp, n_comp = ndimage.label(near_triple, structure=np.ones((3, 3), dtype=bool))
    points = []
    for idx in range(1, n_comp + 1):
        rows, cols = np.nonzero(comp == idx)
        points.append((float(_snap(cols.mean() + 0.5)), float(_snap(rows.mean() + 0.5))))
    return points


def _ellipse_mask(
    width: int, height: int, center: tuple[float, float], radii: tuple[float, float], theta: float
) -> np.ndarray:
    cx0, cy0 = center
    ra, rb = radii
    x0 = max(0, int(np.floor(cx0 - max(ra, rb) - 1)))
    x1 = min(width, int(np.ceil(cx0 + max(ra, rb) + 1)))
    y0 = max(0, int(np.floor(cy0 - max(ra, rb) - 1)))
    y1 = min(height, int(np.ceil(cy0 + max(ra, rb) + 1)))
    out = np.zeros((height, width), dtype=bool)
    if x0 >= x1 or y0 >= y1:
        return out
    xs = np.arange(x0, x1, dtype=np.float64) + 0.5 - cx0
    ys = np.arange(y0, y1, dtype=np.float64) + 0.5 - cy0
    gx, gy = np.meshgrid(xs, ys)
    ct, st = np.cos(theta), np.sin(theta)
    u = gx * ct + gy * st
    v = -gx * st + gy * ct
    out[y0:y1, x0:x1] = (u / ra) ** 2 + (v / rb) ** 2 <= 1.0
    return out


def _rim_candidates(mask: np.ndarray) -> list[tuple[float, float]]:
    """Eight compass-direction rim points of a cell, for junction-poor cells."""
    box = mask_tight_box(mask)
    g = box.centroid()
    rows, cols = np.nonzero(mask)
    px = cols + 0.5
    py = rows + 0.5
    points = []
    for k in range(8):
        theta = 2.0 * np.pi * k / 8.0
        d = (px - g.x) * np.cos(theta) + (py - g.y) * np.sin(theta)
        j = int(np.argmax(d))
        points.append((float(_snap(px[j])), float(_snap(py[j]))))
    return points


def _place_capillaries(
    spec: SceneSpec,
    rng: np.random.Generator,
    cm_labels: np.ndarray,
    junctions: list[tuple[float, float]],
) -> list[tuple[int, np.ndarray]]:
    """Carve seeded elliptical capillaries into cells; returns (cell_label, mask).

    Raises _RetryScene when a cell cannot host its drawn capillary count.
    """
    clo, chi = spec.capillaries_per_cm_range
    cell_ids = sorted(int(v) for v in np.unique(cm_labels) if v != 0)
    carved = np.zeros_like(cm_labels, dtype=bool)  # capillaries plus their rims
    placed: list[tuple[int, np.ndarray]] = []
    for cell in cell_ids:
        cm_mask = cm_labels == cell
        want = int(rng.integers(clo, chi + 1))
        if want == 0:
            continue
        box = mask_tight_box(cm_mask)
        g = box.centroid()
        # candidate anchor points: adjacent junctions by angle, then rim points
        adjacent = [
            p
            for p in junctions
            if _anchor_near_cell(p, cm_mask, spec.membrane_thickness_px)
        ]
        adjacent.sort(key=lambda p: np.arctan2(p[1] - g.y, p[0] - g.x))
        candidates = adjacent + _rim_candidates(cm_mask)
        allowed = ndimage.binary_erosion(cm_mask, structure=_CROSS, iterations=2)
        start = int(rng.integers(0, len(candidates)))
        done = 0
        used: list[tuple[float, float]] = []
        for offset in range(len(candidates)):
            if done == want:
                break
            anchor = candidates[(start + offset) % len(candidates)]
            if any((anchor[0] - u[0]) ** 2 + (anchor[1] - u[1]) ** 2 < 36.0 for u in used):
                continue
            ra = float(_snap(rng.uniform(2.2, 3.6)))
            rb = float(_snap(rng.uniform(1.8, ra)))
            theta = float(_snap(rng.uniform(0.0, np.pi)))
            ellipse = _try_anchor(
                spec, anchor, g, (ra, rb), theta, allowed, carved
            )
            if ellipse is None:
                continue
            rim = ndimage.binary_dilation(ellipse, structure=_CROSS)
            carved |= rim
            placed.append((cell, ellipse))
            used.append(anchor)
            done += 1
        if done < want:
            raise _RetryScene(f"cell {cell} fits only {done} of {want} capillaries")
    return placed


def _anchor_near_cell(point: tuple[float, float], cm_mask: np.ndarray, margin: int) -> bool:
    h, w = cm_mask.shape
    x = min(max(int(np.floor(point[0])), 0), w - 1)
    y = min(max(int(np.floor(point[1])), 0), h - 1)
    r = margin + 2
    window = cm_mask[max(0, y - r) : y + r + 1, max(0, x - r) : x + r + 1]
    return bool(window.any())


def _try_anchor(
    spec: SceneSpec,
    anchor: tuple[float, float],
    centroid,
    radii: tuple[float, float],
    theta: float,
    allowed: np.ndarray,
    carved: np.ndarray,
) -> np.ndarray | None:
    """Pull an anchor inward until the ellipse fits cleanly, or give up."""
    gx, gy = centroid.x, centroid.y
    dx, dy = gx - anchor[0], gy - anchor[1]
    norm = float(np.hypot(dx, dy))
    if norm == 0.0:
        dx, dy, norm = 1.0, 0.0, 1.0
    max_r = max(radii)
    for pull in (
        spec.membrane_thickness_px + max_r + 2.0,
        spec.membrane_thickness_px + max_r + 5.0,
        spec.membrane_thickness_px + max_r + 9.0,
    ):
        t = min(pull, norm)  # never overshoot the centroid
        center = (
            float(_snap(anchor[0] + dx / norm * t)),
            float(_snap(anchor[1] + dy / norm * t)),
        )
        ellipse = _ellipse_mask(carved.shape[1], carved.shape[0], center, radii, theta)
        if not ellipse.any() or ellipse.sum() < 4:
            continue
        rim = ndimage.binary_dilation(ellipse, structure=_CROSS)
        if not (rim & ~allowed).any() and not (rim & carved).any() and _connected(ellipse):
            return ellipse
    return None


def _validate_scene(truth: LabelImage) -> None:
    """Invariants every generated scene must satisfy, or the attempt retries."""
    cm_areas = []
    cap_areas = []
    for inst in truth.instances():
        if not _connected(inst.mask):
            raise _RetryScene(f"instance {inst.id} is not 4-connected")
        if not _centroid_pixel_inside(inst.mask):
            raise _RetryScene(f"instance {inst.id} does not contain its box centroid")
        if inst.category is Category.CM:
            cm_areas.append(inst.area_px)
        else:
            cap_areas.append(inst.area_px)
    if not cm_areas:
        raise _RetryScene("no muscle cells survived")
    if cap_areas:
        mean_cm = sum(cm_areas) / len(cm_areas)
        if max(cap_areas) >= _CAP_MAX_FRACTION_OF_MEAN_CM * mean_cm:
            raise _RetryScene("a capillary is too large relative to the mean cell")
        if max(cap_areas) >= min(cm_areas):
            raise _RetryScene("a capillary is not smaller than every cell")


def _render(spec: SceneSpec, truth: LabelImage, rng: np.random.Generator) -> np.ndarray:
    """Bright membranes and rims, dim interiors, Gaussian noise, 16-bit quantize."""
    img = np.full((spec.height, spec.width), float(spec.membrane_bright_level))
    img[truth.labels != 0] = float(spec.interior_level)
    if spec.noise_sd > 0:
        img += rng.normal(0.0, spec.noise_sd, size=img.shape)
    return np.clip(np.rint(img), 0, 65535).astype(np.uint16)


def generate_scene(spec: SceneSpec) -> SyntheticScene:
    """Build one validated scene; deterministic for a given spec."""
    last_reason = ""
    for attempt in range(_MAX_ATTEMPTS):
        rng = np.random.default_rng([spec.seed, attempt])
        try:
            return _generate_once(spec, rng)
        except _RetryScene as exc:
            last_reason = str(exc)
    raise RuntimeError(
        f"scene spec is infeasible after {_MAX_ATTEMPTS} attempts "
        f"(seed {spec.seed}): {last_reason}"
    )


def _generate_once(spec: SceneSpec, rng: np.random.Generator) -> SyntheticScene:
    lo, hi = spec.cm_count_range
    n_cm = int(rng.integers(lo, hi + 1))
    margin = 2.0 * spec.membrane_thickness_px + 2.0
    sites = np.column_stack(
        [
            rng.uniform(margin, spec.width - margin, size=n_cm),
            rng.uniform(margin, spec.height - margin, size=n_cm),
        ]
    )
    sites = _lloyd_relax(_snap(sites), spec.width, spec.height, spec.relaxation_iters)

    cm_labels = _cell_interiors(spec, sites)
    present = [int(v) for v in np.unique(cm_labels) if v != 0]
    if len(present) != n_cm:
        raise _RetryScene("a cell interior vanished under the membrane rule")

    junctions = _junction_points(spec, sites)
    caps = _place_capillaries(spec, rng, cm_labels, junctions)

    carved = np.zeros_like(cm_labels, dtype=bool)
    for _, ellipse in caps:
        carved |= ndimage.binary_dilation(ellipse, structure=_CROSS)

    labels = np.zeros_like(cm_labels)
    categories: dict[int, Category] = {}
    for new_id, cell in enumerate(present, start=1):
        labels[(cm_labels == cell) & ~carved] = new_id
        categories[new_id] = Category.CM
    next_id = len(present) + 1
    for _, ellipse in caps:
        labels[ellipse] = next_id
        categories[next_id] = Category.CAP
        next_id += 1

    truth = LabelImage(labels=labels, categories=categories)
    _validate_scene(truth)
    image = _render(spec, truth, rng)
    return SyntheticScene(image=image, truth=truth, spec=spec)


# physical scale of the reference acquisition: 42.5 um over 512 px
DEFAULT_PIXEL_SIZE_UM = 42.5 / 512


def scene_to_dataset(
    scenes: list[SyntheticScene],
    out_dir: str | Path,
    pixel_size_um: float = DEFAULT_PIXEL_SIZE_UM,
) -> dataset_io.DatasetManifest:
    """Write scenes as a dataset directory: ``dataset.json`` plus ``<id>.png``.

    Image ids are scene positions; annotation ids run 1, 2, ... across
    the whole dataset in (image, instance) order.
    """
    if not scenes:
        raise ValueError("no scenes to write")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    images = []
    annotations = []
    next_ann = 1
    for image_id, scene in enumerate(scenes):
        h, w = scene.image.shape
        file_name = f"{image_id}.png"
        dataset_io.save_image_png(scene.image, out / file_name)
        images.append(
            dataset_io.ImageRecord(
                id=image_id,
                file=file_name,
                width=w,
                height=h,
                fov_um=(w * pixel_size_um, h * pixel_size_um),
            )
        )
        for inst in scene.instances():
            box = inst.tight_box()
            annotations.append(
                dataset_io.AnnotationRecord(
                    id=next_ann,
                    image_id=image_id,
                    category_id=inst.category.value,
                    bbox=(box.x_min, box.y_min, box.width, box.height),
                    rle=rle_encode(inst.mask),
                )
            )
            next_ann += 1
    manifest = dataset_io.DatasetManifest(images=images, annotations=annotations)
    dataset_io.save_manifest(manifest, out / "dataset.json")
    return manifest
