"""Synthetic co-saliency groups: flat-colored shapes on gray value-noise backgrounds.

A category is a (shape, color) pair.  Every image of a group shows exactly one
instance of the group category (its pixels form the mask) plus a few
distractor instances of other categories.  Objects never overlap, so the mask
is exactly the rasterized co-salient instance.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .core import ConfigError, DataError, DatasetManifest, GroupEntry, ImageEntry, save_manifest, save_map

SHAPES = ("circle", "rectangle", "triangle", "diamond", "cross", "ring")

# channel levels 16/128/240 put every color in its own 8x8x8 RGB bin and away from gray
PALETTE = {
    "red": (240, 16, 16),
    "green": (16, 240, 16),
    "blue": (16, 16, 240),
    "yellow": (240, 240, 16),
    "cyan": (16, 240, 240),
    "magenta": (240, 16, 240),
    "orange": (240, 128, 16),
    "purple": (128, 16, 240),
    "lime": (128, 240, 16),
    "rose": (240, 16, 128),
    "spring": (16, 240, 128),
    "azure": (16, 128, 240),
}
COLORS = tuple(PALETTE)

BACKGROUND_LEVEL = 128.0
BACKGROUND_AMPLITUDE = 20.0
MAX_PLACEMENT_TRIES = 200
MAX_IMAGE_TRIES = 20


@dataclass(frozen=True)
class SynthConfig:
    num_categories: int = 12
    groups_per_category: int = 1
    group_size: int = 10
    image_size: int = 64
    distractor_count_range: tuple[int, int] = (0, 1)
    seed: int = 0
    object_scale: tuple[float, float] = (0.30, 0.45)
    distractor_scale: tuple[float, float] = (0.12, 0.20)

    def __post_init__(self):
        if not 1 <= self.num_categories <= len(SHAPES) * len(COLORS):
            raise ConfigError(
                f"num_categories must be in [1, {len(SHAPES) * len(COLORS)}], got {self.num_categories}"
            )
        lo, hi = self.distractor_count_range
        if not 0 <= lo <= hi:
            raise ConfigError(f"bad distractor_count_range {self.distractor_count_range}")
        if hi > self.num_categories - 1:
            raise ConfigError("more distractors per image than other categories")
        if self.group_size < 1 or self.groups_per_category < 1 or self.image_size < 8:
            raise ConfigError("group_size, groups_per_category must be >= 1 and image_size >= 8")


def category_name(index: int) -> str:
    """Colors cycle fastest, so the first 12 categories all differ in color."""
    color = COLORS[index % len(COLORS)]
    shape = SHAPES[index // len(COLORS)]
    return f"{color}-{shape}"


def category_parts(name: str) -> tuple[str, str]:
    color, shape = name.split("-", 1)
    return shape, color


def categories(n: int) -> list[str]:
    return [category_name(i) for i in range(n)]


def shape_mask(shape: str, h: int, w: int) -> np.ndarray:
    """Boolean footprint of ``shape`` filling an ``h x w`` box."""
    yy, xx = np.mgrid[0:h, 0:w]
    y = (yy + 0.5) / h  # normalized to (0, 1)
    x = (xx + 0.5) / w
    if shape == "rectangle":
        return np.ones((h, w), dtype=bool)
    if shape == "circle":
        return (x - 0.5) ** 2 + (y - 0.5) ** 2 <= 0.25
    if shape == "triangle":
        return np.abs(x - 0.5) <= y / 2
    if shape == "diamond":
        return np.abs(x - 0.5) + np.abs(y - 0.5) <= 0.5
    if shape == "cross":
        return (np.abs(x - 0.5) <= 1 / 6) | (np.abs(y - 0.5) <= 1 / 6)
    if shape == "ring":
        r2 = (x - 0.5) ** 2 + (y - 0.5) ** 2
        return (r2 <= 0.25) & (r2 >= 0.0625)
    raise ConfigError(f"unknown shape {shape!r}")


def value_noise(size: int, rng: np.random.Generator, cells: int = 5) -> np.ndarray:
    coarse = rng.uniform(-1.0, 1.0, size=(cells + 1, cells + 1))
    coords = np.linspace(0, cells, size)
    rr, cc = np.meshgrid(coords, coords, indexing="ij")
    return ndimage.map_coordinates(coarse, [rr, cc], order=1)


def _place(boxes, h, w, size, rng):
    for _ in range(MAX_PLACEMENT_TRIES):
        r = int(rng.integers(0, size - h + 1))
        c = int(rng.integers(0, size - w + 1))
        # 2-pixel gap between bounding boxes
        if all(r + h + 2 <= r2 or r2 + h2 + 2 <= r or c + w + 2 <= c2 or c2 + w2 + 2 <= c
               for r2, c2, h2, w2 in boxes):
            return r, c
    return None


def render_image(category: str, distractors: list[str], config: SynthConfig, rng: np.random.Generator):
    """Render one image; returns ``(rgb uint8, mask bool)``."""
    size = config.image_size
    for _ in range(MAX_IMAGE_TRIES):
        img = BACKGROUND_LEVEL + BACKGROUND_AMPLITUDE * value_noise(size, rng)
        img = np.repeat(img[:, :, None], 3, axis=2)
        mask = np.zeros((size, size), dtype=bool)
        boxes = []
        ok = True
        for k, cat in enumerate([category, *distractors]):
            lo, hi = config.object_scale if k == 0 else config.distractor_scale
            side = max(4, int(round(rng.uniform(lo, hi) * size)))
            shape, color = category_parts(cat)
            h = w = side
            if shape == "rectangle":
                h = max(3, int(round(side * rng.uniform(0.6, 1.0))))
            pos = _place(boxes, h, w, size, rng)
            if pos is None:
                ok = False
                break
            r, c = pos
            boxes.append((r, c, h, w))
            fp = shape_mask(shape, h, w)
            img[r:r + h, c:c + w][fp] = PALETTE[color]
            if k == 0:
                mask[r:r + h, c:c + w] = fp
        if ok:
            return np.clip(np.rint(img), 0, 255).astype(np.uint8), mask
    raise DataError(f"cannot place {1 + len(distractors)} objects in a {size}x{size} image")


def generate_synthetic_dataset(config: SynthConfig, out_dir, workers: int = 1) -> DatasetManifest:
    """Render every group into ``out_dir`` and save ``out_dir/manifest.json``.

    Layout: ``images/<group>/<image>.png`` (RGB), ``masks/<group>/<image>.png``.
    Each image draws from its own generator seeded with
    ``(seed, group index, image index)``.
    """
    out_dir = Path(out_dir)
    cats = categories(config.num_categories)
    plan = []
    for ci, cat in enumerate(cats):
        for g in range(config.groups_per_category):
            gid = f"{cat}-{g}"
            gi = ci * config.groups_per_category + g
            for j in range(config.group_size):
                plan.append((gi, gid, ci, j))

    def render(job):
        gi, gid, ci, j = job
        rng = np.random.default_rng([config.seed, gi, j])
        lo, hi = config.distractor_count_range
        n_d = int(rng.integers(lo, hi + 1))
        others = [c for i, c in enumerate(cats) if i != ci]
        distractors = [others[int(i)] for i in rng.choice(len(others), size=n_d, replace=False)]
        rgb, mask = render_image(cats[ci], distractors, config, rng)
        image_id = f"{j:03d}"
        img_rel = f"images/{gid}/{image_id}.png"
        mask_rel = f"masks/{gid}/{image_id}.png"
        (out_dir / img_rel).parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(rgb).save(out_dir / img_rel)
        save_map(mask, out_dir / mask_rel)
        size = config.image_size
        return ImageEntry(image_id, img_rel, mask_rel, size, size, frozenset([cats[ci], *distractors]))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(render, plan))
    else:
        entries = [render(job) for job in plan]

    groups = []
    for ci, cat in enumerate(cats):
        for g in range(config.groups_per_category):
            gi = ci * config.groups_per_category + g
            ims = entries[gi * config.group_size:(gi + 1) * config.group_size]
            groups.append(GroupEntry(f"{cat}-{g}", cat, tuple(ims)))
    manifest = DatasetManifest(root=".", groups=tuple(groups), base=str(out_dir.resolve()))
    save_manifest(manifest, out_dir / "manifest.json")
    return manifest
