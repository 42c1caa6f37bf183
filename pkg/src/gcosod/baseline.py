"""Training-free co-saliency baseline.

``single_saliency`` is a per-image color-contrast map (it lights up every
salient object).  ``group_consensus`` pools saliency-weighted color histograms
over a group, and ``co_saliency`` keeps only salient pixels whose color is
common in the group, abstaining with an all-zero map when an image shares no
salient color with the consensus.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .core import DatasetManifest, load_image, prediction_path, save_map

BINS_PER_CHANNEL = 8
NUM_BINS = BINS_PER_CHANNEL ** 3
SALIENT_LEVEL = 0.5
SMOOTH_SIGMA = 1.0


def color_bins(image: np.ndarray) -> np.ndarray:
    """8x8x8 uniform RGB quantization; returns a flat bin index per pixel."""
    q = (np.asarray(image, dtype=np.uint16) * BINS_PER_CHANNEL) // 256
    return (q[..., 0] * BINS_PER_CHANNEL + q[..., 1]) * BINS_PER_CHANNEL + q[..., 2]


def single_saliency(image: np.ndarray) -> np.ndarray:
    """Distance of each pixel color from the image mean color, smoothed and scaled to [0, 1]."""
    rgb = np.asarray(image, dtype=np.float64)
    dist = np.linalg.norm(rgb - rgb.reshape(-1, 3).mean(axis=0), axis=-1)
    dist = ndimage.gaussian_filter(dist, SMOOTH_SIGMA)
    top = dist.max()
    if top <= 1e-9:
        return np.zeros(dist.shape)
    return np.clip(dist / top, 0.0, 1.0)


@dataclass(frozen=True)
class ConsensusModel:
    histogram: np.ndarray
    support: int
    affinity_threshold: float = 0.25

    def affinity(self, bins: np.ndarray) -> np.ndarray:
        """Absolute consensus mass of each bin (max possible value 1)."""
        return self.histogram[bins]


def weighted_histogram(image: np.ndarray, saliency: np.ndarray) -> np.ndarray:
    """Color histogram weighted by saliency, counting only pixels at or above 0.5."""
    w = np.where(saliency >= SALIENT_LEVEL, saliency, 0.0)
    return np.bincount(color_bins(image).ravel(), weights=w.ravel(), minlength=NUM_BINS)


def group_consensus(
    group: Sequence[tuple[np.ndarray, np.ndarray]], affinity_threshold: float = 0.25
) -> ConsensusModel:
    """Average the normalized per-image histograms of images with any salient pixel.

    With no salient pixel anywhere the histogram is uniform.
    """
    acc = np.zeros(NUM_BINS)
    support = 0
    for image, sal in group:
        h = weighted_histogram(image, sal)
        total = h.sum()
        if total > 0:
            acc += h / total
            support += 1
    if support == 0:
        return ConsensusModel(np.full(NUM_BINS, 1.0 / NUM_BINS), 0, affinity_threshold)
    return ConsensusModel(acc / support, support, affinity_threshold)


def best_affinity(image: np.ndarray, saliency: np.ndarray, consensus: ConsensusModel) -> float:
    salient = saliency >= SALIENT_LEVEL
    if not salient.any():
        return 0.0
    return float(consensus.affinity(color_bins(image)[salient]).max())


def co_saliency(image: np.ndarray, saliency: np.ndarray, consensus: ConsensusModel) -> np.ndarray:
    """Saliency times relative color affinity, or zeros if the image abstains.

    Relative affinity divides each bin's mass by the largest bin mass.  The
    image abstains when its best salient-pixel affinity is below
    ``consensus.affinity_threshold`` (an absolute mass in [0, 1]).
    """
    saliency = np.asarray(saliency, dtype=np.float64)
    if best_affinity(image, saliency, consensus) < consensus.affinity_threshold:
        return np.zeros_like(saliency)
    rel = consensus.histogram / consensus.histogram.max()
    return np.clip(saliency * rel[color_bins(image)], 0.0, 1.0)


def predict_group(images: Sequence[np.ndarray], affinity_threshold: float = 0.25):
    """Return ``(single maps, co-saliency maps)`` for one group."""
    singles = [single_saliency(im) for im in images]
    consensus = group_consensus(list(zip(images, singles)), affinity_threshold)
    return singles, [co_saliency(im, s, consensus) for im, s in zip(images, singles)]


def predict_dataset(
    manifest: DatasetManifest,
    out_dir,
    method: str = "co",
    affinity_threshold: float = 0.25,
    workers: int = 1,
) -> None:
    """Write predictions for every manifest image as ``<out_dir>/<group>/<image>.png``.

    ``method`` is ``"co"`` (group-aware) or ``"single"`` (per-image saliency).
    """
    if method not in ("co", "single"):
        raise ValueError(f"unknown method {method!r}")

    def run(g):
        images = [load_image(manifest, im) for im in g.images]
        singles, cos = predict_group(images, affinity_threshold)
        maps = cos if method == "co" else singles
        for im, m in zip(g.images, maps):
            save_map(m, prediction_path(out_dir, g.group_id, im.image_id))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, manifest.groups))
    else:
        for g in manifest.groups:
            run(g)
