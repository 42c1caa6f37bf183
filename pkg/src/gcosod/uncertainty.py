"""Entropy uncertainty maps and bias-matrix revision of predictions."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    ConfigError,
    DataError,
    DatasetManifest,
    check_same_shape,
    load_map,
    prediction_path,
    save_map,
)

# max of -p ln p on [0, 1], attained at p = 1/e
MAX_SINGLE_TERM = math.exp(-1.0)


@dataclass(frozen=True)
class UncertaintyConfig:
    epsilon: float = 1e-6
    clamp_negative: bool = True
    full_binary_entropy: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")

    @property
    def max_value(self) -> float:
        """Upper bound of the map, used to scale 8-bit output."""
        return math.log(2.0) if self.full_binary_entropy else MAX_SINGLE_TERM


def entropy_map(p: np.ndarray, config: UncertaintyConfig = UncertaintyConfig()) -> np.ndarray:
    """``u = -p * ln(p + eps)`` per pixel.

    At ``p = 1`` the raw value is ``-ln(1 + eps) < 0``; it is clamped to 0
    unless ``clamp_negative`` is off.  ``full_binary_entropy`` adds the
    ``-(1 - p) ln(1 - p + eps)`` term.
    """
    p = np.asarray(p, dtype=np.float64)
    eps = config.epsilon
    u = -p * np.log(p + eps)
    if config.full_binary_entropy:
        u = u - (1.0 - p) * np.log(1.0 - p + eps)
    if config.clamp_negative:
        u = np.maximum(u, 0.0)
    return u


def bias_matrix(u: np.ndarray) -> np.ndarray:
    """Uncertainty minus its image-wide mean."""
    u = np.asarray(u, dtype=np.float64)
    return u - u.mean()


def revise(p: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Zero every prediction whose uncertainty is strictly above the image mean."""
    p = np.asarray(p, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    check_same_shape(p, u)
    return np.where(bias_matrix(u) > 0, 0.0, p)


def uncertainty_report(
    manifest: DatasetManifest,
    predictions_dir,
    config: UncertaintyConfig = UncertaintyConfig(),
    out_dir=".",
) -> dict:
    """Write uncertainty maps, revised predictions and a summary under ``out_dir``.

    Uncertainty maps are 8-bit with scale ``255 / config.max_value``.  Revised
    maps use the standard prediction layout, so they can be evaluated directly.
    """
    out_dir = Path(out_dir)
    summary = {"config": {"epsilon": config.epsilon, "clamp_negative": config.clamp_negative,
                          "full_binary_entropy": config.full_binary_entropy},
               "scale": 255.0 / config.max_value, "groups": {}}
    missing = [
        f"{g.group_id}/{im.image_id}"
        for g in manifest.groups
        for im in g.images
        if not prediction_path(predictions_dir, g.group_id, im.image_id).is_file()
    ]
    if missing:
        raise DataError(f"missing predictions for {len(missing)} image(s): {', '.join(missing[:5])}")
    for g in manifest.groups:
        per_image = {}
        for im in g.images:
            p = load_map(prediction_path(predictions_dir, g.group_id, im.image_id))
            u = entropy_map(p, config)
            save_map(u / config.max_value, prediction_path(out_dir / "uncertainty", g.group_id, im.image_id))
            save_map(revise(p, u), prediction_path(out_dir / "revised", g.group_id, im.image_id))
            per_image[im.image_id] = {
                "mean_uncertainty": float(u.mean()),
                "removed_fraction": float(np.mean(bias_matrix(u) > 0)),
            }
        vals = [v["mean_uncertainty"] for v in per_image.values()]
        summary["groups"][g.group_id] = {
            "mean_uncertainty": float(np.mean(vals)) if vals else None,
            "images": per_image,
        }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "uncertainty_summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return summary
