"""Co-saliency metrics: IoU, MAE, F-measure, S-measure and E-measure.

All functions take a probability map ``p`` (float array in ``[0, 1]``) and a
boolean ground truth ``gt`` of the same shape.  Max-sweeps binarize ``p`` at
``MetricConfig.thresholds`` evenly spaced levels in ``[0, 1]`` using ``p >= t``.

With an all-zero ground truth the F-, S- (strict mode) and E-measure (xi-mean
mode) are 0 whatever the prediction; IoU is the only score here that still
separates an empty prediction (1) from any false positive (0).
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np

from . import __version__
from .core import (
    ConfigError,
    DataError,
    DatasetManifest,
    check_same_shape,
    load_ground_truth,
    load_map,
    prediction_path,
)

S_EPS = 1e-12


@dataclass(frozen=True)
class MetricConfig:
    binarize_threshold: float = 0.5
    beta_squared: float = 0.3
    s_alpha: float = 0.5
    thresholds: int = 256
    s_mode: Literal["strict", "reference"] = "strict"
    e_mode: Literal["xi-mean", "enhanced"] = "enhanced"

    def __post_init__(self):
        if not 0.0 < self.binarize_threshold < 1.0:
            raise ConfigError(f"binarize_threshold must be in (0, 1), got {self.binarize_threshold}")
        if self.beta_squared <= 0:
            raise ConfigError(f"beta_squared must be > 0, got {self.beta_squared}")
        if not 0.0 <= self.s_alpha <= 1.0:
            raise ConfigError(f"s_alpha must be in [0, 1], got {self.s_alpha}")
        if self.thresholds < 2:
            raise ConfigError(f"thresholds must be >= 2, got {self.thresholds}")
        if self.s_mode not in ("strict", "reference"):
            raise ConfigError(f"unknown s_mode {self.s_mode!r}")
        if self.e_mode not in ("xi-mean", "enhanced"):
            raise ConfigError(f"unknown e_mode {self.e_mode!r}")

    def sweep(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.thresholds)


def _div0(num, den):
    """Elementwise ``num / den`` with ``0/0`` (and ``x/0``) mapped to 0."""
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den != 0)
    return out


def binarize(p: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    return np.asarray(p) >= threshold


def iou(pred: np.ndarray, gt: np.ndarray) -> float:
    """TP / (TP + FP + FN); two empty masks score 1."""
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    check_same_shape(pred, gt)
    inter = np.count_nonzero(pred & gt)
    union = np.count_nonzero(pred | gt)
    if union == 0:
        return 1.0
    return inter / union


def mae(p: np.ndarray, gt: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64)
    check_same_shape(p, gt)
    return float(np.mean(np.abs(p - np.asarray(gt, dtype=np.float64))))


def _confusion_sweep(p: np.ndarray, gt: np.ndarray, thresholds: np.ndarray):
    """TP, FP, FN, TN counts of ``p >= t`` for every threshold ``t``.

    ``searchsorted`` gives, per pixel, how many thresholds it clears; a reverse
    cumulative sum of those counts yields the positives at each level.
    """
    m = len(thresholds)
    level = np.searchsorted(thresholds, p.ravel(), side="right")
    fg = gt.ravel()
    fg_hist = np.bincount(level[fg], minlength=m + 1)
    bg_hist = np.bincount(level[~fg], minlength=m + 1)
    # positives at threshold k are the pixels with level > k
    tp = np.cumsum(fg_hist[::-1])[::-1][1:]
    fp = np.cumsum(bg_hist[::-1])[::-1][1:]
    n_fg = int(fg.sum())
    n_bg = fg.size - n_fg
    return tp, fp, n_fg - tp, n_bg - fp


def precision_recall_f(pred: np.ndarray, gt: np.ndarray, beta_squared: float = 0.3):
    """Precision, recall and F-beta of one binary prediction (0/0 -> 0)."""
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    check_same_shape(pred, gt)
    tp = np.count_nonzero(pred & gt)
    precision = float(_div0(tp, np.count_nonzero(pred)))
    recall = float(_div0(tp, np.count_nonzero(gt)))
    f = float(_div0((1 + beta_squared) * precision * recall, beta_squared * precision + recall))
    return precision, recall, f


def f_measure(p: np.ndarray, gt: np.ndarray, config: MetricConfig = MetricConfig()):
    """F-beta curve over the threshold sweep and its maximum."""
    p = np.asarray(p, dtype=np.float64)
    gt = np.asarray(gt, dtype=bool)
    check_same_shape(p, gt)
    tp, fp, fn, _ = _confusion_sweep(p, gt, config.sweep())
    precision = _div0(tp, tp + fp)
    recall = _div0(tp, tp + fn)
    b2 = config.beta_squared
    curve = _div0((1 + b2) * precision * recall, b2 * precision + recall)
    return curve, float(curve.max())


# -- S-measure ---------------------------------------------------------------


def _object_score(x: np.ndarray) -> float:
    if x.size == 0:
        return 0.0
    mean = float(x.mean())
    std = float(x.std(ddof=1)) if x.size > 1 else 0.0
    return 2.0 * mean / (mean * mean + 1.0 + std + S_EPS)


def s_object(p: np.ndarray, gt: np.ndarray) -> float:
    fg_score = _object_score(p[gt])
    bg_score = _object_score(1.0 - p[~gt])
    u = gt.mean()
    return float(u * fg_score + (1.0 - u) * bg_score)


def _centroid(gt: np.ndarray) -> tuple[int, int]:
    h, w = gt.shape
    if not gt.any():
        return int(round(w / 2)) + 1, int(round(h / 2)) + 1
    rows, cols = np.nonzero(gt)
    return int(np.round(cols.mean())) + 1, int(np.round(rows.mean())) + 1


def _ssim(p: np.ndarray, gt: np.ndarray) -> float:
    n = p.size
    x = p.mean()
    y = gt.mean()
    if n > 1:
        sx = ((p - x) ** 2).sum() / (n - 1)
        sy = ((gt - y) ** 2).sum() / (n - 1)
        sxy = ((p - x) * (gt - y)).sum() / (n - 1)
    else:
        sx = sy = sxy = 0.0
    alpha = 4 * x * y * sxy
    beta = (x * x + y * y) * (sx + sy)
    if alpha != 0:
        return float(alpha / (beta + S_EPS))
    if beta == 0:
        return 1.0
    return 0.0


def s_region(p: np.ndarray, gt: np.ndarray) -> float:
    """Area-weighted SSIM over the four blocks split at the gt centroid."""
    h, w = gt.shape
    cx, cy = _centroid(gt)
    g = gt.astype(np.float64)
    score = 0.0
    for rs, cs in (
        (slice(0, cy), slice(0, cx)),
        (slice(0, cy), slice(cx, w)),
        (slice(cy, h), slice(0, cx)),
        (slice(cy, h), slice(cx, w)),
    ):
        pb, gb = p[rs, cs], g[rs, cs]
        if gb.size == 0:
            continue
        score += gb.size / (h * w) * _ssim(pb, gb)
    return float(score)


def s_measure(p: np.ndarray, gt: np.ndarray, config: MetricConfig = MetricConfig()) -> float:
    """Structure measure ``alpha * S_o + (1 - alpha) * S_r``.

    Empty gt: strict mode returns 0 for any prediction, reference mode returns
    ``1 - mean(p)``.  Full gt returns ``mean(p)`` in both modes.
    """
    p = np.asarray(p, dtype=np.float64)
    gt = np.asarray(gt, dtype=bool)
    check_same_shape(p, gt)
    y = gt.mean()
    if y == 0:
        return 0.0 if config.s_mode == "strict" else float(1.0 - p.mean())
    if y == 1:
        return float(p.mean())
    a = config.s_alpha
    sm = a * s_object(p, gt) + (1 - a) * s_region(p, gt)
    return float(max(sm, 0.0))


# -- E-measure ---------------------------------------------------------------


def alignment_matrix(s: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pixelwise xi = 2 phi_s phi_y / (phi_s^2 + phi_y^2), 0/0 -> 0.

    ``phi`` is each map minus its global mean.
    """
    s = np.asarray(s, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    phi_s = s - s.mean()
    phi_y = y - y.mean()
    return _div0(2 * phi_s * phi_y, phi_s * phi_s + phi_y * phi_y)


def _xi_table(ms: np.ndarray, my: float):
    """xi for the four (s, y) pixel classes given binary means ``ms`` and ``my``."""
    out = {}
    for sv in (0, 1):
        for yv in (0, 1):
            a = sv - ms
            b = yv - my
            out[sv, yv] = _div0(2 * a * b, a * a + b * b)
    return out


def e_measure(p: np.ndarray, gt: np.ndarray, config: MetricConfig = MetricConfig(), mode: str | None = None):
    """E-measure curve over the threshold sweep and its maximum.

    ``mode`` overrides ``config.e_mode``: ``"xi-mean"`` averages xi itself,
    ``"enhanced"`` averages ``(1 + xi)^2 / 4``.  Since a binarized map takes
    only two values, xi takes one value per (prediction, gt) class and the mean
    is a count-weighted sum of four terms.
    """
    mode = mode or config.e_mode
    p = np.asarray(p, dtype=np.float64)
    gt = np.asarray(gt, dtype=bool)
    check_same_shape(p, gt)
    n = gt.size
    tp, fp, fn, tn = _confusion_sweep(p, gt, config.sweep())
    ms = (tp + fp) / n
    my = float(gt.mean())
    xi = _xi_table(ms, my)
    counts = {(1, 1): tp, (1, 0): fp, (0, 1): fn, (0, 0): tn}
    if mode == "xi-mean":
        f = lambda v: v  # noqa: E731
    elif mode == "enhanced":
        f = lambda v: (1 + v) ** 2 / 4  # noqa: E731
    else:
        raise ConfigError(f"unknown e_mode {mode!r}")
    curve = sum(counts[k] * f(xi[k]) for k in counts) / n
    return curve, float(curve.max())


# -- dataset evaluation -------------------------------------------------------


@dataclass
class ImageScores:
    group_id: str
    image_id: str
    iou: float
    mae: float
    f_max: float
    s: float
    e: float
    e_xi: float
    e_enhanced: float
    is_zero_gt: bool


METRIC_FIELDS = ("iou", "mae", "f_max", "s", "e", "e_xi", "e_enhanced")


@dataclass
class EvalReport:
    per_image: list[ImageScores]
    per_group: dict[str, dict[str, float]]
    dataset: dict[str, float]
    config: dict
    errors: list[dict] = field(default_factory=list)
    tool_version: str = __version__

    @property
    def complete(self) -> bool:
        return not self.errors

    @property
    def miou(self) -> float:
        return self.dataset["iou"]

    def to_dict(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "complete": self.complete,
            "config": self.config,
            "dataset": self.dataset,
            "per_group": self.per_group,
            "per_image": [asdict(s) for s in self.per_image],
            "errors": self.errors,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = ["group_id", "image_id", *METRIC_FIELDS, "is_zero_gt"]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for s in self.per_image:
            row = asdict(s)
            w.writerow([row[c] if not isinstance(row[c], float) else repr(row[c]) for c in cols])
        return buf.getvalue()


def score_image(p: np.ndarray, gt: np.ndarray, config: MetricConfig) -> dict[str, float]:
    check_same_shape(p, gt)
    _, e_xi = e_measure(p, gt, config, mode="xi-mean")
    _, e_enh = e_measure(p, gt, config, mode="enhanced")
    return {
        "iou": iou(binarize(p, config.binarize_threshold), gt),
        "mae": mae(p, gt),
        "f_max": f_measure(p, gt, config)[1],
        "s": s_measure(p, gt, config),
        "e": e_xi if config.e_mode == "xi-mean" else e_enh,
        "e_xi": e_xi,
        "e_enhanced": e_enh,
    }


def _mean_scores(rows: list[ImageScores]) -> dict[str, float]:
    if not rows:
        return {k: float("nan") for k in METRIC_FIELDS} | {"count": 0}
    out = {k: float(np.mean([getattr(r, k) for r in rows])) for k in METRIC_FIELDS}
    out["count"] = len(rows)
    return out


def evaluate_dataset(
    manifest: DatasetManifest,
    predictions_dir,
    config: MetricConfig = MetricConfig(),
    workers: int = 1,
) -> EvalReport:
    """Score every manifest image against ``<predictions_dir>/<group>/<image>.png``.

    Missing or mismatched predictions are recorded in ``errors`` and the report
    is marked incomplete; the remaining images are still scored.  Aggregates
    follow manifest order, so results do not depend on ``workers``.
    """
    jobs = [(g.group_id, im) for g in manifest.groups for im in g.images]

    def run(job):
        gid, im = job
        path = prediction_path(predictions_dir, gid, im.image_id)
        try:
            if not path.is_file():
                raise DataError(f"missing prediction {path}")
            p = load_map(path)
            gt = load_ground_truth(manifest, im)
            scores = score_image(p, gt, config)
        except DataError as exc:
            return {"group_id": gid, "image_id": im.image_id, "error": str(exc)}
        return ImageScores(gid, im.image_id, is_zero_gt=im.is_zero, **scores)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]

    per_image = [r for r in results if isinstance(r, ImageScores)]
    errors = [r for r in results if isinstance(r, dict)]
    per_group = {
        g.group_id: _mean_scores([r for r in per_image if r.group_id == g.group_id])
        for g in manifest.groups
    }
    return EvalReport(
        per_image=per_image,
        per_group=per_group,
        dataset=_mean_scores(per_image),
        config=asdict(config),
        errors=errors,
    )
