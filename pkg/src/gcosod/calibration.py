"""Expected calibration error and reliability diagrams for dense predictions.

Each pixel is one prediction: its label is ``p >= 0.5``, its confidence
``max(p, 1 - p)``.  Confidences are binned into K equal-width bins over
``[0.5, 1]`` (or ``[0, 1]`` for raw probabilities); every bin is half-open
except the top one, which is closed so that confidence 1.0 is counted.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ConfigError, DataError, check_same_shape, load_ground_truth, load_map, prediction_path

RANGES = {"max-confidence": (0.5, 1.0), "raw": (0.0, 1.0)}


def pixel_confidence(p: np.ndarray, gt: np.ndarray, stride: int = 1):
    """Per-pixel ``(confidence, correct)`` arrays, optionally every ``stride``-th pixel."""
    p = np.asarray(p, dtype=np.float64)
    gt = np.asarray(gt, dtype=bool)
    check_same_shape(p, gt)
    p = p.ravel()[::stride]
    gt = gt.ravel()[::stride]
    label = p >= 0.5
    return np.maximum(p, 1.0 - p), label == gt


@dataclass(frozen=True)
class Bin:
    lo: float
    hi: float
    count: int
    mean_confidence: float
    mean_accuracy: float


@dataclass(frozen=True)
class ReliabilityDiagram:
    bins: tuple[Bin, ...]
    ece: float
    num_bins: int
    total: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lo", "hi", "count", "mean_confidence", "mean_accuracy"])
        for b in self.bins:
            if b.count:
                w.writerow([repr(b.lo), repr(b.hi), b.count, repr(b.mean_confidence), repr(b.mean_accuracy)])
            else:
                w.writerow([repr(b.lo), repr(b.hi), 0, "", ""])
        return buf.getvalue()


class BinAccumulator:
    """Running per-bin sums; partial accumulators merge in a fixed order."""

    def __init__(self, num_bins: int = 10, mode: str = "max-confidence"):
        if num_bins < 1:
            raise ConfigError(f"number of bins must be >= 1, got {num_bins}")
        if mode not in RANGES:
            raise ConfigError(f"unknown confidence range mode {mode!r}")
        self.num_bins = num_bins
        self.mode = mode
        lo, hi = RANGES[mode]
        self.edges = np.linspace(lo, hi, num_bins + 1)
        self.count = np.zeros(num_bins, dtype=np.int64)
        self.conf_sum = np.zeros(num_bins)
        self.acc_sum = np.zeros(num_bins)

    def bin_index(self, confidence: np.ndarray) -> np.ndarray:
        lo, hi = self.edges[0], self.edges[-1]
        if confidence.size and (confidence.min() < lo or confidence.max() > hi):
            raise DataError(f"confidence outside [{lo}, {hi}]")
        # interior edges only: value == edge goes to the upper bin, 1.0 stays in the last
        return np.searchsorted(self.edges[1:-1], confidence, side="right")

    def add(self, confidence, correct) -> "BinAccumulator":
        confidence = np.asarray(confidence, dtype=np.float64).ravel()
        correct = np.asarray(correct, dtype=np.float64).ravel()
        if confidence.shape != correct.shape:
            raise DataError("confidence and correctness streams differ in length")
        idx = self.bin_index(confidence)
        self.count += np.bincount(idx, minlength=self.num_bins)
        self.conf_sum += np.bincount(idx, weights=confidence, minlength=self.num_bins)
        self.acc_sum += np.bincount(idx, weights=correct, minlength=self.num_bins)
        return self

    def merge(self, other: "BinAccumulator") -> "BinAccumulator":
        if other.num_bins != self.num_bins or other.mode != self.mode:
            raise ConfigError("cannot merge accumulators with different binning")
        self.count += other.count
        self.conf_sum += other.conf_sum
        self.acc_sum += other.acc_sum
        return self

    def diagram(self) -> ReliabilityDiagram:
        total = int(self.count.sum())
        if total == 0:
            raise DataError("ECE of an empty prediction stream is undefined")
        bins = []
        ece = 0.0
        for i in range(self.num_bins):
            c = int(self.count[i])
            if c:
                conf = self.conf_sum[i] / c
                acc = self.acc_sum[i] / c
                ece += c / total * abs(acc - conf)
            else:
                conf = acc = math.nan
            bins.append(Bin(float(self.edges[i]), float(self.edges[i + 1]), c, float(conf), float(acc)))
        return ReliabilityDiagram(tuple(bins), float(ece), self.num_bins, total)


def ece(confidence, correct, num_bins: int = 10, mode: str = "max-confidence") -> ReliabilityDiagram:
    """ECE = sum_i |B_i|/N * |acc(B_i) - conf(B_i)| with equal-width bins."""
    return BinAccumulator(num_bins, mode).add(confidence, correct).diagram()


def render_reliability(diagram: ReliabilityDiagram, out, title: str | None = None) -> tuple[Path, Path]:
    """Write ``<out>.csv`` (bin table) and ``<out>.svg`` (bar plot with the oracle diagonal).

    Empty bins are left as gaps.  The SVG is byte-stable for identical input.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    csv_path = out.with_suffix(".csv")
    svg_path = out.with_suffix(".svg")
    csv_path.write_text(diagram.to_csv(), encoding="utf-8")

    filled = [b for b in diagram.bins if b.count]
    lo, hi = diagram.bins[0].lo, diagram.bins[-1].hi
    with plt.rc_context({"svg.hashsalt": "gcosod", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(4, 4))
        ax.bar(
            [(b.lo + b.hi) / 2 for b in filled],
            [b.mean_accuracy for b in filled],
            width=[b.hi - b.lo for b in filled],
            edgecolor="black",
            color="tab:blue",
            label="Accuracy",
        )
        ax.plot([lo, hi], [lo, hi], "--", color="gray", label="Oracle")
        ax.set_xlim(lo, hi)
        ax.set_ylim(0, 1)
        ax.set_xlabel("Confidence")
        ax.set_ylabel("Accuracy")
        ax.set_title(title or f"ECE = {diagram.ece:.4f}")
        ax.legend(loc="upper left")
        fig.savefig(svg_path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return csv_path, svg_path


def calibrate_dataset(manifest, predictions_dir, num_bins: int = 10, stride: int = 1, workers: int = 1):
    """Pixel-level reliability diagram over every available prediction.

    Images without a prediction file are skipped (the metric report lists
    them).  Per-image partial histograms are merged in manifest order.
    """
    jobs = [(g.group_id, im) for g in manifest.groups for im in g.images]

    def run(job):
        gid, im = job
        path = prediction_path(predictions_dir, gid, im.image_id)
        acc = BinAccumulator(num_bins)
        if path.is_file():
            p = load_map(path)
            gt = load_ground_truth(manifest, im)
            if p.shape == gt.shape:
                acc.add(*pixel_confidence(p, gt, stride))
        return acc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    total = BinAccumulator(num_bins)
    for part in parts:
        total.merge(part)
    return total.diagram()
