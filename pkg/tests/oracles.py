"""Slow, loop-based reference computations used only by the tests."""

import math

import numpy as np


def iou_oracle(pred, gt):
    tp = fp = fn = 0
    for a, b in zip(pred.ravel().tolist(), gt.ravel().tolist()):
        if a and b:
            tp += 1
        elif a:
            fp += 1
        elif b:
            fn += 1
    return 1.0 if tp + fp + fn == 0 else tp / (tp + fp + fn)


def mae_oracle(p, gt):
    vals = [abs(a - float(b)) for a, b in zip(p.ravel().tolist(), gt.ravel().tolist())]
    return math.fsum(vals) / len(vals)


def f_oracle(pred, gt, beta_squared):
    tp = sum(1 for a, b in zip(pred.ravel(), gt.ravel()) if a and b)
    npred = sum(1 for a in pred.ravel() if a)
    ngt = sum(1 for b in gt.ravel() if b)
    precision = tp / npred if npred else 0.0
    recall = tp / ngt if ngt else 0.0
    den = beta_squared * precision + recall
    return (1 + beta_squared) * precision * recall / den if den else 0.0


def xi_mean_oracle(s, y):
    """Pixel loop over the alignment formula with 0/0 -> 0."""
    sv = [float(v) for v in s.ravel()]
    yv = [float(v) for v in y.ravel()]
    ms = sum(sv) / len(sv)
    my = sum(yv) / len(yv)
    total = 0.0
    for a, b in zip(sv, yv):
        fa, fb = a - ms, b - my
        den = fa * fa + fb * fb
        total += 2 * fa * fb / den if den else 0.0
    return total / len(sv)


def ece_oracle(conf, correct, num_bins, lo=0.5, hi=1.0):
    """Bin by explicit interval tests, then average each bin; top bin closed."""
    conf = np.asarray(conf, dtype=np.float64)
    correct = np.asarray(correct, dtype=np.float64)
    width = (hi - lo) / num_bins
    n = len(conf)
    total = 0.0
    placed = 0
    for i in range(num_bins):
        a = lo + i * width
        b = hi if i == num_bins - 1 else lo + (i + 1) * width
        inside = (conf >= a) & ((conf <= b) if i == num_bins - 1 else (conf < b))
        k = int(inside.sum())
        placed += k
        if k:
            total += k / n * abs(correct[inside].mean() - conf[inside].mean())
    assert placed == n
    return total
