"""Why F, S and E stop being informative once a group has no co-salient object.

Scores a few predictions against an all-zero ground truth and shows that only
IoU (and MAE) still tell a clean prediction apart from a noisy one.

    python demos/metric_degeneracy.py
"""

import numpy as np

from gcosod.metrics import MetricConfig, binarize, e_measure, f_measure, iou, mae, s_measure

rng = np.random.default_rng(0)
gt = np.zeros((64, 64), dtype=bool)

predictions = {
    "all zeros": np.zeros(gt.shape),
    "faint noise": 0.3 * rng.random(gt.shape),
    "confident blob": np.pad(np.ones((20, 20)), 22),
    "random": rng.random(gt.shape),
}

strict = MetricConfig(s_mode="strict")
reference = MetricConfig(s_mode="reference")

print(f"{'prediction':>15} | {'IoU':>5} {'MAE':>6} {'Fmax':>5} {'S':>5} {'S(ref)':>6} {'E(xi)':>6} {'E(enh)':>6}")
for name, p in predictions.items():
    print(
        f"{name:>15} | "
        f"{iou(binarize(p), gt):5.2f} {mae(p, gt):6.3f} {f_measure(p, gt)[1]:5.2f} "
        f"{s_measure(p, gt, strict):5.2f} {s_measure(p, gt, reference):6.3f} "
        f"{e_measure(p, gt, mode='xi-mean')[1]:6.2f} {e_measure(p, gt, mode='enhanced')[1]:6.3f}"
    )

print()
print("Fmax, strict S and xi-mean E are 0 for every prediction: they cannot rank them.")
print("IoU is 1 only when nothing is predicted salient, which is the behaviour we want to reward.")
