"""Run the training-free baseline, then score, calibrate and revise its maps.

Compares per-image saliency with the group-aware variant on all-primary and
zero-common groups, and shows what entropy-based revision does to ECE.

    python demos/baseline_calibration_uncertainty.py
"""

import tempfile
from pathlib import Path

from gcosod.baseline import predict_dataset
from gcosod.builder import ZeroBuildConfig, build_zero
from gcosod.calibration import calibrate_dataset, render_reliability
from gcosod.metrics import evaluate_dataset
from gcosod.synth import SynthConfig, generate_synthetic_dataset
from gcosod.uncertainty import uncertainty_report

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    source = generate_synthetic_dataset(SynthConfig(num_categories=12, group_size=10, seed=3), tmp / "src")
    zero, _ = build_zero(source, ZeroBuildConfig(num_groups=12, min_group_size=5, max_group_size=6, seed=3))

    for label, manifest in (("all-primary", source), ("zero-common", zero)):
        print(label)
        for method in ("single", "co"):
            preds = tmp / label / method
            predict_dataset(manifest, preds, method)
            scores = evaluate_dataset(manifest, preds).dataset
            diagram = calibrate_dataset(manifest, preds)
            print(f"  {method:>6}: mIoU {scores['iou']:.3f}  MAE {scores['mae']:.3f}  "
                  f"Fmax {scores['f_max']:.3f}  ECE {diagram.ece:.3f}")

    preds = tmp / "all-primary" / "single"
    uncertainty_report(source, preds, out_dir=tmp / "unc")
    before = calibrate_dataset(source, preds)
    after = calibrate_dataset(source, tmp / "unc" / "revised")
    print(f"\nrevision of single-image maps: ECE {before.ece:.3f} -> {after.ece:.3f}")
    csv_path, svg_path = render_reliability(after, tmp / "reliability")
    print(f"reliability diagram table:\n{csv_path.read_text()}")
