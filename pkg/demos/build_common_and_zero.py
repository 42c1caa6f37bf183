"""Re-arrange a synthetic source into partially-common and zero-common groups.

    python demos/build_common_and_zero.py
"""

import tempfile

from gcosod.builder import ZeroBuildConfig, build_common, build_zero, primary_ratio_histogram, validate_zero
from gcosod.core import DatasetManifest, GroupEntry
from gcosod.synth import SynthConfig, generate_synthetic_dataset

with tempfile.TemporaryDirectory() as tmp:
    source = generate_synthetic_dataset(
        SynthConfig(num_categories=12, group_size=10, image_size=32, distractor_count_range=(0, 2)), tmp
    )

common, _ = build_common(source)
hist = primary_ratio_histogram(common)
print(f"common: {len(common)} groups from {len(source)} categories")
for rr, n in zip(hist.ranges, hist.counts):
    print(f"  primary ratio in {rr}: {n} groups")
for gid, n_p, n, ratio in hist.rows[:6]:
    print(f"  {gid:<22} {n_p}/{n} = {ratio:.1f}")

zero, stats = build_zero(source, ZeroBuildConfig(num_groups=8, min_group_size=4, max_group_size=6))
print(f"\nzero: {len(zero)} groups, violations: {validate_zero(zero)}")
for s in stats.groups[:3]:
    print(f"  {s['group_id']}: sources {', '.join(s['sources'])}")

# dropping the tag-disjointness rule: stacking two zero groups shares tags and gets flagged
merged = zero.groups[0].images + tuple(im for im in zero.groups[1].images if im not in zero.groups[0].images)
clash = DatasetManifest(zero.root, (GroupEntry("merged", "none", merged),))
print("\nmerged group violations:", [v["tag"] for v in validate_zero(clash)])
