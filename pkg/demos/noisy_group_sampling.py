"""Draw noisy training groups from a tiny synthetic dataset.

For each primary group a replacement count r is drawn, r images from distinct
other groups replace random slots, and those slots get an all-zero label.

    python demos/noisy_group_sampling.py
"""

import tempfile
from collections import Counter

import numpy as np

from gcosod.sampler import INTEGER_UNIFORM, SamplerConfig, draw_replacement_count, sample_epoch
from gcosod.synth import SynthConfig, generate_synthetic_dataset

with tempfile.TemporaryDirectory() as tmp:
    manifest = generate_synthetic_dataset(SynthConfig(num_categories=6, group_size=5, image_size=32), tmp)

    for epoch in range(2):
        print(f"epoch {epoch}")
        for g in sample_epoch(manifest, SamplerConfig(seed=1, epoch=epoch))[:3]:
            roles = " ".join("N" if e.role == "noisy" else "p" for e in g.entries)
            print(f"  {g.group_id:<16} r~={g.drawn_ratio:.3f} r={g.replacement_count}  [{roles}]")

# floor-uniform never replaces the whole group; integer-uniform does sometimes
rng = np.random.default_rng(0)
for mode in ("floor-uniform", INTEGER_UNIFORM):
    cfg = SamplerConfig(full_replacement_mode=mode)
    counts = Counter(draw_replacement_count(5, cfg, rng)[1] for _ in range(10_000))
    print(f"{mode:>16}: " + " ".join(f"r={r}:{counts[r] / 10_000:.3f}" for r in range(6)))
