"""Noisy-group sampling for co-saliency training with irrelevant images mixed in.

For every primary group a replacement ratio is drawn, that many secondary
groups are chosen, one image is pulled from each, and the pulled images
replace randomly chosen primary slots with an all-zero (ZERO) label.

Randomness for group ``k`` in epoch ``e`` comes from its own generator seeded
with ``(seed, epoch, k)``, so a stream does not depend on evaluation order or
on the number of workers.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from .core import ZERO, CapacityError, ConfigError, DataError, DatasetManifest, GroupEntry, ImageEntry

FLOOR_UNIFORM = "floor-uniform"
INTEGER_UNIFORM = "integer-uniform"
RATIO_MODES = (FLOOR_UNIFORM, INTEGER_UNIFORM)


@dataclass(frozen=True)
class SamplerConfig:
    seed: int = 0
    full_replacement_mode: Literal["floor-uniform", "integer-uniform"] = FLOOR_UNIFORM
    epoch: int = 0

    def __post_init__(self):
        if self.full_replacement_mode not in RATIO_MODES:
            raise ConfigError(f"unknown full_replacement_mode {self.full_replacement_mode!r}")


@dataclass(frozen=True)
class SampledEntry:
    image: ImageEntry
    source_group_id: str
    role: Literal["primary", "noisy"]
    effective_mask: str

    @property
    def is_noisy(self) -> bool:
        return self.role == "noisy"


@dataclass(frozen=True)
class SampledGroup:
    group_id: str
    draw_index: int
    drawn_ratio: float
    replacement_count: int
    entries: tuple[SampledEntry, ...]

    def to_record(self) -> dict:
        return {
            "group_id": self.group_id,
            "draw_index": self.draw_index,
            "drawn_ratio": self.drawn_ratio,
            "replacement_count": self.replacement_count,
            "entries": [
                {
                    "image_id": e.image.image_id,
                    "source_group_id": e.source_group_id,
                    "role": e.role,
                }
                for e in self.entries
            ],
        }


def group_rng(config: SamplerConfig, group_index: int) -> np.random.Generator:
    return np.random.default_rng([config.seed, config.epoch, group_index])


def draw_replacement_count(
    group_size: int, config: SamplerConfig, rng: np.random.Generator
) -> tuple[float, int]:
    """Draw ``(r_tilde, r)`` for a group of ``group_size`` images.

    In floor-uniform mode ``r_tilde ~ U[0, 1)`` and ``r = floor(N * r_tilde)``,
    so ``r`` never reaches ``N``.  In integer-uniform mode ``r`` is uniform on
    ``{0, ..., N}`` and ``r_tilde = r / N`` is recorded.
    """
    if group_size < 1:
        raise ConfigError(f"group_size must be >= 1, got {group_size}")
    if config.full_replacement_mode == FLOOR_UNIFORM:
        r_tilde = float(rng.random())
        return r_tilde, replacement_count(group_size, r_tilde)
    r = int(rng.integers(0, group_size + 1))
    return r / group_size, r


def replacement_count(group_size: int, r_tilde: float) -> int:
    return min(int(math.floor(group_size * r_tilde)), group_size)


def sample_noisy_sources(
    primary_group_id: str,
    r: int,
    manifest: DatasetManifest,
    rng: np.random.Generator,
) -> list[tuple[str, ImageEntry]]:
    """Pick ``r`` distinct secondary groups and one uniform image from each."""
    secondary = [g for g in manifest.groups if g.group_id != primary_group_id]
    if r > len(secondary):
        raise CapacityError(
            f"group {primary_group_id!r}: r={r} noisy images requested but only "
            f"K-1={len(secondary)} secondary groups exist (K={len(manifest)})"
        )
    if r == 0:
        return []
    chosen = rng.choice(len(secondary), size=r, replace=False)
    out = []
    for gi in chosen:
        g = secondary[int(gi)]
        im = g.images[int(rng.integers(len(g.images)))]
        out.append((g.group_id, im))
    return out


def compose_training_group(
    primary: GroupEntry,
    noisy: Sequence[tuple[str, ImageEntry]],
    rng: np.random.Generator,
    draw_index: int = 0,
    drawn_ratio: float | None = None,
) -> SampledGroup:
    """Replace a uniformly random subset of primary slots with ``noisy`` images."""
    n = len(primary.images)
    if len(noisy) > n:
        raise DataError(
            f"group {primary.group_id!r}: {len(noisy)} noisy images exceed group size {n}"
        )
    entries = [
        SampledEntry(im, primary.group_id, "primary", im.mask_path) for im in primary.images
    ]
    if noisy:
        slots = rng.choice(n, size=len(noisy), replace=False)
        for slot, (src, im) in zip(slots, noisy):
            if src == primary.group_id:
                raise DataError(f"noisy source equals primary group {src!r}")
            entries[int(slot)] = SampledEntry(im, src, "noisy", ZERO)
    if drawn_ratio is None:
        drawn_ratio = len(noisy) / n
    return SampledGroup(
        group_id=primary.group_id,
        draw_index=draw_index,
        drawn_ratio=float(drawn_ratio),
        replacement_count=len(noisy),
        entries=tuple(entries),
    )


def sample_group(manifest: DatasetManifest, group_index: int, config: SamplerConfig) -> SampledGroup:
    primary = manifest.groups[group_index]
    rng = group_rng(config, group_index)
    r_tilde, r = draw_replacement_count(len(primary.images), config, rng)
    noisy = sample_noisy_sources(primary.group_id, r, manifest, rng)
    return compose_training_group(primary, noisy, rng, draw_index=config.epoch, drawn_ratio=r_tilde)


def sample_epoch(
    manifest: DatasetManifest, config: SamplerConfig, workers: int = 1
) -> list[SampledGroup]:
    """One sampled group per manifest group, in manifest order."""
    if len(manifest) < 2:
        raise CapacityError(
            f"sampling needs at least 2 groups to draw noisy images, manifest has K={len(manifest)}"
        )
    indices = range(len(manifest))
    if workers <= 1:
        return [sample_group(manifest, k, config) for k in indices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda k: sample_group(manifest, k, config), indices))


def dumps_stream(groups: Iterable[SampledGroup]) -> str:
    """JSON-lines serialization, one record per group."""
    return "".join(json.dumps(g.to_record(), sort_keys=True) + "\n" for g in groups)
