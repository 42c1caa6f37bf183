"""Re-arrange a source manifest into partially-common and zero-common groups.

``build_common`` keeps a controlled fraction of each category's images and
fills the remaining slots with one image from each of several other source
groups, labelled ZERO.  ``build_zero`` assembles groups of images drawn from
pairwise distinct source groups whose category tags do not overlap, so no
group has a common salient object.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import ZERO, ConfigError, DataError, DatasetManifest, GroupEntry, ImageEntry

MAX_REDRAWS = 1000


@dataclass(frozen=True)
class RatioRange:
    lo: float
    hi: float
    closed_hi: bool = False

    def __contains__(self, ratio: float) -> bool:
        return self.lo <= ratio and (ratio <= self.hi if self.closed_hi else ratio < self.hi)

    def __str__(self) -> str:
        return f"[{self.lo:g},{self.hi:g}{']' if self.closed_hi else ')'}"

    @classmethod
    def parse(cls, text: str) -> "RatioRange":
        m = re.fullmatch(r"\s*\[\s*([0-9.]+)\s*,\s*([0-9.]+)\s*([\])])\s*", text)
        if not m:
            raise ConfigError(f"bad ratio range {text!r}; expected e.g. '[0.2,0.4)'")
        return cls(float(m.group(1)), float(m.group(2)), m.group(3) == "]")


DEFAULT_RANGES = (RatioRange(0.2, 0.4), RatioRange(0.4, 0.6), RatioRange(0.6, 0.8, closed_hi=True))


def parse_ranges(text: str) -> tuple[RatioRange, ...]:
    """Parse ``"[0.2,0.4);[0.4,0.6);[0.6,0.8]"``."""
    return tuple(RatioRange.parse(part) for part in text.split(";") if part.strip())


@dataclass(frozen=True)
class CommonBuildConfig:
    ratio_ranges: tuple[RatioRange, ...] = DEFAULT_RANGES
    variants_per_category: int = 3
    seed: int = 0
    exclusions: frozenset[str] = frozenset()

    def __post_init__(self):
        rs = self.ratio_ranges
        if len(rs) != self.variants_per_category:
            raise ConfigError(
                f"{self.variants_per_category} variants need as many ratio ranges, got {len(rs)}"
            )
        for r in rs:
            if not 0 < r.lo < r.hi <= 1:
                raise ConfigError(f"ratio range {r} must lie within (0, 1]")
        ordered = sorted(rs, key=lambda r: r.lo)
        for a, b in zip(ordered, ordered[1:]):
            if b.lo < a.hi or (b.lo == a.hi and a.closed_hi):
                raise ConfigError(f"ratio ranges {a} and {b} overlap")


@dataclass(frozen=True)
class ZeroBuildConfig:
    num_groups: int = 55
    min_group_size: int = 4
    max_group_size: int = 8
    seed: int = 0
    exclusions: frozenset[str] = frozenset()
    overlap_threshold: float = 0.0

    def __post_init__(self):
        if not 1 <= self.min_group_size <= self.max_group_size:
            raise ConfigError(
                f"need 1 <= min_group_size <= max_group_size, got {self.min_group_size}, {self.max_group_size}"
            )
        if self.num_groups < 1:
            raise ConfigError("num_groups must be >= 1")


@dataclass
class BuildStats:
    seed: int
    groups: list[dict] = field(default_factory=list)
    violations: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            {"seed": self.seed, "groups": self.groups, "violations": self.violations},
            indent=2,
            sort_keys=True,
        ) + "\n"


def _output_image(src_group: GroupEntry, im: ImageEntry, zero: bool) -> ImageEntry:
    return ImageEntry(
        image_id=f"{src_group.group_id}__{im.image_id}",
        image_path=im.image_path,
        mask_path=ZERO if zero else im.mask_path,
        width=im.width,
        height=im.height,
        tags=im.tags,
    )


def feasible_primary_counts(n: int, ratio_range: RatioRange) -> list[int]:
    return [k for k in range(1, n + 1) if k / n in ratio_range]


def build_common(source: DatasetManifest, config: CommonBuildConfig = CommonBuildConfig()):
    """Build ``variants_per_category`` partially-common groups per source category.

    Variant ``v`` keeps ``n_p`` images of the category, ``n_p`` uniform among
    the counts with ``n_p / N`` in ``ratio_ranges[v]``, where ``N`` is the size
    of the category's first source group.  The other ``N - n_p`` slots take one
    image each from distinct other-category source groups; fillers never carry
    the primary category tag and never come from an excluded category.
    Returns ``(manifest, stats)``.
    """
    if len(source) < 2:
        raise DataError(f"build_common needs at least 2 source groups, got {len(source)}")
    rng = np.random.default_rng([config.seed, 0xC0])
    by_cat: dict[str, list[GroupEntry]] = {}
    for g in source.groups:
        by_cat.setdefault(g.category, []).append(g)

    out_groups = []
    stats = BuildStats(seed=config.seed)
    for cat, cat_groups in by_cat.items():
        n = len(cat_groups[0].images)
        pool = [(g, im) for g in cat_groups for im in g.images]
        donors = [g for g in source.groups if g.category != cat and g.category not in config.exclusions]
        for v, rr in enumerate(config.ratio_ranges):
            counts = feasible_primary_counts(n, rr)
            if not counts:
                raise DataError(f"category {cat!r}: range {rr} admits no primary count for group size {n}")
            n_p = counts[int(rng.integers(len(counts)))]
            picks = rng.choice(len(pool), size=n_p, replace=False)
            members = [(pool[int(i)][0], pool[int(i)][1], False) for i in picks]

            need = n - n_p
            fillers = []
            used_cats: set[str] = set()
            for di in rng.permutation(len(donors)):
                if len(fillers) == need:
                    break
                d = donors[int(di)]
                if d.category in used_cats:
                    continue
                eligible = [im for im in d.images if cat not in im.tags]
                if not eligible:
                    continue
                fillers.append((d, eligible[int(rng.integers(len(eligible)))], True))
                used_cats.add(d.category)
            if len(fillers) < need:
                raise DataError(
                    f"category {cat!r}: need {need} noisy images but only {len(fillers)} "
                    f"eligible source groups remain after exclusions"
                )
            members += fillers
            order = rng.permutation(len(members))
            images = tuple(_output_image(members[int(i)][0], members[int(i)][1], members[int(i)][2]) for i in order)
            gid = f"{cat}__v{v}"
            out_groups.append(GroupEntry(gid, cat, images))
            stats.groups.append({
                "group_id": gid,
                "category": cat,
                "range": str(rr),
                "n_primary": n_p,
                "size": n,
                "ratio": n_p / n,
                "sources": [members[int(i)][0].group_id for i in order],
            })
    manifest = DatasetManifest(root=source.root, groups=tuple(out_groups), base=source.base)
    return manifest, stats


def _non_excluded(tags, exclusions) -> set[str]:
    return {t for t in tags if t not in exclusions}


def _draw_zero_group(source: DatasetManifest, size: int, exclusions, rng):
    """Greedy draw of ``size`` images from distinct source groups with disjoint tags."""
    chosen = []
    seen_tags: set[str] = set()
    for gi in rng.permutation(len(source)):
        g = source.groups[int(gi)]
        for ii in rng.permutation(len(g.images)):
            im = g.images[int(ii)]
            tags = _non_excluded(im.tags, exclusions)
            if tags.isdisjoint(seen_tags):
                chosen.append((g, im))
                seen_tags |= tags
                break
        if len(chosen) == size:
            return chosen
    return None


def build_zero(source: DatasetManifest, config: ZeroBuildConfig = ZeroBuildConfig()):
    """Build ``num_groups`` groups with no common salient category.

    Each group takes at most one image per source group; a candidate group is
    re-drawn (up to 1000 times) until :func:`validate_zero` finds no violation.
    Returns ``(manifest, stats)``.
    """
    if len(source) < config.max_group_size:
        raise DataError(
            f"build_zero needs at least max_group_size={config.max_group_size} source groups, got {len(source)}"
        )
    rng = np.random.default_rng([config.seed, 0x2E])
    out_groups = []
    stats = BuildStats(seed=config.seed)
    for k in range(config.num_groups):
        size = int(rng.integers(config.min_group_size, config.max_group_size + 1))
        gid = f"zero-{k:03d}"
        for _ in range(MAX_REDRAWS):
            chosen = _draw_zero_group(source, size, config.exclusions, rng)
            if chosen is None:
                continue
            group = GroupEntry(gid, "none", tuple(_output_image(g, im, True) for g, im in chosen))
            if not _group_violations(group, config.exclusions, config.overlap_threshold):
                break
        else:
            raise DataError(
                f"{gid}: no tag-disjoint group of {size} images found in {MAX_REDRAWS} draws; "
                f"relax exclusions or group sizes"
            )
        out_groups.append(group)
        stats.groups.append({
            "group_id": gid,
            "category": "none",
            "n_primary": 0,
            "size": size,
            "ratio": 0.0,
            "sources": [g.group_id for g, _ in chosen],
        })
    manifest = DatasetManifest(root=source.root, groups=tuple(out_groups), base=source.base)
    stats.violations = validate_zero(manifest, config.exclusions, config.overlap_threshold)
    return manifest, stats


def _group_violations(group: GroupEntry, exclusions, overlap_threshold: float) -> list[dict]:
    n = len(group.images)
    limit = max(2, math.ceil(overlap_threshold * n))
    counts: dict[str, int] = {}
    for im in group.images:
        for t in _non_excluded(im.tags, exclusions):
            counts[t] = counts.get(t, 0) + 1
    return [
        {"group_id": group.group_id, "tag": t, "count": c, "fraction": c / n}
        for t, c in sorted(counts.items())
        if c >= limit
    ]


def validate_zero(
    manifest: DatasetManifest, exclusions: Sequence[str] | frozenset = frozenset(), overlap_threshold: float = 0.0
) -> list[dict]:
    """List every (group, tag) where a non-excluded tag recurs too often.

    A tag is a violation when it appears in at least
    ``max(2, ceil(overlap_threshold * group_size))`` images of a group; with
    the default threshold any shared tag counts.  An empty list means clean.
    """
    exclusions = frozenset(exclusions)
    out = []
    for g in manifest.groups:
        out += _group_violations(g, exclusions, overlap_threshold)
    return out


@dataclass
class RatioHistogram:
    rows: list[tuple[str, int, int, float]]
    ranges: tuple[RatioRange, ...]
    counts: list[int]
    categories: list[list[str]]
    outside: list[str]


def primary_ratio_histogram(manifest: DatasetManifest, ranges: Sequence[RatioRange] = DEFAULT_RANGES) -> RatioHistogram:
    """Per-group ``(group_id, n_primary, N, ratio)`` with counts per ratio range.

    Primary images are those whose label is not ZERO.
    """
    rows = []
    counts = [0] * len(ranges)
    cats: list[list[str]] = [[] for _ in ranges]
    outside = []
    for g in manifest.groups:
        n = len(g.images)
        n_p = sum(not im.is_zero for im in g.images)
        ratio = n_p / n
        rows.append((g.group_id, n_p, n, ratio))
        for i, rr in enumerate(ranges):
            if ratio in rr:
                counts[i] += 1
                cats[i].append(g.category)
                break
        else:
            outside.append(g.group_id)
    return RatioHistogram(rows, tuple(ranges), counts, cats, outside)
