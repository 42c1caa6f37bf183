"""Dataset manifest, map I/O and the shared error hierarchy.

Probability maps are plain ``float64`` arrays with values in ``[0, 1]`` and
binary masks are ``bool`` arrays; both are indexed ``[row, col]``.  A manifest
describes groups of images with their ground-truth masks; an all-zero mask is
not stored on disk but written as the :data:`ZERO` sentinel.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
from PIL import Image

SCHEMA_VERSION = 1
ZERO = "ZERO"


class GCoSODError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(GCoSODError, ValueError):
    """Invalid configuration value."""


class DataError(GCoSODError):
    """Invalid, missing or inconsistent input data."""


class ManifestError(DataError):
    """A manifest failed to parse or validate."""


class CapacityError(DataError):
    """Too few groups or images to satisfy a sampling request."""


@dataclass(frozen=True)
class ImageEntry:
    image_id: str
    image_path: str
    mask_path: str
    width: int
    height: int
    tags: frozenset[str] = frozenset()

    @property
    def is_zero(self) -> bool:
        return self.mask_path == ZERO

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "image_path": self.image_path,
            "mask_path": self.mask_path,
            "width": self.width,
            "height": self.height,
            "tags": sorted(self.tags),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ImageEntry":
        return cls(
            image_id=str(d["image_id"]),
            image_path=str(d["image_path"]),
            mask_path=str(d["mask_path"]),
            width=int(d["width"]),
            height=int(d["height"]),
            tags=frozenset(str(t) for t in d.get("tags", ())),
        )


@dataclass(frozen=True)
class GroupEntry:
    group_id: str
    category: str
    images: tuple[ImageEntry, ...]

    def __len__(self) -> int:
        return len(self.images)

    def to_dict(self) -> dict:
        return {
            "group_id": self.group_id,
            "category": self.category,
            "images": [im.to_dict() for im in self.images],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroupEntry":
        return cls(
            group_id=str(d["group_id"]),
            category=str(d["category"]),
            images=tuple(ImageEntry.from_dict(im) for im in d["images"]),
        )


@dataclass(frozen=True)
class DatasetManifest:
    """A dataset ``D = {G_k}``: an ordered tuple of groups under one root.

    ``root`` is stored as written; a relative root is resolved against the
    directory holding the manifest file and the result kept in ``base``.
    """

    root: str
    groups: tuple[GroupEntry, ...]
    schema_version: int = SCHEMA_VERSION
    base: str = field(default="", compare=False, repr=False)

    def __post_init__(self):
        self.validate()

    def __iter__(self) -> Iterator[GroupEntry]:
        return iter(self.groups)

    def __len__(self) -> int:
        return len(self.groups)

    @property
    def group_ids(self) -> list[str]:
        return [g.group_id for g in self.groups]

    def group(self, group_id: str) -> GroupEntry:
        for g in self.groups:
            if g.group_id == group_id:
                return g
        raise KeyError(group_id)

    def resolve(self, rel: str) -> Path:
        base = self.base or self.root
        return Path(base) / rel

    def validate(self) -> None:
        """Check the structural invariants that need no file access."""
        if self.schema_version != SCHEMA_VERSION:
            raise ManifestError(f"unsupported schema_version {self.schema_version}")
        seen_groups: set[str] = set()
        for g in self.groups:
            if g.group_id in seen_groups:
                raise ManifestError(f"duplicate group_id {g.group_id!r}")
            seen_groups.add(g.group_id)
            if not g.images:
                raise ManifestError(f"group {g.group_id!r} has no images")
            seen_images: set[str] = set()
            for im in g.images:
                if im.image_id in seen_images:
                    raise ManifestError(
                        f"duplicate image_id {im.image_id!r} in group {g.group_id!r}"
                    )
                seen_images.add(im.image_id)
                if im.width <= 0 or im.height <= 0:
                    raise ManifestError(
                        f"image {g.group_id}/{im.image_id} has non-positive size"
                    )
                for p in (im.image_path, im.mask_path):
                    if os.path.isabs(p):
                        raise ManifestError(
                            f"path {p!r} of {g.group_id}/{im.image_id} is not relative to root"
                        )

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "root": self.root,
            "groups": [g.to_dict() for g in self.groups],
        }

    def with_base(self, base: str | os.PathLike) -> "DatasetManifest":
        return DatasetManifest(self.root, self.groups, self.schema_version, str(base))


def manifest_from_dict(d: dict, base: str = "") -> DatasetManifest:
    try:
        return DatasetManifest(
            root=str(d["root"]),
            groups=tuple(GroupEntry.from_dict(g) for g in d["groups"]),
            schema_version=int(d["schema_version"]),
            base=base,
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ManifestError):
            raise
        raise ManifestError(f"malformed manifest: {exc!r}") from exc


def dumps_manifest(manifest: DatasetManifest) -> str:
    return json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n"


def save_manifest(manifest: DatasetManifest, path: str | os.PathLike) -> None:
    """Write the canonical serialization (sorted keys, trailing newline)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_manifest(manifest), encoding="utf-8")


def relocate(manifest: DatasetManifest, manifest_dir: str | os.PathLike) -> DatasetManifest:
    """Rewrite ``root`` relative to ``manifest_dir`` so the file can live there."""
    base = os.path.abspath(manifest.base or manifest.root)
    root = Path(os.path.relpath(base, os.path.abspath(manifest_dir))).as_posix()
    return DatasetManifest(root, manifest.groups, manifest.schema_version, base)


def load_manifest(path: str | os.PathLike, check_files: bool = True) -> DatasetManifest:
    """Load and validate a manifest file.

    With ``check_files`` every referenced image and mask must exist and each
    mask file must match its declared width and height.
    """
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: parse error: {exc}") from exc
    if not isinstance(d, dict):
        raise ManifestError(f"{path}: top level must be an object")
    root = str(d.get("root", ""))
    base = root if os.path.isabs(root) else str(path.parent.resolve() / root)
    manifest = manifest_from_dict(d, base=base)
    if check_files:
        check_manifest_files(manifest)
    return manifest


def check_manifest_files(manifest: DatasetManifest) -> None:
    for g in manifest.groups:
        for im in g.images:
            name = f"{g.group_id}/{im.image_id}"
            if not manifest.resolve(im.image_path).is_file():
                raise ManifestError(f"{name}: missing image file {im.image_path!r}")
            if im.is_zero:
                continue
            mpath = manifest.resolve(im.mask_path)
            if not mpath.is_file():
                raise ManifestError(f"{name}: missing mask file {im.mask_path!r}")
            with Image.open(mpath) as m:
                if m.size != (im.width, im.height):
                    raise ManifestError(
                        f"{name}: mask is {m.size[0]}x{m.size[1]}, "
                        f"expected {im.width}x{im.height}"
                    )


def iter_images(manifest: DatasetManifest) -> Iterable[tuple[GroupEntry, ImageEntry]]:
    for g in manifest.groups:
        for im in g.images:
            yield g, im


def load_map(path: str | os.PathLike, binary: bool = False) -> np.ndarray:
    """Read an 8-bit grayscale raster.

    Returns ``pixel / 255`` as float64, or a bool mask when ``binary`` is set,
    in which case every pixel must be 0 or 255.
    """
    try:
        with Image.open(path) as img:
            if img.mode not in ("L", "1"):
                raise DataError(f"{path}: expected single-channel 8-bit image, got mode {img.mode}")
            arr = np.asarray(img.convert("L"), dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise DataError(f"{path}: unreadable map: {exc}") from exc
    if binary:
        bad = (arr != 0) & (arr != 255)
        if bad.any():
            v = int(arr[bad][0])
            raise DataError(f"{path}: non-binary mask value {v}")
        return arr == 255
    return arr.astype(np.float64) / 255.0


def save_map(values: np.ndarray, path: str | os.PathLike) -> None:
    """Write a probability map or mask as 8-bit grayscale, ``round(p * 255)``."""
    values = np.asarray(values)
    if values.dtype == bool:
        arr = values.astype(np.uint8) * 255
    else:
        arr = np.rint(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path)


def load_ground_truth(manifest: DatasetManifest, image: ImageEntry) -> np.ndarray:
    if image.is_zero:
        return np.zeros((image.height, image.width), dtype=bool)
    return load_map(manifest.resolve(image.mask_path), binary=True)


def load_image(manifest: DatasetManifest, image: ImageEntry) -> np.ndarray:
    with Image.open(manifest.resolve(image.image_path)) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def prediction_path(predictions_dir: str | os.PathLike, group_id: str, image_id: str) -> Path:
    """Layout shared by every prediction-like directory: ``<dir>/<group>/<image>.png``."""
    return Path(predictions_dir) / group_id / f"{image_id}.png"


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DataError(f"dimension mismatch: {a.shape} vs {b.shape}")
