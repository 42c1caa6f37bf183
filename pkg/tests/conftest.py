import sys

import numpy as np
import pytest

from gcosod.core import ZERO, DatasetManifest, GroupEntry, ImageEntry
from gcosod.synth import SynthConfig, generate_synthetic_dataset


def make_manifest(sizes, tags=None, root=".", size=(8, 8)):
    """In-memory manifest with groups ``g0, g1, ...`` of the given sizes.

    ``tags[k][j]`` overrides the tag set of image ``j`` in group ``k``; by
    default every image is tagged with its group category only.
    """
    groups = []
    for k, n in enumerate(sizes):
        images = []
        for j in range(n):
            t = tags[k][j] if tags else {f"cat{k}"}
            images.append(ImageEntry(f"im{j}", f"images/g{k}/{j}.png", f"masks/g{k}/{j}.png",
                                     size[1], size[0], frozenset(t)))
        groups.append(GroupEntry(f"g{k}", f"cat{k}", tuple(images)))
    return DatasetManifest(root=root, groups=tuple(groups))


@pytest.fixture(scope="session")
def synth_small(tmp_path_factory):
    """4 categories x 5 images, 32 px."""
    out = tmp_path_factory.mktemp("synth_small")
    cfg = SynthConfig(num_categories=4, group_size=5, image_size=32, seed=11)
    return generate_synthetic_dataset(cfg, out), out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


__all__ = ["make_manifest", "ZERO"]
