import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gcosod.core import ConfigError, DataError, load_map, prediction_path, save_map
from gcosod.uncertainty import UncertaintyConfig, bias_matrix, entropy_map, revise, uncertainty_report

RAW = UncertaintyConfig(clamp_negative=False)


def test_zero_probability_has_zero_uncertainty():
    assert entropy_map(np.array([0.0]))[0] == 0.0


def test_one_clamps_from_tiny_negative():
    raw = entropy_map(np.array([1.0]), RAW)[0]
    assert -2e-6 < raw < 0
    assert raw == pytest.approx(-math.log1p(1e-6), rel=1e-9)
    assert entropy_map(np.array([1.0]))[0] == 0.0


def test_maximum_near_inverse_e():
    grid = np.linspace(0, 1, 10_000)
    u = entropy_map(grid)
    k = int(np.argmax(u))
    assert abs(grid[k] - math.exp(-1)) < 1e-3
    assert abs(u[k] - math.exp(-1)) < 1e-5


def test_full_binary_entropy_peaks_at_half():
    u = entropy_map(np.array([0.0, 0.5, 1.0]), UncertaintyConfig(full_binary_entropy=True))
    assert u[1] == pytest.approx(math.log(2), abs=1e-5)
    assert u[0] == 0.0 and u[2] == 0.0


def test_epsilon_monotone():
    p = np.linspace(0, 1, 101)
    small = entropy_map(p, UncertaintyConfig(epsilon=1e-6, clamp_negative=False))
    big = entropy_map(p, UncertaintyConfig(epsilon=1e-2, clamp_negative=False))
    assert np.all(big <= small)


def test_bad_epsilon():
    with pytest.raises(ConfigError):
        UncertaintyConfig(epsilon=0)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 10), st.integers(1, 10)), elements=st.floats(0, 1)))
def test_entropy_bounds_and_revision_set(p):
    u = entropy_map(p)
    assert u.min() >= 0.0
    assert u.max() <= math.exp(-1)
    r = revise(p, u)
    zeroed = (r == 0) & (p != 0)
    np.testing.assert_array_equal(zeroed, (u > u.mean()) & (p != 0))
    np.testing.assert_array_equal(r[u <= u.mean()], p[u <= u.mean()])
    assert np.all(r[u > u.mean()] == 0)


def test_revise_hot_pixel():
    p = np.zeros((3, 3))
    p[1, 1] = math.exp(-1)
    u = entropy_map(p)
    r = revise(p, u)
    assert r[1, 1] == 0.0
    expected = p.copy()
    expected[1, 1] = 0.0
    np.testing.assert_array_equal(r, expected)
    assert bias_matrix(u)[1, 1] > 0


def test_revise_constant_map_is_unchanged():
    p = np.full((4, 4), 0.3)
    np.testing.assert_array_equal(revise(p, entropy_map(p)), p)


def test_revise_shape_mismatch():
    with pytest.raises(DataError):
        revise(np.zeros((2, 2)), np.zeros((3, 3)))


def test_report_writes_maps(synth_small, tmp_path):
    m, _ = synth_small
    rng = np.random.default_rng(1)
    preds = tmp_path / "pred"
    for g in m.groups:
        for im in g.images:
            save_map(rng.random((im.height, im.width)), prediction_path(preds, g.group_id, im.image_id))
    summary = uncertainty_report(m, preds, out_dir=tmp_path / "out")
    g0, im0 = m.groups[0], m.groups[0].images[0]
    p = load_map(prediction_path(preds, g0.group_id, im0.image_id))
    u = entropy_map(p)
    revised = load_map(prediction_path(tmp_path / "out" / "revised", g0.group_id, im0.image_id))
    np.testing.assert_array_equal(revised, revise(p, u))
    umap = load_map(prediction_path(tmp_path / "out" / "uncertainty", g0.group_id, im0.image_id))
    np.testing.assert_allclose(umap, u / math.exp(-1), atol=0.5 / 255 + 1e-12)
    on_disk = json.loads((tmp_path / "out" / "uncertainty_summary.json").read_text())
    assert on_disk == json.loads(json.dumps(summary))
    rec = on_disk["groups"][g0.group_id]["images"][im0.image_id]
    assert rec["removed_fraction"] == pytest.approx(np.mean(u > u.mean()))


def test_report_missing_prediction(synth_small, tmp_path):
    m, _ = synth_small
    with pytest.raises(DataError, match="missing"):
        uncertainty_report(m, tmp_path / "nothing", out_dir=tmp_path / "out")
    assert not (tmp_path / "out").exists()
