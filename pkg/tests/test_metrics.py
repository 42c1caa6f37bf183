import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gcosod.builder import ZeroBuildConfig, build_zero
from gcosod.core import DataError, load_ground_truth, prediction_path, save_map
from gcosod.metrics import (
    MetricConfig,
    alignment_matrix,
    binarize,
    e_measure,
    evaluate_dataset,
    f_measure,
    iou,
    mae,
    precision_recall_f,
    s_measure,
)
from oracles import f_oracle, iou_oracle, mae_oracle, xi_mean_oracle

STRICT = MetricConfig()
REFERENCE = MetricConfig(s_mode="reference")

prob_maps = arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(2, 12)),
                   elements=st.floats(0, 1, allow_nan=False))


def _box_gt(h=16, w=16, r=(4, 10), c=(3, 9)):
    gt = np.zeros((h, w), bool)
    gt[r[0]:r[1], c[0]:c[1]] = True
    return gt


# binarize


def test_binarize_below_threshold():
    assert not binarize(np.full((3, 3), 0.4), 0.5).any()


def test_binarize_at_threshold_is_positive():
    assert binarize(np.full((3, 3), 0.5), 0.5).all()


def test_binarize_mixed():
    np.testing.assert_array_equal(binarize(np.array([[0.1, 0.7], [0.5, 0.49]]), 0.5),
                                  [[False, True], [True, False]])


# IoU / MAE


def test_iou_both_empty_is_one():
    z = np.zeros((4, 4), bool)
    assert iou(z, z) == 1.0


def test_iou_empty_gt_nonempty_pred_is_zero():
    z = np.zeros((4, 4), bool)
    p = z.copy()
    p[0, 0] = True
    assert iou(p, z) == 0.0


def test_iou_top_row_vs_left_column():
    pred = np.array([[1, 1], [0, 0]], bool)
    gt = np.array([[1, 0], [1, 0]], bool)
    assert iou_oracle(pred, gt) == 1 / 3
    assert iou(pred, gt) == 1 / 3


def test_iou_dimension_mismatch():
    with pytest.raises(DataError):
        iou(np.zeros((2, 2), bool), np.zeros((2, 3), bool))


def test_mae_examples():
    gt = _box_gt()
    assert mae(gt.astype(float), gt) == 0.0
    z = np.zeros((4, 4), bool)
    assert mae(np.ones((4, 4)), z) == 1.0
    assert mae_oracle(np.full((4, 4), 0.25), z) == 0.25
    assert mae(np.full((4, 4), 0.25), z) == 0.25


def test_mae_dimension_mismatch():
    with pytest.raises(DataError):
        mae(np.zeros((2, 2)), np.zeros((3, 2), bool))


def test_iou_mae_match_oracle_random(rng):
    for _ in range(200):
        p = rng.random((16, 16))
        gt = rng.random((16, 16)) < rng.random()
        pred = binarize(p, 0.5)
        assert abs(iou(pred, gt) - iou_oracle(pred, gt)) <= 1e-12
        assert abs(mae(p, gt) - mae_oracle(p, gt)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_adding_correct_pixel_never_decreases_iou(seed):
    r = np.random.default_rng(seed)
    gt = r.random((8, 8)) < 0.4
    pred = r.random((8, 8)) < 0.4
    missing = np.argwhere(gt & ~pred)
    if len(missing) == 0:
        return
    before = iou(pred, gt)
    pred[tuple(missing[0])] = True
    assert iou(pred, gt) >= before


# F-measure


def test_f_half_gt_all_ones_pred():
    gt = np.zeros((4, 4), bool)
    gt[:2] = True
    pred = np.ones((4, 4), bool)
    expected = 1.3 * 0.5 / (0.3 * 0.5 + 1)
    assert abs(f_oracle(pred, gt, 0.3) - expected) < 1e-15
    precision, recall, f = precision_recall_f(pred, gt, 0.3)
    assert precision == 0.5 and recall == 1.0
    assert abs(f - 0.5652173913043478) <= 1e-12


def test_f_perfect_prediction():
    gt = _box_gt()
    assert f_measure(gt.astype(float), gt)[1] == pytest.approx(1.0, abs=1e-12)


def test_f_curve_matches_single_threshold_oracle(rng):
    cfg = MetricConfig(thresholds=11)
    for _ in range(20):
        p = rng.random((12, 12))
        gt = rng.random((12, 12)) < 0.3
        curve, fmax = f_measure(p, gt, cfg)
        for k, t in enumerate(cfg.sweep()):
            assert abs(curve[k] - f_oracle(p >= t, gt, cfg.beta_squared)) <= 1e-12
        assert fmax == curve.max()


@settings(max_examples=100, deadline=None)
@given(prob_maps)
def test_f_empty_gt_is_zero_everywhere(p):
    curve, fmax = f_measure(p, np.zeros(p.shape, bool))
    assert fmax == 0.0
    assert not curve.any()


@settings(max_examples=100, deadline=None)
@given(prob_maps, st.integers(0, 2**32 - 1))
def test_scores_within_unit_interval(p, seed):
    gt = np.random.default_rng(seed).random(p.shape) < 0.5
    assert 0.0 <= iou(binarize(p), gt) <= 1.0
    assert 0.0 <= mae(p, gt) <= 1.0
    assert 0.0 <= f_measure(p, gt)[1] <= 1.0


# S-measure


def test_s_strict_empty_gt_is_zero(rng):
    z = np.zeros((10, 10), bool)
    for p in (rng.random((10, 10)), np.zeros((10, 10)), np.ones((10, 10))):
        assert s_measure(p, z, STRICT) == 0.0


def test_s_reference_empty_gt_empty_pred_is_one():
    z = np.zeros((10, 10), bool)
    assert s_measure(np.zeros((10, 10)), z, REFERENCE) == 1.0
    assert s_measure(np.full((10, 10), 0.3), z, REFERENCE) == pytest.approx(0.7)


# the stabilising epsilon keeps identity a hair below 1 on small objects
@pytest.mark.parametrize("gt", [_box_gt(), _box_gt(r=(0, 3), c=(0, 16)), _box_gt(r=(10, 16), c=(12, 16))])
def test_s_identity_is_one(gt):
    assert s_measure(gt.astype(float), gt) == pytest.approx(1.0, abs=1e-8)


def test_s_identity_single_corner_pixel_is_nearly_one():
    # one-pixel quadrants leave only the stabilising epsilon in the ssim ratio
    gt = _box_gt(r=(15, 16), c=(15, 16))
    assert s_measure(gt.astype(float), gt) == pytest.approx(1.0, abs=1e-5)


def test_s_full_gt_is_mean_prediction():
    gt = np.ones((4, 4), bool)
    assert s_measure(np.full((4, 4), 0.8), gt) == pytest.approx(0.8)


def test_s_worse_prediction_scores_lower():
    gt = _box_gt()
    good = gt.astype(float) * 0.9
    bad = np.roll(gt, 5, axis=1).astype(float)
    assert s_measure(good, gt) > s_measure(bad, gt)


def _full_range_u8(rng, shape):
    # the reference min-max normalises predictions; pin both ends so that is a no-op
    p8 = rng.integers(0, 256, shape).astype(np.uint8)
    p8.flat[0], p8.flat[-1] = 0, 255
    return p8


def test_s_reference_matches_pysodmetrics(rng):
    m = pytest.importorskip("py_sod_metrics")
    for _ in range(10):
        gt = _box_gt(20, 24, r=tuple(sorted(rng.choice(20, 2, replace=False))),
                     c=tuple(sorted(rng.choice(24, 2, replace=False))))
        p8 = _full_range_u8(rng, gt.shape)
        sm = m.Smeasure()
        sm.step(pred=p8, gt=gt.astype(np.uint8) * 255)
        assert s_measure(p8 / 255.0, gt, REFERENCE) == pytest.approx(sm.get_results()["sm"], abs=1e-9)


# E-measure


def test_alignment_matrix_matches_pixel_oracle(rng):
    for _ in range(20):
        s = rng.random((8, 8)) < 0.5
        y = rng.random((8, 8)) < 0.3
        assert abs(alignment_matrix(s, y).mean() - xi_mean_oracle(s, y)) <= 1e-12


def test_e_curve_matches_pixel_oracle(rng):
    cfg = MetricConfig(thresholds=9)
    for _ in range(10):
        p = rng.random((10, 10))
        gt = rng.random((10, 10)) < 0.4
        curve, _ = e_measure(p, gt, cfg, mode="xi-mean")
        for k, t in enumerate(cfg.sweep()):
            assert abs(curve[k] - xi_mean_oracle(p >= t, gt)) <= 1e-12
        enh, _ = e_measure(p, gt, cfg, mode="enhanced")
        for k, t in enumerate(cfg.sweep()):
            xi = alignment_matrix(p >= t, gt)
            assert abs(enh[k] - np.mean((1 + xi) ** 2 / 4)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(prob_maps)
def test_e_xi_mean_empty_gt_is_zero(p):
    curve, emax = e_measure(p, np.zeros(p.shape, bool), mode="xi-mean")
    assert emax == 0.0
    assert not curve.any()


def test_e_identity_is_one():
    gt = _box_gt()
    _, emax = e_measure(gt.astype(float), gt, mode="xi-mean")
    assert emax == pytest.approx(1.0, abs=1e-12)


def test_e_constant_prediction_is_zero():
    gt = _box_gt()
    xi = alignment_matrix(np.full(gt.shape, 0.7), gt)
    np.testing.assert_allclose(xi, 0.0, atol=1e-12)
    _, emax = e_measure(np.full(gt.shape, 0.7), gt, mode="xi-mean")
    assert emax == 0.0


def test_e_enhanced_matches_pysodmetrics_up_to_n_minus_1(rng):
    m = pytest.importorskip("py_sod_metrics")
    for _ in range(5):
        gt = _box_gt(20, 24, r=(3, 12), c=(5, 17))
        p8 = _full_range_u8(rng, gt.shape)
        em = m.Emeasure()
        em.step(pred=p8, gt=gt.astype(np.uint8) * 255)
        ref = em.get_results()["em"]["curve"][::-1]  # stored high threshold first
        ours, _ = e_measure(p8 / 255.0, gt, mode="enhanced")
        # the reference divides the sum by N - 1 instead of N
        n = gt.size
        np.testing.assert_allclose(ours * n / (n - 1), ref, atol=1e-9)


def test_f_curve_matches_pysodmetrics(rng):
    m = pytest.importorskip("py_sod_metrics")
    gt = _box_gt(20, 24, r=(2, 15), c=(4, 11))
    p8 = _full_range_u8(rng, gt.shape)
    fm = m.Fmeasure()
    fm.step(pred=p8, gt=gt.astype(np.uint8) * 255)
    ref = fm.get_results()["fm"]["curve"][::-1]
    ours, _ = f_measure(p8 / 255.0, gt)
    np.testing.assert_allclose(ours, ref, atol=1e-9)


def test_config_validation():
    with pytest.raises(ValueError):
        MetricConfig(binarize_threshold=1.0)
    with pytest.raises(ValueError):
        MetricConfig(beta_squared=0)
    with pytest.raises(ValueError):
        MetricConfig(s_alpha=1.5)
    with pytest.raises(ValueError):
        MetricConfig(s_mode="loose")


def test_evaluate_dataset_aggregates_and_reports_missing(synth_small, tmp_path):
    m, _ = synth_small
    rng = np.random.default_rng(2)
    skipped = (m.groups[1].group_id, m.groups[1].images[2].image_id)
    for g in m.groups:
        for im in g.images:
            if (g.group_id, im.image_id) != skipped:
                save_map(rng.random((im.height, im.width)), prediction_path(tmp_path, g.group_id, im.image_id))
    report = evaluate_dataset(m, tmp_path, workers=3)
    assert not report.complete
    assert [(e["group_id"], e["image_id"]) for e in report.errors] == [skipped]
    ious = [r.iou for r in report.per_image]
    assert report.dataset["iou"] == pytest.approx(math.fsum(ious) / len(ious), abs=1e-12)
    order = [(g.group_id, im.image_id) for g in m.groups for im in g.images if (g.group_id, im.image_id) != skipped]
    assert [(r.group_id, r.image_id) for r in report.per_image] == order
    first = report.per_image[0]
    gt = load_ground_truth(m, m.groups[0].images[0])
    assert not first.is_zero_gt and gt.any()


def test_evaluate_perfect_and_zero_predictions(synth_small, tmp_path):
    m, _ = synth_small
    for g in m.groups:
        for im in g.images:
            save_map(load_ground_truth(m, im), prediction_path(tmp_path / "gt", g.group_id, im.image_id))
    perfect = evaluate_dataset(m, tmp_path / "gt").dataset
    assert perfect["iou"] == 1.0 and perfect["mae"] == 0.0

    zero, _ = build_zero(m, ZeroBuildConfig(num_groups=3, min_group_size=2, max_group_size=4))
    for g in zero.groups:
        for im in g.images:
            save_map(np.zeros((im.height, im.width)), prediction_path(tmp_path / "z", g.group_id, im.image_id))
    report = evaluate_dataset(zero, tmp_path / "z")
    assert report.complete
    assert report.dataset["iou"] == 1.0 and report.dataset["mae"] == 0.0
    assert all(r.is_zero_gt for r in report.per_image)
