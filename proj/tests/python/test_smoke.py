import json

import numpy as np
import pytest

import dmlab


def test_scene_shapes_and_determinism():
    img, mask, meta = dmlab.generate_scene(size=64, n_targets=2, seed=7)
    assert img.shape == (64, 64) and mask.shape == (64, 64)
    assert mask.dtype == bool and mask.any()
    assert 0.0 <= img.min() and img.max() <= 1.0
    again, _, _ = dmlab.generate_scene(size=64, n_targets=2, seed=7)
    np.testing.assert_array_equal(img, again)
    assert "targets" in meta


def test_self_evaluation_is_perfect():
    _, mask, _ = dmlab.generate_scene(size=64, n_targets=3, seed=3)
    iou, inter, union = dmlab.pixel_iou(mask, mask)
    assert iou == 1.0 and inter == union
    m = dmlab.evaluate([mask], [mask])
    assert m["iou"] == 1.0 and m["pd"] == 1.0 and m["fa"] == 0.0


def test_mosaic_of_constant_images_has_no_discrepancy():
    imgs = [np.full((16, 16), 0.4)] * 4
    masks = [np.zeros((16, 16), dtype=np.uint8)] * 4
    out, out_mask, meta = dmlab.mosaic(imgs, masks, 32, seed=1)
    assert out.shape == (32, 32)
    assert dmlab.quadrant_discrepancy(out) == pytest.approx(0.0, abs=1e-12)
    assert not out_mask.any()
    assert "mosaic" in meta["lineage"]


def test_cut_and_paste_formula():
    rng = np.random.default_rng(0)
    a, b = rng.random((8, 8)), rng.random((8, 8))
    m = rng.random((8, 8)) > 0.5
    out = dmlab.cut_and_paste(a, b, m)
    np.testing.assert_array_equal(out, np.where(m, b, a))


def test_soft_iou_spot_value():
    gt = np.zeros((8, 8), dtype=np.uint8)
    gt[2:4, 2:7] = 1  # 10 target pixels
    loss, grad = dmlab.soft_iou_loss(np.zeros((8, 8)), gt, alpha=1.0)
    assert loss == pytest.approx(10.0 / 11.0, abs=1e-12)
    assert grad.shape == (8, 8)
    loss_same, _ = dmlab.soft_iou_loss(gt.astype(float), gt)
    assert loss_same == pytest.approx(0.0, abs=1e-12)


def test_rpca_recovers_low_rank_plus_spikes():
    rng = np.random.default_rng(1)
    low = rng.standard_normal((40, 2)) @ rng.standard_normal((2, 40))
    sparse = np.zeros((40, 40))
    idx = rng.choice(1600, 32, replace=False)
    sparse.flat[idx] = rng.choice([-5.0, 5.0], 32)
    l, s, iters, converged = dmlab.rpca(low + sparse, 1.0 / np.sqrt(40))
    assert converged
    assert np.linalg.norm(l - low) / np.linalg.norm(low) < 1e-4


def test_classical_detectors_find_a_bright_spot():
    img = np.full((32, 32), 0.2)
    img[15:18, 15:18] = 0.9
    for scores in (dmlab.tophat(img, 3), dmlab.lcm(img)):
        # The larger LCM scales spread the peak into a plateau, so check the value.
        assert scores[16, 16] == scores.max() > scores[0, 0]
    mask = dmlab.threshold(dmlab.tophat(img, 3), "fixed", tau=0.3)
    assert mask[16, 16] and mask.sum() == 9


def test_forward_diffuse_marginal():
    sched = dmlab.NoiseSchedule.linear(100)
    z0 = np.full((20000, 1), 2.0)
    zt = dmlab.forward_diffuse(z0, 50, sched, seed=5)
    ab = sched.alpha_bar(50)
    assert zt.mean() == pytest.approx(np.sqrt(ab) * 2.0, abs=4 * np.sqrt((1 - ab) / 20000))
    assert zt.var() == pytest.approx(1 - ab, rel=0.05)


def test_config_round_trip_and_rejection():
    cfg = json.loads(dmlab.default_config())
    assert cfg["schema_version"] == 1
    cfg["detector"]["unknown_knob"] = 1
    with pytest.raises(ValueError):
        dmlab.run_ablation(json.dumps(cfg))
