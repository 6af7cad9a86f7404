from pathlib import Path

import numpy as np
import pytest

siamgrid = pytest.importorskip("siamgrid")

FIXTURE = Path(__file__).resolve().parents[1] / "fixtures" / "pairwise_table.csv"


def test_version_and_kinds():
    assert siamgrid.version().startswith("siamgrid")
    assert siamgrid.augmentation_kinds() == [
        "identity", "crop_resize", "rotate", "cutout", "distort", "noise", "blur", "sobel",
    ]


def test_augment_is_seeded_and_identity_is_exact():
    img = (np.arange(24 * 20, dtype=np.float32).reshape(24, 20) % 97) / 96
    assert np.array_equal(siamgrid.augment(img, "identity"), img)
    a = siamgrid.augment(img, "crop_resize,distort", seed=3)
    b = siamgrid.augment(img, "crop_resize,distort", seed=3)
    assert a.shape == img.shape
    assert np.array_equal(a, b)
    assert a.min() >= 0 and a.max() <= 1
    x1, x2 = siamgrid.make_views(img, "identity", "identity", seed=1)
    assert np.array_equal(x1, img) and np.array_equal(x2, img)


def test_bad_spec_raises():
    with pytest.raises(siamgrid.SiamgridError):
        siamgrid.augment(np.zeros((8, 8), np.float32), "no_such_kind")


def test_synthetic_dataset_is_deterministic():
    a = siamgrid.synth_generate(20, image_size=16, seed=5)
    b = siamgrid.synth_generate(20, image_size=16, seed=5)
    assert a["images"].shape == (20, 16, 16)
    assert a["labels"].shape == (20, 4)
    assert np.array_equal(a["images"], b["images"])
    assert a["label_names"][0] == "nodule"
    tail = siamgrid.synth_generate(10, image_size=16, seed=5, first_index=10)
    assert np.array_equal(tail["images"], a["images"][10:])


def test_metrics_match_simple_oracles():
    rng = np.random.default_rng(0)
    scores = rng.random((60, 3))
    labels = (rng.random((60, 3)) < 0.4).astype(np.int8)
    for k in range(3):
        pos, neg = scores[labels[:, k] == 1, k], scores[labels[:, k] == 0, k]
        pairs = (pos[:, None] > neg[None, :]).mean() + 0.5 * (pos[:, None] == neg[None, :]).mean()
        assert siamgrid.per_label_auroc(scores, labels)[k] == pytest.approx(pairs, abs=1e-12)
    direct = ((scores >= 0.5).astype(np.int8) != labels).mean()
    assert siamgrid.hamming_loss(scores, labels) == pytest.approx(direct, abs=1e-15)
    report = siamgrid.metrics_report(scores, labels)
    assert report["n_samples"] == 60
    assert 0 <= report["ranking_error"] <= 1


def test_cosine_schedule_and_loss():
    assert siamgrid.cosine_lr(0.05, 0.0, 100, 0) == 0.05
    assert siamgrid.cosine_lr(0.05, 0.0, 100, 50) == pytest.approx(0.025, abs=1e-12)
    z = np.random.default_rng(1).standard_normal((4, 8)).astype(np.float32)
    assert siamgrid.simsiam_loss(z, z, z, z) == pytest.approx(-1.0, abs=1e-6)
    assert siamgrid.simsiam_loss(-z, -z, z, z) == pytest.approx(1.0, abs=1e-6)
    assert siamgrid.collapse_metric(np.ones((5, 8), np.float32)) == pytest.approx(0.0, abs=1e-7)


def test_nested_splits():
    labels = (np.random.default_rng(2).random((500, 3)) < 0.3).astype(np.int8)
    splits = siamgrid.stratified_indices(labels, [10, 50, 100], seed=1)
    assert set(splits[10.0]) <= set(splits[50.0]) <= set(splits[100.0])
    assert len(splits[100.0]) == 500


def test_fixture_selects_crop_and_distort():
    rows = siamgrid.read_sweep_table(FIXTURE)
    assert len(rows) > 0
    assert siamgrid.select_t_theta(FIXTURE) == "crop_resize+distort"
    code, out, _ = siamgrid.run_cli(["report", "--fixture", str(FIXTURE)])
    assert code == 0
    assert "t_theta: crop_resize+distort" in out


def test_cli_errors_use_exit_codes(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[optim]\nunknown_key = 1\n")
    code, _, err = siamgrid.run_cli(["pretrain", "--config", str(bad), "--store", str(tmp_path / "runs")])
    assert code == 2
    assert "unknown_key" in err
    code, _, _ = siamgrid.run_cli(["probe", "--store", str(tmp_path / "runs")])
    assert code == 3
