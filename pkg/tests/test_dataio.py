"""Dataset synthesis, splitting, and CSV persistence tests."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from mogan.dataio import (DataError, FaultClassSpec, ImbalanceSpec,
                          LabeledDataset, Standardizer, default_fault_specs,
                          load_csv, make_imbalanced_dataset, stratified_split,
                          synth_signal, synthesize_dataset, write_csv)

WINDOW = 16


def pure_tone(noise=0.0):
    return FaultClassSpec("tone", base_freq=30.0, harmonics=[(1, 1.0)],
                          noise_sigma=noise)


# ---------------------------------------------------------------------------
# signal synthesis


def test_pure_sinusoid_rms():
    # 12 kHz sampling at 30 Hz: 400 samples hold exactly one period
    x = synth_signal(pure_tone(), 400, seed=0)
    rms = np.sqrt(np.mean(x * x))
    assert abs(rms - 1 / np.sqrt(2)) <= 1e-6


def test_normal_spec_is_harmonics_only():
    spec = default_fault_specs()[0]
    assert spec.impulse_amplitude == 0.0
    t = np.arange(64) / 12000.0
    manual = sum(a * np.sin(2 * np.pi * m * spec.base_freq * t)
                 for m, a in spec.harmonics)
    assert np.array_equal(spec.deterministic_signal(64), manual)


def test_impulse_train_rings_down():
    spec = FaultClassSpec("f", base_freq=30.0, impulse_period=8,
                          impulse_amplitude=2.0, ring_decay=0.5, noise_sigma=0.0)
    x = spec.deterministic_signal(20)
    assert x[0] == 2.0
    assert x[1] == 1.0
    # second impulse superposes on the first one's tail
    assert x[8] == pytest.approx(2.0 + 2.0 * 0.5 ** 8)


def test_synth_signal_deterministic():
    spec = default_fault_specs()[1]
    a = synth_signal(spec, 64, seed=5)
    b = synth_signal(spec, 64, seed=5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, synth_signal(spec, 64, seed=6))


def test_synth_signal_window_floor():
    with pytest.raises(DataError):
        synth_signal(pure_tone(), WINDOW - 1, seed=0)


def test_spec_validation():
    with pytest.raises(DataError):
        FaultClassSpec("x", 30.0, harmonics=[(1, np.inf)])
    with pytest.raises(DataError):
        FaultClassSpec("x", 30.0, ring_decay=1.0)
    with pytest.raises(DataError):
        FaultClassSpec("x", 30.0, noise_sigma=-0.1)
    with pytest.raises(DataError):
        FaultClassSpec("x", 30.0, impulse_period=-3)
    with pytest.raises(DataError):
        FaultClassSpec("x", 30.0, impulse_amplitude=1.0)  # amplitude without period


# ---------------------------------------------------------------------------
# dataset synthesis


def test_synthesize_counts_and_names():
    specs = default_fault_specs()
    ds = synthesize_dataset(specs, (12, 3, 4, 5), WINDOW, seed=0)
    assert ds.n == 24 and ds.dim == WINDOW
    assert list(ds.class_counts()) == [12, 3, 4, 5]
    assert ds.class_names == [s.name for s in specs]


def test_synthesize_validation():
    specs = default_fault_specs()
    with pytest.raises(DataError):
        synthesize_dataset(specs, (1, 2), WINDOW, seed=0)
    with pytest.raises(DataError):
        synthesize_dataset(specs, (1, -1, 1, 1), WINDOW, seed=0)
    with pytest.raises(DataError):
        synthesize_dataset(specs, (1, 1, 1, 1), 8, seed=0)


def test_make_imbalanced_histogram_and_shuffle():
    specs = default_fault_specs()
    imb = ImbalanceSpec([50, 10, 10, 10], window_len=WINDOW, seed=3)
    ds = make_imbalanced_dataset(specs, imb)
    assert list(ds.class_counts()) == [50, 10, 10, 10]
    # rows are shuffled away from by-class block order, deterministically
    assert not np.array_equal(ds.labels, np.sort(ds.labels))
    again = make_imbalanced_dataset(specs, imb)
    assert np.array_equal(ds.features, again.features)
    assert np.array_equal(ds.labels, again.labels)


def test_make_imbalanced_paper_regimes():
    specs = default_fault_specs()
    big = make_imbalanced_dataset(specs, ImbalanceSpec([2000, 100, 100, 100],
                                                       window_len=WINDOW))
    assert big.n == 2300
    two = make_imbalanced_dataset(specs[:2], ImbalanceSpec([800, 800],
                                                           window_len=WINDOW))
    assert list(two.class_counts()) == [800, 800]


def test_imbalance_spec_validation():
    with pytest.raises(DataError):
        ImbalanceSpec([100])
    with pytest.raises(DataError):
        ImbalanceSpec([100, 0])
    with pytest.raises(DataError):
        ImbalanceSpec([10, 20])  # majority smaller than a fault class
    with pytest.raises(DataError):
        ImbalanceSpec([10, 5], window_len=4)
    with pytest.raises(DataError):
        make_imbalanced_dataset(default_fault_specs(),
                                ImbalanceSpec([10, 5], window_len=WINDOW))


def test_noise_free_classes_are_nn_separable():
    specs = [dataclasses.replace(s, noise_sigma=0.0) for s in default_fault_specs()]
    ds = synthesize_dataset(specs, (5, 5, 5, 5), 64, seed=0)
    # leave-one-out 1-NN on clean windows never crosses classes
    for i in range(ds.n):
        d2 = ((ds.features - ds.features[i]) ** 2).sum(axis=1)
        d2[i] = np.inf
        assert ds.labels[int(np.argmin(d2))] == ds.labels[i]


# ---------------------------------------------------------------------------
# LabeledDataset


def test_dataset_validation():
    with pytest.raises(DataError):
        LabeledDataset(np.zeros(4), np.zeros(4, dtype=int), ["a"])
    with pytest.raises(DataError):
        LabeledDataset(np.zeros((2, 2)), np.array([0]), ["a"])
    with pytest.raises(DataError):
        LabeledDataset(np.zeros((2, 2)), np.array([0, 2]), ["a", "b"])
    with pytest.raises(DataError):
        LabeledDataset(np.zeros((2, 2)), np.array([0, 0]), [])


def test_subset_preserves_names():
    ds = LabeledDataset(np.arange(8.0).reshape(4, 2), np.array([0, 1, 0, 1]),
                        ["normal", "fault"])
    sub = ds.subset([2, 1])
    assert np.array_equal(sub.features, ds.features[[2, 1]])
    assert sub.class_names == ds.class_names


# ---------------------------------------------------------------------------
# splitting


def test_split_counts_match_rounding():
    specs = default_fault_specs()[:2]
    ds = synthesize_dataset(specs, (100, 10), WINDOW, seed=0)
    train, test, _, _ = stratified_split(ds, 0.7, seed=0)
    assert list(train.class_counts()) == [70, 7]
    assert list(test.class_counts()) == [30, 3]


def test_split_is_a_partition():
    ds = synthesize_dataset(default_fault_specs(), (20, 6, 6, 6), WINDOW, seed=1)
    _, _, idx_train, idx_test = stratified_split(ds, 0.6, seed=2)
    assert np.intersect1d(idx_train, idx_test).size == 0
    assert np.array_equal(np.sort(np.concatenate([idx_train, idx_test])),
                          np.arange(ds.n))


def test_split_half_on_balanced_set():
    ds = synthesize_dataset(default_fault_specs()[:2], (20, 20), WINDOW, seed=0)
    train, test, _, _ = stratified_split(ds, 0.5, seed=0)
    assert list(train.class_counts()) == [10, 10]
    assert list(test.class_counts()) == [10, 10]


def test_split_same_seed_identical():
    ds = synthesize_dataset(default_fault_specs(), (20, 5, 5, 5), WINDOW, seed=0)
    a = stratified_split(ds, 0.7, seed=9)
    b = stratified_split(ds, 0.7, seed=9)
    assert np.array_equal(a[2], b[2]) and np.array_equal(a[3], b[3])


def test_split_rejects_singleton_class():
    ds = LabeledDataset(np.zeros((3, 2)), np.array([0, 0, 1]), ["normal", "f"])
    with pytest.raises(DataError):
        stratified_split(ds, 0.5, seed=0)
    with pytest.raises(DataError):
        stratified_split(ds, 1.5, seed=0)


# ---------------------------------------------------------------------------
# standardizer


def test_standardizer_fit_apply_invert():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((50, 4)) * 3 + 7
    std = Standardizer.fit(x)
    z = std.apply(x)
    assert np.allclose(z.mean(axis=0), 0, atol=1e-12)
    assert np.allclose(z.std(axis=0), 1, atol=1e-12)
    assert np.allclose(std.invert(z), x, atol=1e-12)


def test_standardizer_constant_column():
    x = np.column_stack([np.ones(10), np.arange(10.0)])
    std = Standardizer.fit(x)
    assert std.scale[0] == 1.0  # constant column is left unscaled
    assert np.all(np.isfinite(std.apply(x)))


# ---------------------------------------------------------------------------
# CSV


def test_csv_roundtrip_bytes(tmp_path):
    ds = synthesize_dataset(default_fault_specs(), (4, 2, 2, 3), WINDOW, seed=0)
    path = tmp_path / "ds.csv"
    write_csv(ds, path)
    loaded = load_csv(path, schema=ds.class_names)
    assert np.array_equal(loaded.features, ds.features)
    assert np.array_equal(loaded.labels, ds.labels)
    assert loaded.class_names == ds.class_names
    # save(load(f)) reproduces the file byte for byte
    again = tmp_path / "again.csv"
    write_csv(loaded, again)
    assert path.read_bytes() == again.read_bytes()


def test_csv_labels_are_class_names(tmp_path):
    ds = LabeledDataset([[1.0, 2.0], [3.0, 4.0]], [1, 0], ["normal", "ball"])
    path = tmp_path / "ds.csv"
    write_csv(ds, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "label,f0,f1"
    assert lines[1].startswith("ball,")
    assert lines[2].startswith("normal,")


def test_csv_inference_puts_normal_first(tmp_path):
    path = tmp_path / "ds.csv"
    path.write_text("label,f0\nball,1\nnormal,2\ninner,3\n")
    ds = load_csv(path)
    assert ds.class_names == ["normal", "ball", "inner"]
    assert list(ds.labels) == [1, 0, 2]


def test_csv_error_line_numbers(tmp_path):
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("label,f0,f1\nnormal,1,2\nnormal,3\n")
    with pytest.raises(DataError, match=r"ragged\.csv:3"):
        load_csv(ragged)

    alpha = tmp_path / "alpha.csv"
    alpha.write_text("label,f0\nnormal,x\n")
    with pytest.raises(DataError, match=r"alpha\.csv:2: non-numeric"):
        load_csv(alpha)

    unknown = tmp_path / "unknown.csv"
    unknown.write_text("label,f0\nnormal,1\nwobble,2\n")
    with pytest.raises(DataError, match=r"unknown\.csv:3: unknown label 'wobble'"):
        load_csv(unknown, schema=["normal", "ball"])


def test_csv_header_and_empty_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("label,f0\n")
    with pytest.raises(DataError, match="no samples"):
        load_csv(empty)

    nothing = tmp_path / "nothing.csv"
    nothing.write_text("")
    with pytest.raises(DataError, match="empty file"):
        load_csv(nothing)

    badcol = tmp_path / "badcol.csv"
    badcol.write_text("label,feature0\nnormal,1\n")
    with pytest.raises(DataError, match="expected column f0"):
        load_csv(badcol)

    nolabel = tmp_path / "nolabel.csv"
    nolabel.write_text("id,f0\nnormal,1\n")
    with pytest.raises(DataError, match="first column must be 'label'"):
        load_csv(nolabel)


def test_csv_duplicate_schema_rejected(tmp_path):
    path = tmp_path / "ds.csv"
    path.write_text("label,f0\nnormal,1\n")
    with pytest.raises(DataError, match="duplicate"):
        load_csv(path, schema=["normal", "normal"])
