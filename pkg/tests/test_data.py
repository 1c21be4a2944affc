"""Stream, augmentation, synthetic-data, and container-format checks."""

import numpy as np
import pytest

from screplay.data import (
    AugmentorSpec,
    Batch,
    Dataset,
    TaskStream,
    augment,
    concat_batches,
    default_augmentor,
    gen_synthetic,
    load_dataset,
    read_clds1,
    save_dataset,
    split_blobs,
    split_tasks,
    write_clds1,
)
from screplay.errors import ConfigError, ContractError, ShapeError


def small_pair(seed=0, classes=4, dim=3, per_train=25, per_test=10, sep=6.0):
    return gen_synthetic(
        classes=classes,
        dim=dim,
        per_class_train=per_train,
        per_class_test=per_test,
        separation=sep,
        seed=seed,
    )


def sorted_rows(x, y):
    order = np.lexsort(np.concatenate([x.T, y[None, :]]))
    return x[order], y[order]


# -- batches and datasets ------------------------------------------------------


def test_batch_coerces_dtypes_and_validates():
    b = Batch(np.ones((2, 3), dtype=np.float64), [1, 2])
    assert b.inputs.dtype == np.float32
    assert b.labels.dtype == np.int64
    assert len(b) == 2
    with pytest.raises(ShapeError):
        Batch(np.ones(3), [0])
    with pytest.raises(ShapeError):
        Batch(np.ones((2, 3)), [0])


def test_concat_batches_skips_empty_parts():
    a = Batch(np.ones((2, 3)), [0, 1])
    empty = Batch(np.empty((0, 3)), np.empty(0, dtype=np.int64))
    out = concat_batches(a, empty, a)
    assert len(out) == 4
    with pytest.raises(ContractError):
        concat_batches(empty, empty)


def test_dataset_validates_labels_and_split():
    with pytest.raises(ContractError):
        Dataset(np.ones((2, 3)), [0, 5], class_count=3, split="train")
    with pytest.raises(ConfigError):
        Dataset(np.ones((2, 3)), [0, 1], class_count=3, split="validation")


def test_class_subset_picks_matching_rows():
    train, _ = small_pair()
    sub = train.class_subset([1, 3])
    assert set(sub.labels.tolist()) == {1, 3}
    assert len(sub) == 50


# -- task streams ---------------------------------------------------------------


def test_tasks_partition_the_classes():
    train, _ = small_pair()
    stream = split_tasks(train, n_tasks=2, classes_per_task=2, seed=0)
    flat = [c for tc in stream.task_classes for c in tc]
    assert sorted(flat) == [0, 1, 2, 3]
    for t, batch in stream:
        assert set(batch.labels.tolist()) <= set(stream.task_classes[t])


def test_stream_emits_every_example_exactly_once():
    train, _ = small_pair()
    stream = split_tasks(train, n_tasks=2, classes_per_task=2, seed=1, stream_batch=7)
    xs, ys, tasks = [], [], []
    for t, batch in stream:
        assert len(batch) <= 7
        xs.append(batch.inputs)
        ys.append(batch.labels)
        tasks.append(t)
    assert tasks == sorted(tasks)
    got = sorted_rows(np.concatenate(xs), np.concatenate(ys))
    want = sorted_rows(train.inputs, train.labels)
    np.testing.assert_array_equal(got[0], want[0])
    np.testing.assert_array_equal(got[1], want[1])


def test_stream_batch_counts_and_exhaustion():
    train, _ = small_pair()
    # 50 examples per task in batches of 7: 8 batches, the last of size 1
    stream = split_tasks(train, n_tasks=2, classes_per_task=2, seed=2, stream_batch=7)
    sizes = {}
    for t, batch in stream:
        sizes.setdefault(t, []).append(len(batch))
    assert sizes[0] == [7] * 7 + [1]
    assert sizes[1] == [7] * 7 + [1]
    assert stream.next_batch() is None
    assert list(stream) == []
    assert stream.total_examples == 100
    assert stream.n_tasks == 2


def test_stream_order_is_seeded():
    train, _ = small_pair()

    def first_labels(seed):
        stream = split_tasks(train, 2, 2, seed=seed, stream_batch=10)
        return [batch.labels.tolist() for _, batch in stream]

    assert first_labels(3) == first_labels(3)
    assert first_labels(3) != first_labels(4)


def test_split_tasks_validates_the_grid():
    train, _ = small_pair()
    with pytest.raises(ConfigError):
        split_tasks(train, 3, 2, seed=0)
    with pytest.raises(ConfigError):
        split_tasks(train, 0, 2, seed=0)
    with pytest.raises(ConfigError):
        split_tasks(train, 2, 2, seed=0, stream_batch=0)


# -- augmentation ----------------------------------------------------------------


def test_vector_noise_moments():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(2000, 4)).astype(np.float32)
    batch = Batch(x, np.zeros(2000, dtype=np.int64))
    out = augment(default_augmentor(seed=5, sigma=0.05), batch)
    delta = out.inputs - x
    assert abs(delta.mean()) < 0.003
    assert 0.045 < delta.std() < 0.055
    np.testing.assert_array_equal(out.labels, batch.labels)


def test_zero_sigma_is_the_identity():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(50, 4)).astype(np.float32)
    batch = Batch(x, np.arange(50) % 3)
    out = augment(default_augmentor(seed=6, sigma=0.0), batch)
    np.testing.assert_array_equal(out.inputs, x)
    out.labels[0] = 99
    assert batch.labels[0] != 99


def test_flip_crop_replays_the_documented_draws():
    # flips for the whole batch are drawn first, then crop offsets, so a
    # cloned generator can reproduce the outputs exactly
    h = w = 4
    pad = 1
    rng = np.random.default_rng(7)
    imgs = rng.normal(size=(6, h, w)).astype(np.float32)
    batch = Batch(imgs.reshape(6, -1), np.zeros(6, dtype=np.int64))
    spec = AugmentorSpec(
        mode="image_flip_crop", rng=np.random.default_rng(77), pad=pad, image_shape=(h, w)
    )
    out = augment(spec, batch)

    clone = np.random.default_rng(77)
    flips = clone.random(6) < 0.5
    offsets = clone.integers(0, 2 * pad + 1, size=(6, 2))
    for i in range(6):
        img = imgs[i, :, ::-1] if flips[i] else imgs[i]
        padded = np.pad(img, pad)
        r, c = offsets[i]
        want = padded[r : r + h, c : c + w]
        np.testing.assert_array_equal(out.inputs[i].reshape(h, w), want)


def test_flip_crop_outputs_are_valid_views():
    h = w = 5
    pad = 2
    rng = np.random.default_rng(8)
    img = rng.normal(size=(h, w)).astype(np.float32)
    variants = []
    for flip in (False, True):
        base = img[:, ::-1] if flip else img
        padded = np.pad(base, pad)
        for r in range(2 * pad + 1):
            for c in range(2 * pad + 1):
                variants.append(padded[r : r + h, c : c + w].ravel())
    variants = np.stack(variants)
    batch = Batch(np.tile(img.ravel(), (40, 1)), np.zeros(40, dtype=np.int64))
    spec = AugmentorSpec(
        mode="image_flip_crop", rng=np.random.default_rng(88), pad=pad, image_shape=(h, w)
    )
    out = augment(spec, batch)
    for row in out.inputs:
        assert any(np.array_equal(row, v) for v in variants)


def test_augmentor_validation():
    with pytest.raises(ConfigError):
        AugmentorSpec(mode="cutmix", rng=np.random.default_rng(0))
    with pytest.raises(ConfigError):
        AugmentorSpec(mode="vector_noise", rng=np.random.default_rng(0), sigma=-0.1)
    with pytest.raises(ConfigError):
        AugmentorSpec(mode="image_flip_crop", rng=np.random.default_rng(0))
    with pytest.raises(ConfigError):
        AugmentorSpec(
            mode="image_flip_crop", rng=np.random.default_rng(0), pad=-1, image_shape=(4, 4)
        )
    spec = AugmentorSpec(
        mode="image_flip_crop", rng=np.random.default_rng(0), image_shape=(4, 4)
    )
    with pytest.raises(ConfigError):
        augment(spec, Batch(np.ones((2, 9), dtype=np.float32), [0, 0]))


# -- synthetic data ---------------------------------------------------------------


def test_gen_synthetic_is_deterministic_and_shaped():
    tr1, te1 = small_pair(seed=9)
    tr2, te2 = small_pair(seed=9)
    tr3, _ = small_pair(seed=10)
    np.testing.assert_array_equal(tr1.inputs, tr2.inputs)
    np.testing.assert_array_equal(te1.inputs, te2.inputs)
    assert not np.array_equal(tr1.inputs, tr3.inputs)
    assert tr1.inputs.shape == (100, 3)
    assert te1.inputs.shape == (40, 3)
    assert tr1.split == "train" and te1.split == "test"


def test_train_and_test_share_class_centers():
    train, test = small_pair(seed=11, dim=8, per_train=200, per_test=200)
    for c in range(4):
        mu_tr = train.inputs[train.labels == c].mean(axis=0)
        mu_te = test.inputs[test.labels == c].mean(axis=0)
        assert np.linalg.norm(mu_tr - mu_te) < 1.0
    mus = np.stack([train.inputs[train.labels == c].mean(axis=0) for c in range(4)])
    for a in range(4):
        for b in range(a + 1, 4):
            assert np.linalg.norm(mus[a] - mus[b]) > 3.0


def test_zero_separation_collapses_the_centers():
    train, _ = small_pair(seed=12, dim=8, per_train=200, sep=0.0)
    for c in range(4):
        mu = train.inputs[train.labels == c].mean(axis=0)
        assert np.linalg.norm(mu) < 0.6


def test_gen_synthetic_needs_two_classes():
    with pytest.raises(ConfigError):
        gen_synthetic(
            classes=1, dim=4, per_class_train=5, per_class_test=5, separation=1.0, seed=0
        )


def test_split_blobs_has_the_benchmark_shape():
    train, test = split_blobs(seed=0)
    assert train.inputs.shape == (5000, 32)
    assert test.inputs.shape == (1000, 32)
    assert train.class_count == test.class_count == 10


# -- the dataset container ---------------------------------------------------------


def test_clds1_round_trip_is_exact(tmp_path):
    train, _ = small_pair(seed=13)
    path = tmp_path / "train.clds1"
    save_dataset(train, path)
    back = load_dataset(path, split="train")
    np.testing.assert_array_equal(back.inputs, train.inputs)
    np.testing.assert_array_equal(back.labels, train.labels)
    assert back.class_count == train.class_count


def test_clds1_rejects_corruption(tmp_path):
    train, _ = small_pair(seed=14)
    path = tmp_path / "data.clds1"
    save_dataset(train, path)
    blob = path.read_bytes()

    bad_magic = tmp_path / "magic.clds1"
    bad_magic.write_bytes(b"NOPE!" + blob[5:])
    with pytest.raises(ConfigError):
        read_clds1(bad_magic)

    truncated = tmp_path / "short.clds1"
    truncated.write_bytes(blob[:-3])
    with pytest.raises(ConfigError):
        read_clds1(truncated)

    trailing = tmp_path / "long.clds1"
    trailing.write_bytes(blob + b"\x07")
    with pytest.raises(ConfigError):
        read_clds1(trailing)


def test_clds1_write_validates(tmp_path):
    path = tmp_path / "x.clds1"
    with pytest.raises(ContractError):
        write_clds1(path, np.ones((2, 3)), np.array([0, 9]), class_count=3)
    with pytest.raises(ShapeError):
        write_clds1(path, np.ones(3), np.array([0]), class_count=1)
    with pytest.raises(ShapeError):
        write_clds1(path, np.ones((2, 3)), np.array([0]), class_count=1)
