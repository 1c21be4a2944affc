"""Datasets, class-disjoint task streams, augmentation, and synthetic data.

A task stream partitions a dataset's classes into N disjoint tasks and
emits each training example exactly once, in small seeded-shuffled
batches that never cross a task boundary.  Augmentors are label-
preserving and draw from their own generator so augmentation never
perturbs stream order.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, ShapeError
from .rngs import AUGMENT, DATA_GEN, STREAM, child_rng

DATASET_MAGIC = b"CLDS1"

AUGMENT_MODES = ("vector_noise", "image_flip_crop")

# split-blobs benchmark defaults
BLOBS_CLASSES = 10
BLOBS_DIM = 32
BLOBS_TRAIN_PER_CLASS = 500
BLOBS_TEST_PER_CLASS = 100
BLOBS_SEPARATION = 5.0


@dataclass(frozen=True)
class LabeledExample:
    x: np.ndarray
    y: int


@dataclass
class Batch:
    """Parallel (inputs, labels) arrays: float32 rows, int64 labels."""

    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2:
            raise ShapeError(f"batch inputs must be (n, flat_dim), got {self.inputs.shape}")
        if self.labels.shape != (self.inputs.shape[0],):
            raise ShapeError(
                f"expected {self.inputs.shape[0]} labels, got shape {self.labels.shape}"
            )

    def __len__(self) -> int:
        return self.inputs.shape[0]


def concat_batches(*parts: Batch) -> Batch:
    """Concatenate batches, ignoring empty ones (an empty replay draw)."""
    keep = [p for p in parts if len(p)]
    if not keep:
        raise ContractError("cannot concatenate only empty batches")
    if len(keep) == 1:
        return Batch(keep[0].inputs, keep[0].labels)
    return Batch(
        np.concatenate([p.inputs for p in keep], axis=0),
        np.concatenate([p.labels for p in keep]),
    )


@dataclass
class Dataset:
    """Immutable labeled collection; labels lie in [0, class_count)."""

    inputs: np.ndarray
    labels: np.ndarray
    class_count: int
    split: str

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2:
            raise ShapeError(f"inputs must be (n, flat_dim), got {self.inputs.shape}")
        if self.labels.shape != (self.inputs.shape[0],):
            raise ShapeError("labels length must match inputs")
        if self.split not in ("train", "test"):
            raise ConfigError(f"split must be 'train' or 'test', got {self.split!r}")
        if len(self.labels) and (
            self.labels.min() < 0 or self.labels.max() >= self.class_count
        ):
            raise ContractError(f"labels must lie in [0, {self.class_count})")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def flat_dim(self) -> int:
        return self.inputs.shape[1]

    def example(self, i: int) -> LabeledExample:
        return LabeledExample(x=self.inputs[i], y=int(self.labels[i]))

    def class_subset(self, classes) -> Batch:
        mask = np.isin(self.labels, np.asarray(list(classes)))
        return Batch(self.inputs[mask], self.labels[mask])


class TaskStream:
    """Single-pass emitter of (task_index, Batch) pairs.

    Construction freezes the per-task example order, so iterating twice
    requires building the stream twice (each example is seen only once).
    """

    def __init__(self, task_data, task_classes, stream_batch: int):
        if stream_batch <= 0:
            raise ConfigError(f"stream_batch must be positive, got {stream_batch}")
        self.task_data = task_data
        self.task_classes = task_classes
        self.stream_batch = int(stream_batch)
        self._task = 0
        self._offset = 0

    @property
    def n_tasks(self) -> int:
        return len(self.task_data)

    @property
    def total_examples(self) -> int:
        return sum(len(b) for b in self.task_data)

    def next_batch(self):
        """Next (task_index, Batch), or None once the stream is exhausted."""
        while self._task < self.n_tasks and self._offset >= len(self.task_data[self._task]):
            self._task += 1
            self._offset = 0
        if self._task >= self.n_tasks:
            return None
        data = self.task_data[self._task]
        lo = self._offset
        hi = min(lo + self.stream_batch, len(data))
        self._offset = hi
        return self._task, Batch(data.inputs[lo:hi], data.labels[lo:hi])

    def __iter__(self):
        while True:
            item = self.next_batch()
            if item is None:
                return
            yield item


def split_tasks(
    ds: Dataset, n_tasks: int, classes_per_task: int, seed: int, stream_batch: int = 10
) -> TaskStream:
    """Partition classes into n_tasks disjoint tasks by seeded permutation.

    Task membership comes from one permutation of the class ids; each
    task's example order is shuffled by its own child generator.
    """
    if n_tasks <= 0 or classes_per_task <= 0:
        raise ConfigError("n_tasks and classes_per_task must be positive")
    if n_tasks * classes_per_task != ds.class_count:
        raise ConfigError(
            f"{n_tasks} tasks x {classes_per_task} classes != {ds.class_count} classes"
        )
    perm = child_rng(seed, STREAM).permutation(ds.class_count)
    task_data = []
    task_classes = []
    for t in range(n_tasks):
        classes = perm[t * classes_per_task : (t + 1) * classes_per_task]
        idx = np.flatnonzero(np.isin(ds.labels, classes))
        order = child_rng(seed, STREAM, t).permutation(idx.size)
        idx = idx[order]
        task_data.append(Batch(ds.inputs[idx], ds.labels[idx]))
        task_classes.append(sorted(int(c) for c in classes))
    return TaskStream(task_data, task_classes, stream_batch)


@dataclass
class AugmentorSpec:
    """Label-preserving stochastic view generator.

    vector_noise adds iid Gaussian noise of scale sigma; image_flip_crop
    flips horizontally with probability 1/2 then crops a zero-padded
    image back to size (draw order: all flips, then all crop offsets).
    """

    mode: str
    rng: np.random.Generator
    sigma: float = 0.05
    pad: int = 4
    image_shape: tuple = None

    def __post_init__(self):
        if self.mode not in AUGMENT_MODES:
            raise ConfigError(f"mode must be one of {AUGMENT_MODES}, got {self.mode!r}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}")
        if self.pad < 0:
            raise ConfigError(f"pad must be >= 0, got {self.pad}")
        if self.mode == "image_flip_crop":
            if self.image_shape is None or len(self.image_shape) not in (2, 3):
                raise ConfigError("image_flip_crop needs image_shape (h, w) or (h, w, ch)")
            self.image_shape = tuple(int(s) for s in self.image_shape)


def default_augmentor(seed: int, sigma: float = 0.05) -> AugmentorSpec:
    return AugmentorSpec(mode="vector_noise", rng=child_rng(seed, AUGMENT), sigma=sigma)


def augment(spec: AugmentorSpec, batch: Batch) -> Batch:
    """Return a same-shape, same-label stochastic view of the batch."""
    x = batch.inputs
    if spec.mode == "vector_noise":
        noise = spec.rng.normal(0.0, spec.sigma, size=x.shape).astype(np.float32)
        return Batch(x + noise, batch.labels.copy())

    if int(np.prod(spec.image_shape)) != x.shape[1]:
        raise ConfigError(
            f"image_shape {spec.image_shape} does not flatten to width {x.shape[1]}"
        )
    n = x.shape[0]
    shape = spec.image_shape
    imgs = x.reshape((n, *shape))
    flips = spec.rng.random(n) < 0.5
    imgs = np.where(flips.reshape((n,) + (1,) * len(shape)), np.flip(imgs, axis=2), imgs)
    p = spec.pad
    pad_width = [(0, 0), (p, p), (p, p)] + ([(0, 0)] if len(shape) == 3 else [])
    padded = np.pad(imgs, pad_width)
    offsets = spec.rng.integers(0, 2 * p + 1, size=(n, 2))
    out = np.empty_like(imgs)
    for i in range(n):
        r, c = offsets[i]
        out[i] = padded[i, r : r + shape[0], c : c + shape[1]]
    return Batch(out.reshape(n, -1), batch.labels.copy())


def gen_synthetic(
    classes: int,
    dim: int,
    per_class_train: int,
    per_class_test: int,
    separation: float,
    seed: int,
):
    """Gaussian-blob dataset pair (train, test) sharing class centers.

    Each class sits at a random unit direction scaled by ``separation``;
    samples add unit-variance isotropic noise.  separation=0 makes all
    classes indistinguishable; large separation makes them near-separable.
    """
    if classes < 2:
        raise ConfigError(f"need at least 2 classes, got {classes}")
    rng = child_rng(seed, DATA_GEN)
    dirs = rng.normal(size=(classes, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    centers = separation * dirs
    train_x, train_y, test_x, test_y = [], [], [], []
    for c in range(classes):
        train_x.append(centers[c] + rng.normal(size=(per_class_train, dim)))
        train_y.append(np.full(per_class_train, c, dtype=np.int64))
        test_x.append(centers[c] + rng.normal(size=(per_class_test, dim)))
        test_y.append(np.full(per_class_test, c, dtype=np.int64))
    train = Dataset(
        np.concatenate(train_x).astype(np.float32),
        np.concatenate(train_y),
        class_count=classes,
        split="train",
    )
    test = Dataset(
        np.concatenate(test_x).astype(np.float32),
        np.concatenate(test_y),
        class_count=classes,
        split="test",
    )
    return train, test


def split_blobs(seed: int):
    """The default desk-scale benchmark: 10 well-separated Gaussian blobs."""
    return gen_synthetic(
        classes=BLOBS_CLASSES,
        dim=BLOBS_DIM,
        per_class_train=BLOBS_TRAIN_PER_CLASS,
        per_class_test=BLOBS_TEST_PER_CLASS,
        separation=BLOBS_SEPARATION,
        seed=seed,
    )


def write_clds1(path, inputs, labels, class_count: int):
    """Write rows + labels in the CLDS1 container.

    Layout: magic "CLDS1", little-endian u32 count / flat_dim /
    class_count, count*flat_dim float32 row-major values, count u32
    labels.  Used for datasets, buffer dumps, and embedding dumps.
    """
    inputs = np.ascontiguousarray(np.asarray(inputs, dtype="<f4"))
    labels = np.asarray(labels)
    if inputs.ndim != 2:
        raise ShapeError(f"inputs must be (n, flat_dim), got {inputs.shape}")
    if labels.shape != (inputs.shape[0],):
        raise ShapeError("labels length must match inputs")
    if len(labels) and (labels.min() < 0 or labels.max() >= class_count):
        raise ContractError(f"labels must lie in [0, {class_count})")
    header = np.array([inputs.shape[0], inputs.shape[1], class_count], dtype="<u4")
    with open(path, "wb") as f:
        f.write(DATASET_MAGIC)
        f.write(header.tobytes())
        f.write(inputs.tobytes())
        f.write(labels.astype("<u4").tobytes())


def read_clds1(path):
    """Read a CLDS1 file back as (inputs float32, labels int64, class_count)."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:5] != DATASET_MAGIC:
        raise ConfigError(f"not a CLDS1 file (magic {raw[:5]!r})")
    count, flat_dim, class_count = (int(v) for v in np.frombuffer(raw[5:17], dtype="<u4"))
    body = raw[17:]
    need = 4 * count * flat_dim + 4 * count
    if len(body) != need:
        raise ConfigError(f"CLDS1 body has {len(body)} bytes, expected {need}")
    inputs = np.frombuffer(body[: 4 * count * flat_dim], dtype="<f4").reshape(count, flat_dim)
    labels = np.frombuffer(body[4 * count * flat_dim :], dtype="<u4").astype(np.int64)
    return inputs.astype(np.float32), labels, class_count


def save_dataset(ds: Dataset, path):
    write_clds1(path, ds.inputs, ds.labels, ds.class_count)


def load_dataset(path, split: str) -> Dataset:
    inputs, labels, class_count = read_clds1(path)
    return Dataset(inputs, labels, class_count=class_count, split=split)
