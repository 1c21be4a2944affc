"""Nearest-class-mean and softmax classification over encoder embeddings.

Prototypes are arithmetic means of unit-norm embeddings and are not
re-normalized, so they live inside the unit ball and distances are plain
Euclidean.  A prototype set is stamped with the model step that produced
it; classifying with a stale set raises instead of silently serving
drifted prototypes.  Ties break to the lowest class id for both
classifiers.
"""

from dataclasses import dataclass

import numpy as np

from .data import Batch
from .errors import NoClassesError, NoPrototypesError, StalePrototypesError
from .model import ModelState, encode, logits


@dataclass(frozen=True)
class PrototypeSet:
    """Per-class mean embeddings; classes with no support are absent."""

    class_ids: np.ndarray  # (k,) sorted ascending
    means: np.ndarray  # (k, embed_dim)
    counts: np.ndarray  # (k,) all >= 1
    model_step: int

    def __len__(self) -> int:
        return len(self.class_ids)


def compute_prototypes(state: ModelState, buf_snapshot: Batch) -> PrototypeSet:
    """Mean embedding per class present in the snapshot, under the current encoder."""
    if len(buf_snapshot) == 0:
        raise NoPrototypesError("cannot build prototypes from an empty snapshot")
    emb = encode(state, buf_snapshot).data
    classes, counts = np.unique(buf_snapshot.labels, return_counts=True)
    means = np.stack(
        [emb[buf_snapshot.labels == c].mean(axis=0) for c in classes]
    )
    return PrototypeSet(
        class_ids=classes.astype(np.int64),
        means=means,
        counts=counts.astype(np.int64),
        model_step=state.step,
    )


def _check_protos(protos: PrototypeSet, state: ModelState):
    if len(protos) == 0:
        raise NoPrototypesError("prototype set is empty")
    if protos.model_step != state.step:
        raise StalePrototypesError(
            f"prototypes from step {protos.model_step}, model at step {state.step}"
        )


def _query_array(x) -> np.ndarray:
    x = getattr(x, "x", x)
    return np.atleast_2d(np.asarray(x, dtype=np.float32))


def ncm_classify(protos: PrototypeSet, state: ModelState, x) -> int:
    """Class of the nearest prototype to the query's embedding, ties to lowest id."""
    _check_protos(protos, state)
    emb = encode(state, _query_array(x)).data
    d2 = ((protos.means - emb) ** 2).sum(axis=1)
    # argmin returns the first minimum; class_ids are sorted, so that is
    # the lowest class id among exact-tied distances
    return int(protos.class_ids[int(np.argmin(d2))])


def ncm_classify_batch(protos: PrototypeSet, state: ModelState, batch: Batch) -> np.ndarray:
    """Vectorized ncm_classify over a batch; agrees with the scalar form exactly."""
    _check_protos(protos, state)
    emb = encode(state, batch).data
    d2 = ((emb[:, None, :] - protos.means[None, :, :]) ** 2).sum(axis=2)
    return protos.class_ids[np.argmin(d2, axis=1)]


def softmax_classify(state: ModelState, x) -> int:
    """Argmax over FC head logits, ties to the lowest class id."""
    if state.head_classes == 0:
        raise NoClassesError("FC head has no classes")
    lg = logits(state, encode(state, _query_array(x))).data[0]
    ids = np.asarray(state.head_class_ids, dtype=np.int64)
    return int(ids[lg == lg.max()].min())


def softmax_classify_batch(state: ModelState, batch: Batch) -> np.ndarray:
    """Vectorized softmax_classify; agrees with the scalar form exactly."""
    if state.head_classes == 0:
        raise NoClassesError("FC head has no classes")
    lg = logits(state, encode(state, batch)).data
    ids = np.asarray(state.head_class_ids, dtype=np.int64)
    is_max = lg == lg.max(axis=1, keepdims=True)
    candidates = np.where(is_max, ids[None, :], np.iinfo(np.int64).max)
    return candidates.min(axis=1)
