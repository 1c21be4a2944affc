"""Training objectives: supervised contrastive loss and cross-entropy.

Both losses are computed with per-row max subtraction so that training in
float32 cannot overflow even at low temperatures.  The contrastive shift
per anchor is the largest non-self similarity, which keeps the denominator
in [1, n-1]; the diagonal entry is shifted by its own detached value so its
(mask-discarded) exponential is exp(0) rather than a potential overflow.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError

ORIGIN_RAW = 0
ORIGIN_AUG = 1

DEFAULT_TAU = 0.1
_NORM_TOL = 1e-4


@dataclass
class MultiviewBatch:
    """A batch of 2b projected rows: b originals followed by their views.

    ``projections`` has unit-norm rows, ``labels`` one int per row, and
    ``origin`` flags each row as raw (0) or augmented (1).  Constructing
    directly skips the pairing check; use :meth:`from_views` for batches
    built from an original/augmented pair.
    """

    projections: Tensor
    labels: np.ndarray
    origin: np.ndarray

    @classmethod
    def from_views(cls, projections: Tensor, labels) -> "MultiviewBatch":
        """Build from a stacked [originals; augmentations] tensor.

        Rows k and k+b must carry the same label.
        """
        labels = np.asarray(labels, dtype=np.int64)
        n = projections.shape[0]
        if n % 2 != 0:
            raise ContractError(f"multiview batch must have 2b rows, got {n}")
        if labels.shape != (n,):
            raise ContractError(f"expected {n} labels, got shape {labels.shape}")
        b = n // 2
        if b and not np.array_equal(labels[:b], labels[b:]):
            raise ContractError("augmented rows must repeat the original labels in order")
        origin = np.concatenate(
            [np.full(b, ORIGIN_RAW, dtype=np.int8), np.full(b, ORIGIN_AUG, dtype=np.int8)]
        )
        return cls(projections=projections, labels=labels, origin=origin)


def scl_loss(mv: MultiviewBatch, tau: float = DEFAULT_TAU) -> Tensor:
    """Supervised contrastive loss, summed over anchors.

    For each anchor i with positive set P(i) (same-label rows excluding i),
    the contribution is -1/|P(i)| * sum_p log(exp(z_i.z_p / tau) /
    sum_{j != i} exp(z_i.z_j / tau)).  Anchors with an empty positive set
    contribute exactly 0.  The result is differentiable through the
    projections and is a sum, not a mean, over anchors.
    """
    if not float(tau) > 0:
        raise ContractError(f"temperature must be positive, got {tau}")
    z = mv.projections
    labels = np.asarray(mv.labels)
    n = z.shape[0]
    if n == 0:
        raise ContractError("empty multiview batch")
    if n < 2:
        raise ContractError("contrastive loss needs at least 2 rows")
    if labels.shape != (n,):
        raise ContractError(f"expected {n} labels, got shape {labels.shape}")
    norms = np.linalg.norm(z.data, axis=1)
    if np.any(np.abs(norms - 1.0) > _NORM_TOL):
        raise ContractError("projection rows must be unit-norm (deviation > 1e-4)")

    dt = z.dtype
    noself = ~np.eye(n, dtype=bool)
    pos_mask = ((labels[:, None] == labels[None, :]) & noself).astype(dt)
    pos_counts = pos_mask.sum(axis=1)
    has_pos = (pos_counts > 0).astype(dt)
    inv_counts = np.divide(
        1.0, pos_counts, out=np.zeros(n, dtype=dt), where=pos_counts > 0
    ).astype(dt, copy=False)

    sims = ad.scale(ad.matmul(z, z, transpose_b=True), 1.0 / float(tau))
    # Shift row i by its largest non-self similarity; pin the diagonal to 0
    # via its own detached value (masked out downstream either way).
    shift = np.where(noself, sims.data, -np.inf).max(axis=1)
    shift_mat = np.broadcast_to(shift[:, None], (n, n)).copy()
    np.fill_diagonal(shift_mat, np.diagonal(sims.data))
    shifted = ad.sub(sims, Tensor(shift_mat, dtype=dt))

    denom = ad.row_sum(ad.mul(ad.exp(shifted), Tensor(noself.astype(dt))))
    log_denom = ad.log(denom)
    pos_term = ad.row_sum(ad.mul(shifted, Tensor(pos_mask)))
    return ad.sub(
        ad.sum_all(ad.mul(log_denom, Tensor(has_pos))),
        ad.sum_all(ad.mul(pos_term, Tensor(inv_counts))),
    )


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-softmax of the true class, max-shifted for stability."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.data.ndim != 2:
        raise ContractError(f"logits must be 2-d, got shape {logits.shape}")
    n, c = logits.shape
    if labels.shape != (n,):
        raise ContractError(f"expected {n} labels, got shape {labels.shape}")
    if n == 0:
        raise ContractError("empty batch")
    if labels.min() < 0 or labels.max() >= c:
        raise ContractError(f"labels must lie in [0, {c})")

    dt = logits.dtype
    m = ad.row_max_detached(logits)
    shifted = ad.sub(logits, Tensor(np.broadcast_to(m[:, None], (n, c)), dtype=dt))
    lse = ad.log(ad.row_sum(ad.exp(shifted)))
    onehot = np.zeros((n, c), dtype=dt)
    onehot[np.arange(n), labels] = 1
    picked = ad.row_sum(ad.mul(shifted, Tensor(onehot)))
    return ad.mean_all(ad.sub(lse, picked))
