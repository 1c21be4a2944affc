"""What the supervised contrastive loss rewards and ignores.

Three short experiments on hand-built unit-norm batches:
  1. the loss drops as same-class projections align,
  2. gradient descent on raw points pulls a positive pair together,
  3. the value is invariant to global rotations and to row order.
"""

import numpy as np

from screplay import MultiviewBatch, Tensor, scl_loss
from screplay import autodiff as ad

rng = np.random.default_rng(7)


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def batch(rows, labels):
    z = Tensor(np.stack([unit(r) for r in rows]))
    return MultiviewBatch.from_views(z, np.array(labels))


# 1. Alignment: rotate one view of class 0 from opposite to identical.
# The class-1 rows sit orthogonal to the rotation plane so only the
# positive-pair overlap moves.
print("angle(deg)  loss")
for deg in (180, 120, 60, 10, 0):
    a = np.radians(deg)
    mv = batch(
        [(1, 0, 0), (0, 0, 1), (np.cos(a), np.sin(a), 0), (0, 0, -1)],
        [0, 1, 0, 1],
    )
    print(f"{deg:10d}  {float(scl_loss(mv, 0.1).data):.4f}")

# 2. Descent: two free points with the same label, two anchored distractors.
pts = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
labels = np.array([0, 1, 0, 1])
print("\nstep  loss  cos(same-class pair)")
for step in range(60):
    z = ad.l2_normalize(pts)
    loss = scl_loss(MultiviewBatch.from_views(z, labels), 0.5)
    if step % 15 == 0:
        zz = z.data
        print(f"{step:4d}  {float(loss.data):5.2f}  {float(zz[0] @ zz[2]):+.3f}")
    loss.backward()
    ad.sgd_step([pts], lr=0.1)
zz = ad.l2_normalize(pts).data
print(f" end              {float(zz[0] @ zz[2]):+.3f}")

# 3. Symmetries: a global rotation or a row shuffle leaves the value alone.
z = rng.normal(size=(8, 5))
z /= np.linalg.norm(z, axis=1, keepdims=True)
labels = np.array([0, 1, 2, 0, 0, 1, 2, 0])
origin = np.zeros(8, dtype=np.int8)
base = float(scl_loss(MultiviewBatch(Tensor(z), labels, origin), 0.1).data)
q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
rotated = float(scl_loss(MultiviewBatch(Tensor(z @ q), labels, origin), 0.1).data)
perm = rng.permutation(8)
shuffled = float(scl_loss(MultiviewBatch(Tensor(z[perm]), labels[perm], origin), 0.1).data)
print(f"\nbase {base:.12f}")
print(f"rotated        drift {abs(rotated - base):.2e}")
print(f"row-shuffled   drift {abs(shuffled - base):.2e}")
