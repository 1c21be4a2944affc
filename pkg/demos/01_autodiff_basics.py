"""A tour of the reverse-mode tape: forward ops, backward, and grad checks.

Builds a tiny two-layer regression by hand from the tensor primitives,
trains it with plain SGD, and finishes by running the built-in finite
difference checker on the same graph.
"""

import numpy as np

from screplay import Tensor, grad_check, sgd_step
from screplay import autodiff as ad

rng = np.random.default_rng(0)

# Leaves: requires_grad=True puts a tensor on the tape, constants stay off.
w1 = Tensor(rng.normal(scale=0.5, size=(3, 8)), requires_grad=True)
b1 = Tensor(np.zeros(8), requires_grad=True)
w2 = Tensor(rng.normal(scale=0.5, size=(8, 1)), requires_grad=True)

x = Tensor(rng.normal(size=(32, 3)))
target = Tensor(np.sin(x.data[:, :1] * 2.0) + 0.1 * x.data[:, 1:2])


def mse(a, b, c):
    """Rebuilds the whole graph from the current leaf values."""
    h = ad.relu(ad.add(ad.matmul(x, a), b))
    err = ad.sub(ad.matmul(h, c), target)
    return ad.mean_all(ad.mul(err, err))


print("step   mse")
for step in range(200):
    loss = mse(w1, b1, w2)
    loss.backward()
    sgd_step([w1, b1, w2], lr=0.05)
    if step % 40 == 0:
        print(f"{step:4d}  {loss.item():.4f}")
print(f" end  {mse(w1, b1, w2).item():.4f}")

# The checker perturbs every entry of every leaf and compares central
# finite differences against what backward() produced.
report = grad_check(mse, [w1, b1, w2])
print(f"grad check: max rel error {report.max_rel_error:.2e} (passed={report.passed})")
