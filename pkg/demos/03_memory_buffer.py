"""Reservoir sampling keeps a uniform sample of everything it has seen.

Streams 200 items through a 20-slot buffer many times and tallies how
often each stream position survives: early and late items should be kept
at the same rate (capacity / n_seen), which is the whole point of the
scheme for replay under a fixed memory budget.
"""

import numpy as np

from screplay import MemoryBuffer

CAPACITY, N, TRIALS = 20, 200, 3000

counts = np.zeros(N, dtype=np.int64)
xs = np.arange(N, dtype=np.float32).reshape(N, 1)
ys = np.zeros(N, dtype=np.int64)
for t in range(TRIALS):
    buf = MemoryBuffer(CAPACITY, rng=np.random.default_rng(t))
    buf.update(xs, ys)
    kept, _ = buf.snapshot()
    counts[kept[:, 0].astype(int)] += 1

freqs = counts / TRIALS
expect = CAPACITY / N
print(f"expected inclusion rate {expect:.3f}")
for lo in range(0, N, 40):
    seg = freqs[lo : lo + 40]
    print(f"positions {lo:3d}-{lo + 39:3d}: mean {seg.mean():.4f}  range [{seg.min():.3f}, {seg.max():.3f}]")

# Retrieval draws without replacement, capped at the current fill.
buf = MemoryBuffer(5, rng=np.random.default_rng(0))
buf.update(xs[:3], np.array([10, 11, 12]))
bx, by = buf.retrieve(8)
print(f"\nasked for 8 of a 3-item buffer, got {len(by)} distinct labels: {sorted(by.tolist())}")
