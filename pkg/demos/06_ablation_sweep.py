"""How much memory does contrastive replay actually need?

Sweeps the buffer capacity for ``scr`` and ``er`` over two seeds each
and reports mean final accuracy per cell.  Accuracy should climb
steeply from tiny buffers and flatten once the buffer covers every
class well.
"""

import numpy as np

from screplay import MethodConfig, ModelConfig, run_experiment, split_blobs, split_tasks

SIZES = (20, 50, 100, 500)
SEEDS = (0, 1)


def run(method, mem_size, seed):
    cfg = MethodConfig(
        method=method,
        lr=0.1,
        stream_batch=10,
        mem_batch=100,
        mem_size=mem_size,
        tau=0.1,
        seed=seed,
    )
    train, test = split_blobs(seed)
    stream = split_tasks(train, 5, 2, seed, stream_batch=10)
    return run_experiment(cfg, stream, test, ModelConfig(input_dim=32))


print("mem_size   " + "   ".join(f"{m:>7s}" for m in ("er", "scr")))
for size in SIZES:
    cells = []
    for method in ("er", "scr"):
        finals = [run(method, size, s).average_accuracy for s in SEEDS]
        cells.append(float(np.mean(finals)))
    print(f"{size:8d}   " + "   ".join(f"{c:7.4f}" for c in cells))
print(f"\n(each cell is the mean over seeds {SEEDS})")
