"""Same training run, two read-outs: softmax head vs class-mean prototypes.

Experience replay learns on a 5-task class stream; ``er`` scores the test
set with the trained softmax head while ``er_ncm`` scores the identical
trajectory with nearest-class-mean over buffer prototypes.  The final
accuracy row shows where the head loses old tasks and the prototype
read-out keeps them.
"""

import numpy as np

from screplay import MethodConfig, ModelConfig, run_experiment, split_blobs, split_tasks

SEED = 0


def run(method):
    cfg = MethodConfig(
        method=method,
        lr=0.1,
        stream_batch=10,
        mem_batch=100,
        mem_size=100,
        seed=SEED,
    )
    train, test = split_blobs(SEED)
    stream = split_tasks(train, 5, 2, SEED, stream_batch=10)
    return run_experiment(cfg, stream, test, ModelConfig(input_dim=32))


head = run("er")
proto = run("er_ncm")

print("accuracy per task after the final task (same stream, same updates):")
print("task      " + "  ".join(f"{t + 1:5d}" for t in range(5)))
print("softmax   " + "  ".join(f"{a:.3f}" for a in head.matrix.last_row))
print("ncm       " + "  ".join(f"{a:.3f}" for a in proto.matrix.last_row))
print(f"\naverage: softmax {head.average_accuracy:.3f}  ncm {proto.average_accuracy:.3f}")

gap = proto.matrix.last_row - head.matrix.last_row
print(f"largest prototype gain is task {int(np.argmax(gap)) + 1} ({gap.max():+.3f})")
