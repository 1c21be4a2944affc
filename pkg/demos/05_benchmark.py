"""The full desk-scale benchmark: five methods on one seed.

Ten Gaussian classes in 32 dimensions arrive as 5 two-class tasks in a
single pass.  Expected ordering: fine-tuning collapses onto the last
task, replay recovers most accuracy, the prototype read-out beats the
softmax head, contrastive replay beats both, and the iid multi-epoch
run bounds everything from above.
"""

import time

from screplay import MethodConfig, ModelConfig, run_experiment, split_blobs, split_tasks

SEED = 0
METHODS = ("finetune", "er", "er_ncm", "scr", "offline")

results = {}
for method in METHODS:
    cfg = MethodConfig(
        method=method,
        lr=0.1,
        stream_batch=10,
        mem_batch=100,
        mem_size=100,
        tau=0.1,
        offline_epochs=50,
        seed=SEED,
    )
    train, test = split_blobs(SEED)
    stream = split_tasks(train, 5, 2, SEED, stream_batch=10)
    t0 = time.perf_counter()
    results[method] = run_experiment(cfg, stream, test, ModelConfig(input_dim=32))
    print(f"{method:9s} done in {time.perf_counter() - t0:5.1f}s")

print("\nmethod     avg acc   final-task row")
for method in METHODS:
    r = results[method]
    row = "  ".join(f"{a:.3f}" for a in r.matrix.last_row)
    print(f"{method:9s}  {r.average_accuracy:.4f}   {row}")

ft = results["finetune"].matrix
print("\nfine-tuning accuracy on task 1 as training proceeds:")
print("  " + "  ".join(f"after t{t + 1}: {ft.get(t, 0):.3f}" for t in range(5)))
