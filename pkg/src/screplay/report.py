"""Results persistence (CSV rows per accuracy cell) and cross-seed reports.

The CSV carries one row per accuracy-matrix entry plus a summary comment
line with the final average accuracy.  Wall-clock time is deliberately
not written: result files must be byte-identical across repeated runs of
the same config and seed, and timing never is.  Aggregation reports the
mean and sample standard deviation (ddof=1) of average accuracy over
seeds, grouped by method and memory size.
"""

import csv
import io

import numpy as np

from .errors import ConfigError
from .metrics import RunResult

RESULT_FIELDS = ("seed", "method", "mem_size", "task_trained", "task_evaluated", "accuracy")
REPORT_FIELDS = ("method", "mem_size", "n_runs", "mean_average_accuracy", "sample_std")


def results_csv_text(result: RunResult) -> str:
    """Render one run as CSV: header, one row per a[i][j], summary comment.

    Task indices are written 1-based.  Accuracies use shortest
    round-trip float formatting, so equal runs give equal bytes.
    """
    cfg = result.config
    lines = [",".join(RESULT_FIELDS)]
    n = result.matrix.n_tasks
    for i in range(n):
        for j in range(i + 1):
            acc = repr(float(result.matrix.get(i, j)))
            lines.append(
                f"{result.seed},{cfg['method']},{cfg['mem_size']},{i + 1},{j + 1},{acc}"
            )
    summary = (
        f"# summary seed={result.seed} method={cfg['method']} "
        f"mem_size={cfg['mem_size']} A_N={repr(float(result.average_accuracy))}"
    )
    lines.append(summary)
    return "\n".join(lines) + "\n"


def write_results_csv(result: RunResult, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(results_csv_text(result))


def read_results_csv(path):
    """Rows of one results file as dicts with typed fields (comments skipped)."""
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0] != ",".join(RESULT_FIELDS):
        raise ConfigError(f"{path}: missing results header")
    rows = []
    for row in csv.DictReader(io.StringIO("\n".join(lines))):
        rows.append(
            {
                "seed": int(row["seed"]),
                "method": row["method"],
                "mem_size": int(row["mem_size"]),
                "task_trained": int(row["task_trained"]),
                "task_evaluated": int(row["task_evaluated"]),
                "accuracy": float(row["accuracy"]),
            }
        )
    if not rows:
        raise ConfigError(f"{path}: no result rows")
    return rows


def final_average_accuracy(rows) -> float:
    """Mean accuracy over the last trained task's row (the A_N of the file)."""
    last = max(r["task_trained"] for r in rows)
    finals = [r["accuracy"] for r in rows if r["task_trained"] == last]
    return float(np.mean(finals))


def aggregate_results(paths):
    """Group per-run files by (method, mem_size); mean +- sample std of A_N."""
    groups = {}
    for path in paths:
        rows = read_results_csv(path)
        key = (rows[0]["method"], rows[0]["mem_size"])
        groups.setdefault(key, []).append(final_average_accuracy(rows))
    out = []
    for (method, mem_size), vals in sorted(groups.items()):
        arr = np.asarray(vals, dtype=np.float64)
        std = float(np.std(arr, ddof=1)) if len(arr) >= 2 else float("nan")
        out.append(
            {
                "method": method,
                "mem_size": mem_size,
                "n_runs": len(arr),
                "mean_average_accuracy": float(arr.mean()),
                "sample_std": std,
            }
        )
    return out


def report_csv_text(aggregates) -> str:
    lines = [",".join(REPORT_FIELDS)]
    for agg in aggregates:
        lines.append(
            f"{agg['method']},{agg['mem_size']},{agg['n_runs']},"
            f"{repr(agg['mean_average_accuracy'])},{repr(agg['sample_std'])}"
        )
    return "\n".join(lines) + "\n"
