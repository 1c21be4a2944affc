"""Evaluation metrics and the self-describing result record of a run.

The accuracy matrix holds a[i][j] = accuracy on task j's test set right
after finishing training on task i (0-based here, lower triangle only).
Average accuracy is the mean of the final row.  The recency-bias
diagnostic aggregates FC weight-row means per task to expose the
inflated-new-class-weights failure mode of softmax heads.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, StateError
from .model import ModelState


class AccuracyMatrix:
    """Lower-triangular N x N matrix of per-task accuracies in [0, 1]."""

    def __init__(self, n_tasks: int):
        if n_tasks <= 0:
            raise ContractError(f"n_tasks must be positive, got {n_tasks}")
        self.n_tasks = int(n_tasks)
        self.a = np.full((n_tasks, n_tasks), np.nan, dtype=np.float64)

    def set(self, trained: int, evaluated: int, accuracy: float):
        if not 0 <= evaluated <= trained < self.n_tasks:
            raise ContractError(f"need 0 <= j <= i < {self.n_tasks}, got ({trained}, {evaluated})")
        if not 0.0 <= accuracy <= 1.0:
            raise ContractError(f"accuracy must lie in [0, 1], got {accuracy}")
        self.a[trained, evaluated] = float(accuracy)

    def get(self, trained: int, evaluated: int) -> float:
        return float(self.a[trained, evaluated])

    def row_complete(self, trained: int) -> bool:
        return bool(np.all(np.isfinite(self.a[trained, : trained + 1])))

    @property
    def last_row(self) -> np.ndarray:
        return self.a[self.n_tasks - 1, :].copy()

    def __eq__(self, other):
        return (
            isinstance(other, AccuracyMatrix)
            and self.n_tasks == other.n_tasks
            and np.array_equal(self.a, other.a, equal_nan=True)
        )

    def to_lists(self):
        return [
            [self.a[i, j] if j <= i else None for j in range(self.n_tasks)]
            for i in range(self.n_tasks)
        ]

    @classmethod
    def from_lists(cls, rows) -> "AccuracyMatrix":
        m = cls(len(rows))
        for i, row in enumerate(rows):
            for j, v in enumerate(row):
                if v is not None:
                    m.a[i, j] = float(v)
        return m


def average_accuracy(m: AccuracyMatrix) -> float:
    """Mean of the final row: (1/N) * sum_j a[N-1][j]."""
    n = m.n_tasks
    if not m.row_complete(n - 1):
        raise StateError("final accuracy row is incomplete")
    return float(np.mean(m.a[n - 1, :n]))


def confusion_matrix(preds, truths, classes: int) -> np.ndarray:
    """Count matrix: cell (t, p) = samples of true class t predicted as p."""
    preds = np.asarray(preds, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if preds.shape != truths.shape or preds.ndim != 1:
        raise ContractError("preds and truths must be equal-length 1-d arrays")
    if len(preds):
        lo = min(preds.min(), truths.min())
        hi = max(preds.max(), truths.max())
        if lo < 0 or hi >= classes:
            raise ContractError(f"labels must lie in [0, {classes})")
    counts = np.bincount(truths * classes + preds, minlength=classes * classes)
    return counts.reshape(classes, classes)


def dominant_predicted_class(confusion: np.ndarray) -> int:
    """Class whose predicted column collects the most samples, ties to lowest."""
    return int(np.argmax(confusion.sum(axis=0)))


@dataclass
class FcBiasReport:
    """Per-task means of FC weight-row means, plus the recency-bias flag.

    ``flagged`` is True when the final task's value strictly exceeds every
    earlier task's.  ``applicable`` is False for models without a head
    (prototype-based methods); that is a marker, not an error.
    """

    applicable: bool
    per_task_means: np.ndarray = None
    class_means: dict = None
    flagged: bool = False

    def __eq__(self, other):
        if not isinstance(other, FcBiasReport):
            return NotImplemented
        if self.applicable != other.applicable or self.flagged != other.flagged:
            return False
        if (self.per_task_means is None) != (other.per_task_means is None):
            return False
        if self.per_task_means is not None and not np.array_equal(
            self.per_task_means, other.per_task_means, equal_nan=True
        ):
            return False
        return self.class_means == other.class_means


def fc_bias_diagnostic(state: ModelState, task_of_class: dict) -> FcBiasReport:
    """Aggregate FC weight-row means by task and flag final-task inflation."""
    if state.head_classes == 0:
        return FcBiasReport(applicable=False)
    w = state.head_w.data
    class_means = {
        int(cid): float(w[row].mean()) for row, cid in enumerate(state.head_class_ids)
    }
    tasks = sorted(set(int(t) for t in task_of_class.values()))
    per_task = []
    for t in tasks:
        vals = [
            class_means[c]
            for c, ct in task_of_class.items()
            if int(ct) == t and int(c) in class_means
        ]
        per_task.append(float(np.mean(vals)) if vals else np.nan)
    per_task = np.asarray(per_task, dtype=np.float64)
    flagged = bool(
        len(per_task) >= 2
        and np.isfinite(per_task[-1])
        and np.all(per_task[-1] > per_task[:-1])
    )
    return FcBiasReport(
        applicable=True, per_task_means=per_task, class_means=class_means, flagged=flagged
    )


class RunResult:
    """Everything one experiment run produced, minus wall-clock in equality:
    re-running the echoed config and seed reproduces the record bit-exactly,
    which a timing field would break."""

    def __init__(
        self,
        config: dict,
        seed: int,
        matrix: AccuracyMatrix,
        confusion: np.ndarray,
        fc_report: FcBiasReport,
        task_classes: list,
        wall_clock_seconds: float = 0.0,
    ):
        self.config = dict(config)
        self.seed = int(seed)
        self.matrix = matrix
        self.confusion = np.asarray(confusion, dtype=np.int64)
        self.fc_report = fc_report
        self.task_classes = [list(map(int, tc)) for tc in task_classes]
        self.wall_clock_seconds = float(wall_clock_seconds)

    @property
    def average_accuracy(self) -> float:
        return average_accuracy(self.matrix)

    def __eq__(self, other):
        if not isinstance(other, RunResult):
            return NotImplemented
        return (
            self.config == other.config
            and self.seed == other.seed
            and self.matrix == other.matrix
            and np.array_equal(self.confusion, other.confusion)
            and self.fc_report == other.fc_report
            and self.task_classes == other.task_classes
        )

    def to_json(self) -> str:
        fc = self.fc_report
        payload = {
            "config": self.config,
            "seed": self.seed,
            "accuracy_matrix": self.matrix.to_lists(),
            "average_accuracy": self.average_accuracy,
            "confusion": self.confusion.tolist(),
            "task_classes": self.task_classes,
            "fc_applicable": fc.applicable,
            "fc_per_task_means": None
            if fc.per_task_means is None
            else [float(v) for v in fc.per_task_means],
            "fc_class_means": None
            if fc.class_means is None
            else [[int(c), float(v)] for c, v in sorted(fc.class_means.items())],
            "fc_flagged": fc.flagged,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunResult":
        payload = json.loads(text)
        fc = FcBiasReport(
            applicable=payload["fc_applicable"],
            per_task_means=None
            if payload["fc_per_task_means"] is None
            else np.asarray(payload["fc_per_task_means"], dtype=np.float64),
            class_means=None
            if payload["fc_class_means"] is None
            else {int(c): float(v) for c, v in payload["fc_class_means"]},
            flagged=payload["fc_flagged"],
        )
        return cls(
            config=payload["config"],
            seed=payload["seed"],
            matrix=AccuracyMatrix.from_lists(payload["accuracy_matrix"]),
            confusion=np.asarray(payload["confusion"], dtype=np.int64),
            fc_report=fc,
            task_classes=payload["task_classes"],
        )
