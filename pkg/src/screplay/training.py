"""Continual-learning training loops and the single-pass experiment runner.

Every method takes one SGD step per stream batch.  Replay methods
retrieve from memory BEFORE inserting the incoming batch, so a replay
draw never contains items from the batch being learned.  The contrastive
method updates encoder and projection parameters and never touches the
FC head; the cross-entropy methods update encoder and head and never
touch the projection.
"""

import logging
import time
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .classifiers import compute_prototypes, ncm_classify_batch, softmax_classify_batch
from .data import AugmentorSpec, Batch, Dataset, TaskStream, augment, concat_batches, default_augmentor
from .errors import ConfigError, ContractError
from .losses import DEFAULT_TAU, MultiviewBatch, cross_entropy, scl_loss
from .memory import MemoryBuffer
from .metrics import AccuracyMatrix, RunResult, confusion_matrix, fc_bias_diagnostic
from .model import ModelConfig, ModelState, encode, expand_head, init_model, logits, project
from .rngs import BUFFER, EPOCH_SHUFFLE, child_rng

log = logging.getLogger(__name__)

METHODS = ("scr", "er", "er_ncm", "finetune", "offline")

NCM_METHODS = ("scr", "er_ncm")


@dataclass
class MethodConfig:
    method: str
    lr: float = 0.1
    stream_batch: int = 10
    mem_batch: int = 100
    mem_size: int = 100
    tau: float = DEFAULT_TAU
    offline_epochs: int = 50
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.lr > 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.stream_batch <= 0:
            raise ConfigError(f"stream_batch must be positive, got {self.stream_batch}")
        if self.mem_batch < 0:
            raise ConfigError(f"mem_batch must be >= 0, got {self.mem_batch}")
        if self.mem_size < 0:
            raise ConfigError(f"mem_size must be >= 0, got {self.mem_size}")
        if not self.tau > 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.offline_epochs <= 0:
            raise ConfigError(f"offline_epochs must be positive, got {self.offline_epochs}")
        if self.method == "finetune":
            self.mem_size = 0


def scr_train_step(
    state: ModelState,
    buf: MemoryBuffer,
    b_n: Batch,
    cfg: MethodConfig,
    augmentor: AugmentorSpec,
) -> float:
    """One contrastive replay step.

    Retrieve a replay batch, pair the union with an augmented view,
    project everything, take one SGD step on the contrastive loss over
    encoder and projection parameters, then reservoir-insert the incoming
    batch.  Returns the loss value (the plain sum over anchors).

    The update itself descends the per-anchor mean: the summed loss grows
    with the replay batch, and stepping on it would scale the effective
    learning rate by the batch size (a 220-row batch at lr 0.1 collapses
    the encoder within one task).  The cross-entropy methods step on a
    per-example mean, so this keeps one learning rate meaningful for both.
    """
    mem_x, mem_y = buf.retrieve(cfg.mem_batch)
    b_nm = concat_batches(b_n, Batch(mem_x, mem_y))
    views = augment(augmentor, b_nm)
    inputs = np.concatenate([b_nm.inputs, views.inputs])
    labels = np.concatenate([b_nm.labels, views.labels])
    z = project(state, encode(state, inputs))
    loss = scl_loss(MultiviewBatch.from_views(z, labels), cfg.tau)
    ad.scale(loss, 1.0 / z.shape[0]).backward()
    ad.sgd_step(state.encoder_params() + state.projection_params(), cfg.lr)
    state.step += 1
    buf.update(b_n.inputs, b_n.labels)
    return float(loss.data)


def _rows_for_labels(state: ModelState, labels) -> np.ndarray:
    """Map class ids to FC head row indices; unexpanded ids are an error."""
    labels = np.asarray(labels, dtype=np.int64)
    ids = np.asarray(state.head_class_ids, dtype=np.int64)
    if len(ids) == 0 or labels.max() > ids.max() or labels.min() < 0:
        raise ContractError("batch contains labels with no FC head row")
    lut = np.full(int(ids.max()) + 1, -1, dtype=np.int64)
    lut[ids] = np.arange(len(ids))
    rows = lut[labels]
    if np.any(rows < 0):
        raise ContractError("batch contains labels with no FC head row")
    return rows


def _supervised_step(state: ModelState, batch: Batch, lr: float) -> float:
    """Expand the head over unseen labels, then one cross-entropy SGD step."""
    unseen = sorted(set(int(y) for y in batch.labels) - set(state.head_class_ids))
    if unseen:
        expand_head(state, unseen)
    rows = _rows_for_labels(state, batch.labels)
    loss = cross_entropy(logits(state, encode(state, batch)), rows)
    loss.backward()
    ad.sgd_step(state.encoder_params() + state.head_params(), lr)
    state.step += 1
    return float(loss.data)


def er_train_step(
    state: ModelState, buf: MemoryBuffer, b_n: Batch, cfg: MethodConfig
) -> float:
    """One experience-replay step: replay draw, cross-entropy update on the
    union, then reservoir insertion.  No augmentation, no projection."""
    mem_x, mem_y = buf.retrieve(cfg.mem_batch)
    combined = concat_batches(b_n, Batch(mem_x, mem_y))
    loss = _supervised_step(state, combined, cfg.lr)
    buf.update(b_n.inputs, b_n.labels)
    return loss


def finetune_step(
    state: ModelState, buf: MemoryBuffer, b_n: Batch, cfg: MethodConfig
) -> float:
    """Degenerate replay with an always-empty memory (mem_size forced to 0)."""
    return er_train_step(state, buf, b_n, cfg)


def offline_train(state: ModelState, pool: Batch, cfg: MethodConfig):
    """Multi-epoch iid training over the whole pool, reshuffled per epoch."""
    rng = child_rng(cfg.seed, EPOCH_SHUFFLE)
    n = len(pool)
    for _ in range(cfg.offline_epochs):
        order = rng.permutation(n)
        for lo in range(0, n, cfg.stream_batch):
            idx = order[lo : lo + cfg.stream_batch]
            _supervised_step(state, Batch(pool.inputs[idx], pool.labels[idx]), cfg.lr)


def _echo(cfg: MethodConfig, mc: ModelConfig, stream: TaskStream) -> dict:
    return {
        "method": cfg.method,
        "lr": cfg.lr,
        "stream_batch": cfg.stream_batch,
        "mem_batch": cfg.mem_batch,
        "mem_size": cfg.mem_size,
        "tau": cfg.tau,
        "offline_epochs": cfg.offline_epochs,
        "seed": cfg.seed,
        "input_dim": mc.input_dim,
        "encoder_hidden": list(mc.encoder_hidden),
        "embed_dim": mc.embed_dim,
        "proj_hidden": mc.proj_hidden,
        "proj_dim": mc.proj_dim,
        "proj_kind": mc.proj_kind,
        "n_tasks": stream.n_tasks,
    }


def _eval_accuracy(state, buf, test, task_classes, method):
    """Accuracy on one task's test subset with the method's classifier."""
    subset = test.class_subset(task_classes)
    if method in NCM_METHODS:
        protos = compute_prototypes(state, Batch(*buf.snapshot()))
        preds = ncm_classify_batch(protos, state, subset)
    else:
        preds = softmax_classify_batch(state, subset)
    return float(np.mean(preds == subset.labels))


def run_experiment(
    cfg: MethodConfig,
    stream: TaskStream,
    test: Dataset,
    model_config: ModelConfig = None,
    augmentor: AugmentorSpec = None,
    config_echo: dict = None,
    with_artifacts: bool = False,
):
    """Train on the stream once (offline: epochs of iid passes) and fill the
    accuracy matrix row by row at task boundaries.

    Prototype methods evaluate by re-encoding the buffer snapshot into
    class prototypes; softmax methods evaluate by head argmax.  Returns a
    RunResult; with_artifacts=True also returns the final model state and
    buffer for embedding dumps.
    """
    t0 = time.perf_counter()
    if stream.stream_batch != cfg.stream_batch:
        raise ConfigError(
            f"stream batch {stream.stream_batch} != config stream_batch {cfg.stream_batch}"
        )
    width = stream.task_data[0].inputs.shape[1] if stream.n_tasks else test.flat_dim
    if width != test.flat_dim:
        raise ConfigError(f"stream width {width} != test width {test.flat_dim}")
    if model_config is None:
        model_config = ModelConfig(input_dim=width)
    if model_config.input_dim != width:
        raise ConfigError(
            f"model input_dim {model_config.input_dim} != data width {width}"
        )
    state = init_model(model_config, cfg.seed)
    buf = MemoryBuffer(cfg.mem_size, rng=child_rng(cfg.seed, BUFFER))
    if cfg.method == "scr" and augmentor is None:
        augmentor = default_augmentor(cfg.seed)

    if cfg.method == "offline":
        pool = concat_batches(*stream.task_data)
        offline_train(state, pool, cfg)
        matrix = AccuracyMatrix(1)
        all_classes = sorted(set(int(y) for y in test.labels))
        task_classes = [all_classes]
        full = Batch(test.inputs, test.labels)
        preds = softmax_classify_batch(state, full)
        matrix.set(0, 0, float(np.mean(preds == test.labels)))
    else:
        matrix = AccuracyMatrix(stream.n_tasks)
        task_classes = stream.task_classes
        current = 0

        def eval_row(trained: int):
            if cfg.method in NCM_METHODS:
                observed = set().union(*task_classes[: trained + 1])
                buffered = set(int(y) for y in buf.snapshot()[1])
                missing = sorted(observed - buffered)
                if missing:
                    log.warning(
                        "classes %s have no buffered samples; they are excluded "
                        "from the prototype argmin and their test samples cannot "
                        "be predicted correctly",
                        missing,
                    )
            for j in range(trained + 1):
                matrix.set(
                    trained, j, _eval_accuracy(state, buf, test, task_classes[j], cfg.method)
                )

        item = stream.next_batch()
        while item is not None:
            t, batch = item
            if t != current:
                for finished in range(current, t):
                    eval_row(finished)
                current = t
            if cfg.method == "scr":
                scr_train_step(state, buf, batch, cfg, augmentor)
            else:
                er_train_step(state, buf, batch, cfg)
            item = stream.next_batch()
        for finished in range(current, stream.n_tasks):
            eval_row(finished)
        full = Batch(test.inputs, test.labels)
        if cfg.method in NCM_METHODS:
            protos = compute_prototypes(state, Batch(*buf.snapshot()))
            preds = ncm_classify_batch(protos, state, full)
        else:
            preds = softmax_classify_batch(state, full)

    confusion = confusion_matrix(preds, test.labels, test.class_count)
    task_of_class = {c: t for t, classes in enumerate(task_classes) for c in classes}
    fc_report = fc_bias_diagnostic(state, task_of_class)
    result = RunResult(
        config=config_echo if config_echo is not None else _echo(cfg, model_config, stream),
        seed=cfg.seed,
        matrix=matrix,
        confusion=confusion,
        fc_report=fc_report,
        task_classes=task_classes,
        wall_clock_seconds=time.perf_counter() - t0,
    )
    if with_artifacts:
        return result, state, buf
    return result
