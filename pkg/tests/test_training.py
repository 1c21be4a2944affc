"""Training-step and experiment-loop checks.

The single-step tests script the documented update sequence against a
bit-identical clone (same parameters, same generators): any deviation in
draw order, parameter set, or loss scaling shows up as a parameter
mismatch in float32.
"""

import numpy as np
import pytest

from screplay import autodiff as ad
from screplay.data import (
    AugmentorSpec,
    Batch,
    augment,
    concat_batches,
    gen_synthetic,
    split_tasks,
)
from screplay.errors import ConfigError
from screplay.losses import MultiviewBatch, cross_entropy, scl_loss
from screplay.memory import MemoryBuffer
from screplay.model import (
    ModelConfig,
    encode,
    expand_head,
    init_model,
    logits,
    project,
)
from screplay.training import (
    MethodConfig,
    er_train_step,
    offline_train,
    run_experiment,
    scr_train_step,
)

MODEL = ModelConfig(input_dim=6, encoder_hidden=(8,), embed_dim=5, proj_hidden=6, proj_dim=4)


def data_pair(seed=0):
    return gen_synthetic(
        classes=4, dim=6, per_class_train=30, per_class_test=10, separation=6.0, seed=seed
    )


def fresh_setup(seed, capacity=20):
    state = init_model(MODEL, seed=seed)
    buf = MemoryBuffer(capacity, rng=np.random.default_rng(seed + 1000))
    return state, buf


def assert_params_equal(a, b):
    for ta, tb in zip(a.all_params(), b.all_params()):
        np.testing.assert_array_equal(ta.data, tb.data)


def prefill(buf, rng, n, dim=6, n_classes=2):
    xs = rng.normal(size=(n, dim)).astype(np.float32)
    ys = rng.integers(0, n_classes, size=n)
    buf.update(xs, ys)


def stream_batch(rng, n=5, dim=6, labels=(2, 3)):
    xs = rng.normal(size=(n, dim)).astype(np.float32)
    ys = rng.choice(labels, size=n)
    return Batch(xs, ys)


# -- single-step equivalence -----------------------------------------------------


@pytest.mark.parametrize("prefill_n", [0, 25])
def test_er_step_replays_the_documented_sequence(prefill_n):
    cfg = MethodConfig(method="er", lr=0.1, mem_batch=10, mem_size=20, seed=0)
    state_a, buf_a = fresh_setup(7)
    state_b, buf_b = fresh_setup(7)
    if prefill_n:
        prefill(buf_a, np.random.default_rng(3), prefill_n)
        prefill(buf_b, np.random.default_rng(3), prefill_n)
    b_n = stream_batch(np.random.default_rng(4))

    loss_a = er_train_step(state_a, buf_a, b_n, cfg)

    # scripted clone: retrieve, union, expand, one cross-entropy step on
    # encoder + head, then insert the incoming batch
    mem_x, mem_y = buf_b.retrieve(cfg.mem_batch)
    combined = concat_batches(b_n, Batch(mem_x, mem_y))
    unseen = sorted(set(int(y) for y in combined.labels) - set(state_b.head_class_ids))
    expand_head(state_b, unseen)
    rows = np.array([state_b.head_class_ids.index(int(y)) for y in combined.labels])
    loss = cross_entropy(logits(state_b, encode(state_b, combined)), rows)
    loss.backward()
    ad.sgd_step(state_b.encoder_params() + state_b.head_params(), cfg.lr)
    state_b.step += 1
    buf_b.update(b_n.inputs, b_n.labels)

    assert loss_a == float(loss.data)
    assert state_a.step == state_b.step == 1
    assert state_a.head_class_ids == state_b.head_class_ids
    assert_params_equal(state_a, state_b)
    for got, want in zip(buf_a.snapshot(), buf_b.snapshot()):
        np.testing.assert_array_equal(got, want)


@pytest.mark.parametrize("prefill_n", [0, 25])
def test_scr_step_replays_the_documented_sequence(prefill_n):
    cfg = MethodConfig(method="scr", lr=0.1, mem_batch=10, mem_size=20, tau=0.1, seed=0)
    state_a, buf_a = fresh_setup(8)
    state_b, buf_b = fresh_setup(8)
    if prefill_n:
        prefill(buf_a, np.random.default_rng(5), prefill_n)
        prefill(buf_b, np.random.default_rng(5), prefill_n)
    aug_a = AugmentorSpec(mode="vector_noise", rng=np.random.default_rng(6), sigma=0.05)
    aug_b = AugmentorSpec(mode="vector_noise", rng=np.random.default_rng(6), sigma=0.05)
    b_n = stream_batch(np.random.default_rng(9))

    loss_a = scr_train_step(state_a, buf_a, b_n, cfg, aug_a)

    # scripted clone: retrieve, pair with one augmented view, project, one
    # step on the contrastive loss over encoder + projection (the update
    # descends the per-anchor mean, the reported loss is the sum), insert
    mem_x, mem_y = buf_b.retrieve(cfg.mem_batch)
    b_nm = concat_batches(b_n, Batch(mem_x, mem_y))
    views = augment(aug_b, b_nm)
    inputs = np.concatenate([b_nm.inputs, views.inputs])
    labels = np.concatenate([b_nm.labels, views.labels])
    z = project(state_b, encode(state_b, inputs))
    loss = scl_loss(MultiviewBatch.from_views(z, labels), cfg.tau)
    ad.scale(loss, 1.0 / z.shape[0]).backward()
    ad.sgd_step(state_b.encoder_params() + state_b.projection_params(), cfg.lr)
    state_b.step += 1
    buf_b.update(b_n.inputs, b_n.labels)

    assert loss_a == float(loss.data)
    assert state_a.step == 1
    assert_params_equal(state_a, state_b)
    for got, want in zip(buf_a.snapshot(), buf_b.snapshot()):
        np.testing.assert_array_equal(got, want)


def test_er_step_retrieves_before_inserting():
    # an empty buffer must contribute nothing to the union even when the
    # incoming batch is inserted by the very same call
    cfg = MethodConfig(method="er", lr=0.1, mem_batch=50, mem_size=50, seed=0)
    state, buf = fresh_setup(10)
    b_n = stream_batch(np.random.default_rng(11))
    er_train_step(state, buf, b_n, cfg)
    assert len(buf) == len(b_n)
    snap_x, _ = buf.snapshot()
    np.testing.assert_array_equal(snap_x, b_n.inputs)


def test_er_touches_no_projection_and_scr_touches_no_head():
    cfg_er = MethodConfig(method="er", mem_batch=5, mem_size=10, seed=0)
    cfg_scr = MethodConfig(method="scr", mem_batch=5, mem_size=10, seed=0)
    rng = np.random.default_rng(12)
    aug = AugmentorSpec(mode="vector_noise", rng=np.random.default_rng(13), sigma=0.05)

    state_er, buf_er = fresh_setup(14)
    ref = init_model(MODEL, seed=14)
    state_scr, buf_scr = fresh_setup(14)
    for _ in range(3):
        b_n = stream_batch(rng)
        er_train_step(state_er, buf_er, b_n, cfg_er)
        scr_train_step(state_scr, buf_scr, b_n, cfg_scr, aug)

    for got, want in zip(state_er.projection_params(), ref.projection_params()):
        np.testing.assert_array_equal(got.data, want.data)
    assert any(
        not np.array_equal(got.data, want.data)
        for got, want in zip(state_er.encoder_params(), ref.encoder_params())
    )
    assert state_scr.head_classes == 0
    assert any(
        not np.array_equal(got.data, want.data)
        for got, want in zip(state_scr.projection_params(), ref.projection_params())
    )


# -- full runs ---------------------------------------------------------------------


def run(method, seed=0, data_seed=0, **overrides):
    cfg = MethodConfig(method=method, seed=seed, **overrides)
    train, test = data_pair(data_seed)
    stream = split_tasks(train, 2, 2, seed=seed, stream_batch=cfg.stream_batch)
    return cfg, stream, test


def test_finetune_is_replay_with_zero_memory():
    cfg_f, stream_f, test = run("finetune", mem_batch=10)
    res_f, state_f, _ = run_experiment(cfg_f, stream_f, test, MODEL, with_artifacts=True)
    cfg_e, stream_e, test = run("er", mem_size=0, mem_batch=10)
    res_e, state_e, _ = run_experiment(cfg_e, stream_e, test, MODEL, with_artifacts=True)
    assert_params_equal(state_f, state_e)
    assert res_f.matrix == res_e.matrix
    np.testing.assert_array_equal(res_f.confusion, res_e.confusion)


def test_step_counter_counts_stream_batches():
    cfg, stream, test = run("er", stream_batch=7)
    # 60 examples per task in batches of 7: 9 batches per task
    _, state, _ = run_experiment(cfg, stream, test, MODEL, with_artifacts=True)
    assert state.step == 18


def test_offline_epochs_and_single_row_matrix():
    cfg, stream, test = run("offline", offline_epochs=3, stream_batch=10)
    result, state, _ = run_experiment(cfg, stream, test, MODEL, with_artifacts=True)
    assert state.step == 3 * 12
    assert result.matrix.n_tasks == 1
    assert result.task_classes == [[0, 1, 2, 3]]
    assert 0.0 <= result.average_accuracy <= 1.0


def test_offline_reshuffles_each_epoch():
    state = init_model(MODEL, seed=15)
    rng = np.random.default_rng(15)
    pool = Batch(rng.normal(size=(30, 6)).astype(np.float32), rng.integers(0, 3, size=30))
    cfg = MethodConfig(method="offline", offline_epochs=4, stream_batch=30, seed=15)

    # the epoch shuffle draws from one dedicated child generator, so the
    # per-epoch orders are reproducible and must not repeat
    from screplay.rngs import EPOCH_SHUFFLE, child_rng

    shuffle_rng = child_rng(cfg.seed, EPOCH_SHUFFLE)
    orders = [shuffle_rng.permutation(30) for _ in range(4)]
    assert any(not np.array_equal(orders[0], o) for o in orders[1:])
    offline_train(state, pool, cfg)
    assert state.step == 4


def test_run_experiment_is_seed_reproducible():
    def once():
        cfg, stream, test = run("er_ncm", seed=3, mem_size=30, mem_batch=10)
        return run_experiment(cfg, stream, test, MODEL)

    assert once() == once()


def test_scr_run_reports_no_fc_diagnostic():
    cfg, stream, test = run("scr", mem_size=30, mem_batch=10)
    result = run_experiment(cfg, stream, test, MODEL)
    assert not result.fc_report.applicable
    cfg, stream, test = run("er", mem_size=30, mem_batch=10)
    result = run_experiment(cfg, stream, test, MODEL)
    assert result.fc_report.applicable


def test_run_experiment_validates_wiring():
    cfg, stream, test = run("er")
    bad_cfg = MethodConfig(method="er", stream_batch=5)
    with pytest.raises(ConfigError):
        run_experiment(bad_cfg, stream, test, MODEL)

    cfg, stream, test = run("er")
    with pytest.raises(ConfigError):
        run_experiment(cfg, stream, test, ModelConfig(input_dim=9))


def test_method_config_validation():
    with pytest.raises(ConfigError):
        MethodConfig(method="ewc")
    with pytest.raises(ConfigError):
        MethodConfig(method="er", lr=0.0)
    with pytest.raises(ConfigError):
        MethodConfig(method="er", tau=-0.5)
    with pytest.raises(ConfigError):
        MethodConfig(method="er", stream_batch=0)
    with pytest.raises(ConfigError):
        MethodConfig(method="er", mem_batch=-1)
    with pytest.raises(ConfigError):
        MethodConfig(method="er", mem_size=-1)
    with pytest.raises(ConfigError):
        MethodConfig(method="er", offline_epochs=0)
    assert MethodConfig(method="finetune", mem_size=500).mem_size == 0
