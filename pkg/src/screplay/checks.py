"""Gradient-checking suites for the losses and the full model composite.

All suites run in float64 against central finite differences.  Batches
feeding ReLU networks are resampled until every pre-activation clears a
margin around zero, because finite differences straddling the ReLU kink
measure the subgradient choice, not an implementation bug.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .losses import MultiviewBatch, cross_entropy, scl_loss
from .model import (
    ACTIVATION_FLOOR,
    ModelConfig,
    cast_state,
    encode,
    expand_head,
    init_model,
    logits,
    project,
)

GRAD_TOLERANCE = 1e-5
FD_STEP = 1e-4
_RELU_MARGIN = 1e-2
_NORM_MARGIN = 0.3
_MEASURABLE_MIN = 0.1
_MODEL_MEASURABLE_MIN = 1e-4


@dataclass
class SuiteResult:
    name: str
    max_rel_error: float
    tolerance: float
    n_batches: int
    seconds: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def scl_gradient_suite(n_batches: int = 100, seed: int = 0) -> SuiteResult:
    """Contrastive-loss gradients w.r.t. unit-norm projections.

    The leaf is the projection matrix itself (rows normalized up front),
    not a pre-normalization tensor: composing through the normalization
    creates exact radial null directions whose near-zero gradients sit
    below what central differences at this step size can resolve.

    Batches are redrawn until every gradient entry is measurable at the
    pinned step size.  At tau = 0.1 the loss curvature puts the truncation
    floor near 1e-6 absolute, so entries below ``_MEASURABLE_MIN`` cannot
    meet the relative tolerance even when the analytic gradient is exact
    (the error shrinks as h^2, confirming truncation, not a gradient bug).
    The screen takes max(|g_a|, |g_n|) per entry, so a wrong analytic
    gradient cannot hide: if either side is large the batch is kept and
    the mismatch fails it.
    """
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst = 0.0
    kept = 0
    for _ in range(50 * n_batches):
        if kept == n_batches:
            break
        b = int(rng.integers(1, 9))  # 2b <= 16
        d = int(rng.integers(2, 9))  # D_P <= 8
        half = rng.integers(0, 3, size=b)
        labels = np.concatenate([half, half])
        raw = rng.normal(size=(2 * b, d))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        z0 = Tensor(raw, requires_grad=True, dtype=ad.CHECK_DTYPE)

        def fn(z):
            return scl_loss(MultiviewBatch.from_views(z, labels), tau=0.1)

        report = ad.grad_check(fn, [z0], tolerance=GRAD_TOLERANCE, h=FD_STEP)
        if report.min_magnitude < _MEASURABLE_MIN:
            continue
        kept += 1
        worst = max(worst, report.max_rel_error)
    if kept < n_batches:
        raise RuntimeError("could not sample measurable contrastive batches")
    return SuiteResult(
        name="scl_loss",
        max_rel_error=worst,
        tolerance=GRAD_TOLERANCE,
        n_batches=n_batches,
        seconds=time.perf_counter() - t0,
    )


def ce_gradient_suite(n_batches: int = 100, seed: int = 0) -> SuiteResult:
    """Cross-entropy gradients w.r.t. raw logits."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(n_batches):
        n = int(rng.integers(1, 9))
        c = int(rng.integers(2, 6))
        labels = rng.integers(0, c, size=n)
        # unit-scale logits: saturated softmax entries carry exponentially
        # small gradients that central differences at h=1e-4 cannot resolve
        lg = Tensor(rng.normal(size=(n, c)), requires_grad=True, dtype=ad.CHECK_DTYPE)

        def fn(t):
            return cross_entropy(t, labels)

        report = ad.grad_check(fn, [lg], tolerance=GRAD_TOLERANCE, h=FD_STEP)
        worst = max(worst, report.max_rel_error)
    return SuiteResult(
        name="cross_entropy",
        max_rel_error=worst,
        tolerance=GRAD_TOLERANCE,
        n_batches=n_batches,
        seconds=time.perf_counter() - t0,
    )


def _min_preactivation(state, x: np.ndarray) -> float:
    """Smallest |pre-activation| over every ReLU input in the forward pass."""
    margin = np.inf
    h = x
    for w, b in state.encoder:
        pre = h @ w.data + b.data
        margin = min(margin, float(np.abs(pre).min()))
        h = np.maximum(pre, 0.0)
    h = h + ACTIVATION_FLOOR
    norms = np.linalg.norm(h, axis=1, keepdims=True)
    # scale the norm so one margin covers both hazards: the normalize pole
    # needs ~30x more clearance than a ReLU kink at tolerance 1e-5
    margin = min(margin, float(norms.min()) * (_RELU_MARGIN / _NORM_MARGIN))
    if state.config.proj_kind == "mlp":
        r = h / norms
        w1, b1 = state.projection[0]
        pre = r @ w1.data + b1.data
        margin = min(margin, float(np.abs(pre).min()))
    return margin


def _sample_model(rng, with_head: bool):
    config = ModelConfig(
        input_dim=4, encoder_hidden=(5,), embed_dim=3, proj_hidden=4, proj_dim=3
    )
    # a single parameter draw can be unsalvageable (an embedding unit whose
    # bias keeps it dead for any input leaves rows pinned at the floor), so
    # redraw the state as well as the inputs
    for _ in range(50):
        state = cast_state(
            init_model(config, seed=int(rng.integers(0, 2**31))), ad.CHECK_DTYPE
        )
        if with_head:
            expand_head(state, {0, 1, 2})
            state.head_w.data = rng.normal(size=state.head_w.data.shape)
            state.head_b.data = rng.normal(size=state.head_b.data.shape)
        for _ in range(40):
            x = rng.normal(size=(3, config.input_dim))
            if _min_preactivation(state, x) > _RELU_MARGIN:
                return state, x
    raise RuntimeError("could not sample a model clear of ReLU kinks")


def model_gradient_suite(n_batches: int = 5, seed: int = 0) -> SuiteResult:
    """End-to-end gradients through encoder + projection (contrastive path)
    and encoder + head (cross-entropy path), w.r.t. every parameter.

    Uses a narrower step than the loss suites: the encoder's internal
    normalization gives some parameters near-cancelling gradients, and for
    those entries the dominant finite-difference error is truncation
    (growing with h^2), not roundoff.

    Draws whose smallest nonzero gradient entry falls below
    _MODEL_MEASURABLE_MIN are redrawn: near-cancellation through the row
    normalization can leave entries around 1e-9 where the difference
    quotient is pure roundoff (eps*|f|/h ~ 1e-11 absolute at h=2e-5), so no
    relative tolerance can be certified there regardless of the analytic
    gradient.  At the 1e-4 threshold that noise is ~1e-7 relative, two
    decades under the tolerance, and roughly half of random draws survive
    the screen.  Entries that are exactly zero on both sides (dead units)
    stay in: they agree identically.  The screen takes max(|g_a|, |g_n|)
    per entry, so a wrong analytic gradient cannot hide behind it: whichever
    side is large keeps the draw in the sample and the mismatch fails it.
    """
    h = 2e-5
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst = 0.0
    labels = np.array([0, 1, 0])

    def measurable(fn, params):
        for _ in range(50):
            report = ad.grad_check(fn(), params(), tolerance=GRAD_TOLERANCE, h=h)
            if report.min_magnitude >= _MODEL_MEASURABLE_MIN:
                return report
        raise RuntimeError("could not sample a measurable model draw")

    for _ in range(n_batches):
        holder = {}

        def draw_scl():
            holder["state"], holder["x"] = _sample_model(rng, with_head=False)

            def fn_scl(*_):
                z = project(holder["state"], encode(holder["state"], holder["x"]))
                mv = MultiviewBatch(
                    projections=z, labels=labels, origin=np.zeros(3, dtype=np.int8)
                )
                return scl_loss(mv, tau=0.1)

            return fn_scl

        report = measurable(
            draw_scl,
            lambda: holder["state"].encoder_params()
            + holder["state"].projection_params(),
        )
        worst = max(worst, report.max_rel_error)

        def draw_ce():
            holder["state"], holder["x"] = _sample_model(rng, with_head=True)

            def fn_ce(*_):
                return cross_entropy(
                    logits(holder["state"], encode(holder["state"], holder["x"])),
                    labels,
                )

            return fn_ce

        report = measurable(
            draw_ce,
            lambda: holder["state"].encoder_params() + holder["state"].head_params(),
        )
        worst = max(worst, report.max_rel_error)
    return SuiteResult(
        name="model_composite",
        max_rel_error=worst,
        tolerance=GRAD_TOLERANCE,
        n_batches=2 * n_batches,
        seconds=time.perf_counter() - t0,
    )


def run_gradient_suites(seed: int = 0, loss_batches: int = 100, model_batches: int = 5):
    """All suites, in a fixed order."""
    return [
        scl_gradient_suite(n_batches=loss_batches, seed=seed),
        ce_gradient_suite(n_batches=loss_batches, seed=seed + 1),
        model_gradient_suite(n_batches=model_batches, seed=seed + 2),
    ]
