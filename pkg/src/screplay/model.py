"""Encoder, projection head, and expandable fully-connected classifier.

The encoder is a plain MLP whose output rows are L2-normalized, so
embeddings live on the unit sphere and class prototypes are means of
unit vectors.  The projection head maps embeddings to the space where
the contrastive loss is applied and is discarded at inference.  The FC
head holds one row per class observed so far, in arrival order, with a
side table mapping rows back to class ids.
"""

import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, ContractError, NoClassesError
from .rngs import PARAM_INIT, child_rng

PROJ_KINDS = ("mlp", "linear", "none")

CHECKPOINT_MAGIC = b"CLMS1"

# added to the final (nonnegative) activation before row normalization;
# bounds the pre-normalization norm below by ACTIVATION_FLOOR * sqrt(dim)
ACTIVATION_FLOOR = 1e-3


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    encoder_hidden: tuple = (64, 64)
    embed_dim: int = 32
    proj_hidden: int = 128
    proj_dim: int = 128
    proj_kind: str = "mlp"
    head_classes: int = 0

    def __post_init__(self):
        object.__setattr__(self, "encoder_hidden", tuple(int(h) for h in self.encoder_hidden))
        if self.input_dim <= 0:
            raise ConfigError(f"input_dim must be positive, got {self.input_dim}")
        if any(h <= 0 for h in self.encoder_hidden):
            raise ConfigError(f"encoder_hidden must be positive, got {self.encoder_hidden}")
        if self.embed_dim <= 0:
            raise ConfigError(f"embed_dim must be positive, got {self.embed_dim}")
        if self.proj_hidden <= 0:
            raise ConfigError(f"proj_hidden must be positive, got {self.proj_hidden}")
        if self.proj_dim <= 0:
            raise ConfigError(f"proj_dim must be positive, got {self.proj_dim}")
        if self.proj_kind not in PROJ_KINDS:
            raise ConfigError(f"proj_kind must be one of {PROJ_KINDS}, got {self.proj_kind!r}")
        if self.proj_kind == "none" and self.proj_dim != self.embed_dim:
            raise ConfigError("proj_kind 'none' requires proj_dim == embed_dim")
        if self.head_classes < 0:
            raise ConfigError(f"head_classes must be >= 0, got {self.head_classes}")


@dataclass
class ModelState:
    """Mutable parameter bundle: update and expansion are exclusive;
    read-only inference on a frozen state may be shared."""

    config: ModelConfig
    encoder: list
    projection: list
    head_w: Tensor
    head_b: Tensor
    head_class_ids: list
    step: int = 0
    rng_seed: int = 0

    @property
    def head_classes(self) -> int:
        return len(self.head_class_ids)

    def encoder_params(self):
        return [t for pair in self.encoder for t in pair]

    def projection_params(self):
        return [t for pair in self.projection for t in pair]

    def head_params(self):
        return [self.head_w, self.head_b]

    def all_params(self):
        return self.encoder_params() + self.projection_params() + self.head_params()

    def class_row(self, class_id: int) -> int:
        try:
            return self.head_class_ids.index(int(class_id))
        except ValueError:
            raise ContractError(f"class {class_id} has no FC head row") from None


def _init_linear(rng: np.random.Generator, fan_in: int, fan_out: int):
    bound = 1.0 / math.sqrt(fan_in)
    w = rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(ad.TRAIN_DTYPE)
    b = rng.uniform(-bound, bound, size=fan_out).astype(ad.TRAIN_DTYPE)
    return Tensor(w, requires_grad=True), Tensor(b, requires_grad=True)


def init_model(config: ModelConfig, seed: int) -> ModelState:
    """Initialize all parameters uniformly in [-1/sqrt(fan_in), +1/sqrt(fan_in)].

    Projection parameters are always drawn, even for methods that never use
    them, so the encoder initialization is identical across methods under
    one seed.  Head rows start at zero; see :func:`expand_head`.
    """
    rng = child_rng(seed, PARAM_INIT)
    dims = [config.input_dim, *config.encoder_hidden, config.embed_dim]
    encoder = [_init_linear(rng, dims[i], dims[i + 1]) for i in range(len(dims) - 1)]
    if config.proj_kind == "mlp":
        projection = [
            _init_linear(rng, config.embed_dim, config.proj_hidden),
            _init_linear(rng, config.proj_hidden, config.proj_dim),
        ]
    elif config.proj_kind == "linear":
        projection = [_init_linear(rng, config.embed_dim, config.proj_dim)]
    else:
        projection = []
    c = config.head_classes
    head_w = Tensor(np.zeros((c, config.embed_dim), dtype=ad.TRAIN_DTYPE), requires_grad=True)
    head_b = Tensor(np.zeros(c, dtype=ad.TRAIN_DTYPE), requires_grad=True)
    return ModelState(
        config=config,
        encoder=encoder,
        projection=projection,
        head_w=head_w,
        head_b=head_b,
        head_class_ids=list(range(c)),
        step=0,
        rng_seed=int(seed),
    )


def _input_array(batch):
    return getattr(batch, "inputs", batch)


def encode(state: ModelState, batch) -> Tensor:
    """Map inputs to unit-norm embeddings of width embed_dim.

    Every layer is ReLU-activated, including the last, so embeddings are
    nonnegative before normalization.  Nonnegative features make the FC
    head's weight-row means a usable bias signal: a row aligned with its
    class grows positive coordinates, so inflated rows for recent classes
    show up directly in the row mean.  A small constant is added after the
    final activation so an input whose activations all die maps to the
    uniform direction instead of hitting the normalization pole.
    """
    inputs = np.asarray(_input_array(batch))
    if inputs.ndim != 2 or inputs.shape[1] != state.config.input_dim:
        raise ConfigError(
            f"expected inputs of shape (n, {state.config.input_dim}), got {inputs.shape}"
        )
    dtype = state.encoder[0][0].dtype if state.encoder else ad.TRAIN_DTYPE
    h = Tensor(inputs, dtype=dtype)
    for w, b in state.encoder:
        h = ad.relu(ad.add(ad.matmul(h, w), b))
    floor = Tensor(np.full(state.config.embed_dim, ACTIVATION_FLOOR, dtype=dtype))
    return ad.l2_normalize(ad.add(h, floor))


def project(state: ModelState, r: Tensor) -> Tensor:
    """Map embeddings to the unit-norm contrastive space (identity for 'none')."""
    if r.data.ndim != 2 or r.shape[1] != state.config.embed_dim:
        raise ConfigError(f"expected (n, {state.config.embed_dim}) embeddings, got {r.shape}")
    kind = state.config.proj_kind
    if kind == "none":
        return r
    if kind == "linear":
        w, b = state.projection[0]
        return ad.l2_normalize(ad.add(ad.matmul(r, w), b))
    (w1, b1), (w2, b2) = state.projection
    h = ad.relu(ad.add(ad.matmul(r, w1), b1))
    return ad.l2_normalize(ad.add(ad.matmul(h, w2), b2))


def logits(state: ModelState, r: Tensor) -> Tensor:
    """FC head outputs r @ W.T + b, one column per observed class (row order)."""
    if state.head_classes == 0:
        raise NoClassesError("FC head has no classes")
    if r.data.ndim != 2 or r.shape[1] != state.config.embed_dim:
        raise ConfigError(f"expected (n, {state.config.embed_dim}) embeddings, got {r.shape}")
    return ad.add(ad.matmul(r, state.head_w, transpose_b=True), state.head_b)


def expand_head(state: ModelState, new_classes):
    """Append one zero row per new class, in ascending class-id order.

    Existing rows are bit-unchanged, so logits for old classes are
    identical before and after.  Zero initialization avoids handing new
    classes random weight mass at arrival.
    """
    new_classes = sorted(int(c) for c in set(new_classes))
    dupes = [c for c in new_classes if c in state.head_class_ids]
    if dupes:
        raise ContractError(f"classes already in head: {dupes}")
    if not new_classes:
        return
    k = len(new_classes)
    d = state.config.embed_dim
    dtype = state.head_w.dtype
    new_w = np.concatenate([state.head_w.data, np.zeros((k, d), dtype=dtype)], axis=0)
    new_b = np.concatenate([state.head_b.data, np.zeros(k, dtype=dtype)])
    state.head_w = Tensor(new_w, requires_grad=True)
    state.head_b = Tensor(new_b, requires_grad=True)
    state.head_class_ids = state.head_class_ids + new_classes


def cast_state(state: ModelState, dtype) -> ModelState:
    """Copy the state with every parameter cast to dtype (for float64 checks)."""
    dtype = np.dtype(dtype)

    def cast_pair(pair):
        w, b = pair
        return (
            Tensor(w.data.astype(dtype), requires_grad=True),
            Tensor(b.data.astype(dtype), requires_grad=True),
        )

    return ModelState(
        config=state.config,
        encoder=[cast_pair(p) for p in state.encoder],
        projection=[cast_pair(p) for p in state.projection],
        head_w=Tensor(state.head_w.data.astype(dtype), requires_grad=True),
        head_b=Tensor(state.head_b.data.astype(dtype), requires_grad=True),
        head_class_ids=list(state.head_class_ids),
        step=state.step,
        rng_seed=state.rng_seed,
    )


def _config_text(state: ModelState) -> str:
    cfg = state.config
    lines = [
        f"input_dim = {cfg.input_dim}",
        "encoder_hidden = " + ",".join(str(h) for h in cfg.encoder_hidden),
        f"embed_dim = {cfg.embed_dim}",
        f"proj_hidden = {cfg.proj_hidden}",
        f"proj_dim = {cfg.proj_dim}",
        f"proj_kind = {cfg.proj_kind}",
        f"head_classes = {state.head_classes}",
        "head_class_ids = " + ",".join(str(c) for c in state.head_class_ids),
        f"step = {state.step}",
        f"rng_seed = {state.rng_seed}",
    ]
    return "\n".join(lines) + "\n"


def save_model(state: ModelState, path):
    """Write a CLMS1 checkpoint: magic, length-prefixed config text, then
    every parameter tensor as little-endian float32 in declaration order
    (encoder pairs, projection pairs, head weight, head bias)."""
    blob = _config_text(state).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(np.uint32(len(blob)).astype("<u4").tobytes())
        f.write(blob)
        for t in state.all_params():
            f.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())


def load_model(path) -> ModelState:
    """Read a CLMS1 checkpoint back into a float32 ModelState."""
    with open(path, "rb") as f:
        raw = f.read()
    buf = io.BytesIO(raw)
    magic = buf.read(5)
    if magic != CHECKPOINT_MAGIC:
        raise ConfigError(f"not a CLMS1 checkpoint (magic {magic!r})")
    (blob_len,) = np.frombuffer(buf.read(4), dtype="<u4")
    fields = {}
    for line in buf.read(int(blob_len)).decode("utf-8").splitlines():
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    hidden = tuple(int(h) for h in fields["encoder_hidden"].split(",") if h)
    config = ModelConfig(
        input_dim=int(fields["input_dim"]),
        encoder_hidden=hidden,
        embed_dim=int(fields["embed_dim"]),
        proj_hidden=int(fields["proj_hidden"]),
        proj_dim=int(fields["proj_dim"]),
        proj_kind=fields["proj_kind"],
        head_classes=0,
    )
    state = init_model(config, seed=int(fields["rng_seed"]))
    ids = [int(c) for c in fields["head_class_ids"].split(",") if c]
    if len(ids) != int(fields["head_classes"]):
        raise ConfigError("checkpoint head_class_ids inconsistent with head_classes")
    state.head_w = Tensor(
        np.zeros((len(ids), config.embed_dim), dtype=ad.TRAIN_DTYPE), requires_grad=True
    )
    state.head_b = Tensor(np.zeros(len(ids), dtype=ad.TRAIN_DTYPE), requires_grad=True)
    state.head_class_ids = ids
    state.step = int(fields["step"])

    def read_into(t: Tensor):
        n = int(np.prod(t.data.shape, dtype=np.int64))
        arr = np.frombuffer(buf.read(4 * n), dtype="<f4").reshape(t.data.shape)
        t.data = arr.astype(ad.TRAIN_DTYPE)

    for t in state.all_params():
        read_into(t)
    if buf.read(1):
        raise ConfigError("checkpoint has trailing bytes")
    return state
