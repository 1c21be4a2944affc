"""Fixed-capacity replay buffer with reservoir update and random retrieval.

The buffer stores raw inputs, never embeddings, so stored examples can be
re-encoded by whatever the current encoder is.  Update is one reservoir
step per incoming item: while the buffer has room the item is appended;
once full, item number t (1-based over the whole stream) replaces a
uniformly chosen slot with probability capacity/t and is dropped
otherwise.  Every stream item therefore ends up in the buffer with
probability min(1, capacity/t).
"""

import numpy as np

from .errors import ConfigError, ShapeError

UPDATE_STRATEGIES = ("reservoir",)
RETRIEVE_STRATEGIES = ("random",)


class MemoryBuffer:
    """Replay memory of at most ``capacity`` (input, label) pairs."""

    def __init__(
        self,
        capacity: int,
        rng: np.random.Generator,
        update_strategy: str = "reservoir",
        retrieve_strategy: str = "random",
    ):
        if capacity < 0:
            raise ConfigError(f"capacity must be >= 0, got {capacity}")
        if update_strategy not in UPDATE_STRATEGIES:
            raise ConfigError(f"unknown update strategy {update_strategy!r}")
        if retrieve_strategy not in RETRIEVE_STRATEGIES:
            raise ConfigError(f"unknown retrieve strategy {retrieve_strategy!r}")
        self.capacity = int(capacity)
        self.rng = rng
        self.update_strategy = update_strategy
        self.retrieve_strategy = retrieve_strategy
        self.n_seen = 0
        self._size = 0
        self._inputs = None  # allocated lazily once the input width is known
        self._labels = None

    def __len__(self) -> int:
        return self._size

    def _ensure_storage(self, flat_dim: int):
        if self._inputs is None:
            self._inputs = np.empty((self.capacity, flat_dim), dtype=np.float32)
            self._labels = np.empty(self.capacity, dtype=np.int64)
        elif self._inputs.shape[1] != flat_dim:
            raise ShapeError(
                f"buffer holds width-{self._inputs.shape[1]} inputs, got {flat_dim}"
            )

    def update(self, inputs, labels):
        """Run one reservoir step per item, in stream order."""
        inputs = np.asarray(inputs, dtype=np.float32)
        labels = np.asarray(labels, dtype=np.int64)
        if inputs.ndim != 2:
            raise ShapeError(f"inputs must be (n, flat_dim), got shape {inputs.shape}")
        if labels.shape != (inputs.shape[0],):
            raise ShapeError(
                f"expected {inputs.shape[0]} labels, got shape {labels.shape}"
            )
        if self.capacity > 0:
            self._ensure_storage(inputs.shape[1])
        for x, y in zip(inputs, labels):
            self.n_seen += 1
            if self._size < self.capacity:
                self._inputs[self._size] = x
                self._labels[self._size] = y
                self._size += 1
            else:
                j = int(self.rng.integers(0, self.n_seen))
                if j < self.capacity:
                    self._inputs[j] = x
                    self._labels[j] = y

    def retrieve(self, batch_size: int):
        """Sample min(batch_size, len) stored pairs uniformly without replacement.

        An empty buffer returns empty arrays and leaves the generator
        untouched.
        """
        if batch_size < 0:
            raise ConfigError(f"batch_size must be >= 0, got {batch_size}")
        if self._size == 0 or batch_size == 0:
            width = 0 if self._inputs is None else self._inputs.shape[1]
            return (
                np.empty((0, width), dtype=np.float32),
                np.empty(0, dtype=np.int64),
            )
        k = min(batch_size, self._size)
        idx = self.rng.choice(self._size, size=k, replace=False)
        return self._inputs[idx].copy(), self._labels[idx].copy()

    def snapshot(self):
        """Copy out the current contents without touching the generator."""
        if self._size == 0:
            width = 0 if self._inputs is None else self._inputs.shape[1]
            return (
                np.empty((0, width), dtype=np.float32),
                np.empty(0, dtype=np.int64),
            )
        return self._inputs[: self._size].copy(), self._labels[: self._size].copy()
