"""Shared engine machinery: numeric helpers, states, and the Engine base.

Weights are stored as float32 in archives; all computation runs in
float64 so that normalization and step-versus-full agreement hold to
well inside the 1e-6 / 1e-5 tolerances. Engines are immutable after
construction and safe to share across threads; a RecurrentState belongs
to exactly one in-flight sequence.
"""

import numpy as np

from .config import EngineConfig


class EngineError(ValueError):
    pass


class TokenIdError(EngineError):
    pass


class FamilyError(EngineError):
    pass


def layer_norm(x, w, b, eps=1e-5):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * w + b


def log_softmax(logits):
    m = logits.max(axis=-1, keepdims=True)
    return logits - m - np.log(np.exp(logits - m).sum(axis=-1, keepdims=True))


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def softplus(x):
    return np.logaddexp(0.0, x)


def silu(x):
    return x * sigmoid(x)


class RecurrentState:
    """Fixed-size per-layer state of a recurrent engine.

    The serialized byte size depends only on the engine configuration,
    never on how many tokens have been consumed.
    """

    def __init__(self, family: str, step_index: int, arrays: tuple[np.ndarray, ...]):
        self.family = family
        self.step_index = step_index
        self.arrays = arrays

    def to_bytes(self) -> bytes:
        head = self.family.encode("ascii").ljust(16, b"\0")
        head += self.step_index.to_bytes(8, "little")
        return head + b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes()
                               for a in self.arrays)

    @property
    def nbytes(self) -> int:
        return len(self.to_bytes())


class Engine:
    """Next-token log-probability interface shared by all three families.

    ``prefix_rows(ids)`` returns len(ids)+1 rows; row ``t`` is the
    natural-log distribution of the token at position ``t`` given BOS and
    ``ids[:t]``. BOS is the final vocabulary index and is prepended
    internally, so the empty prefix is well defined.
    """

    family = ""

    def __init__(self, config: EngineConfig, tensors: dict[str, np.ndarray]):
        if config.family != self.family:
            raise FamilyError(
                f"config family {config.family!r} does not match {self.family!r}")
        spec = config.tensor_spec()
        missing = [n for n in spec if n not in tensors]
        if missing:
            raise EngineError(f"missing tensor: {missing[0]}")
        extra = [n for n in tensors if n not in spec]
        if extra:
            raise EngineError(f"unexpected tensor: {extra[0]}")
        for name, shape in spec.items():
            if tuple(tensors[name].shape) != shape:
                raise EngineError(
                    f"shape mismatch for tensor {name}: "
                    f"expected {shape}, got {tuple(tensors[name].shape)}")
        self.config = config
        self.w = {n: np.asarray(tensors[n], dtype=np.float64) for n in spec}
        self.param_count = sum(t.size for t in self.w.values())

    @property
    def bos_id(self) -> int:
        return self.config.vocab_size - 1

    def _check_ids(self, ids) -> list[int]:
        out = []
        for tok in ids:
            tid = int(getattr(tok, "id", tok))
            if not 0 <= tid < self.config.vocab_size:
                raise TokenIdError(
                    f"token id {tid} out of range [0, {self.config.vocab_size})")
            out.append(tid)
        return out

    def prefix_rows(self, ids) -> np.ndarray:
        """(len(ids)+1, vocab_size) log-probability rows; see class docstring."""
        raise NotImplementedError

    def next_token_logprobs(self, prefix) -> np.ndarray:
        return self.prefix_rows(prefix)[-1]

    # recurrent interface; the transformer overrides with a growing KV cache
    def initial_state(self) -> RecurrentState:
        raise FamilyError(f"{self.family} engines do not expose a fixed-size state")

    def step(self, state: RecurrentState, token) -> tuple[RecurrentState, np.ndarray]:
        raise FamilyError(f"{self.family} engines do not support stepwise evaluation")


def step_recurrent(engine: Engine, state: RecurrentState, token):
    """Advance a recurrent engine one token; transformers are rejected."""
    if engine.family not in ("rwkv", "mamba"):
        raise FamilyError(
            f"step_recurrent requires an rwkv or mamba engine, got {engine.family}")
    return engine.step(state, token)


def next_token_logprobs(engine: Engine, prefix) -> np.ndarray:
    return engine.next_token_logprobs(prefix)
