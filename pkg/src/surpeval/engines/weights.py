"""Weight construction: seeded random initialization and the zero baseline."""

import numpy as np

from .config import EngineConfig


def _is_ln_gain(name: str) -> bool:
    parts = name.split(".")
    return name.endswith(".weight") and parts[-2] in ("ln", "ln1", "ln2", "ln_out")


def init_weights(config: EngineConfig, seed: int, scale: float = 0.1
                 ) -> dict[str, np.ndarray]:
    """Seeded float32 tensors for every name in the config's tensor spec."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in config.tensor_spec().items():
        if _is_ln_gain(name):
            arr = np.ones(shape)
        elif name.endswith(".bias") or name.endswith(".b1") or name.endswith(".b2"):
            arr = np.zeros(shape)
        elif name.endswith("A_log"):
            # per-channel decay spectrum, jittered across seeds
            n = shape[-1]
            arr = np.log(np.tile(np.arange(1, n + 1, dtype=float), (shape[0], 1))
                         * rng.uniform(0.5, 1.5, size=shape))
        elif name.split(".")[-1].startswith("mix_"):
            arr = rng.uniform(0.0, 1.0, size=shape)
        elif name.endswith("time_decay") or name.endswith("time_first"):
            arr = rng.normal(0.0, 1.0, size=shape)
        else:
            arr = rng.normal(0.0, scale, size=shape)
        tensors[name] = arr.astype(np.float32)
    return tensors


def zero_weights(config: EngineConfig) -> dict[str, np.ndarray]:
    """All projections zero (layer-norm gains stay 1): the uniform engine."""
    return {name: (np.ones if _is_ln_gain(name) else np.zeros)(shape).astype(np.float32)
            for name, shape in config.tensor_spec().items()}
