"""Engine configurations and the tensor sets they imply."""

from dataclasses import dataclass, field

import numpy as np

FAMILIES = ("transformer", "rwkv", "mamba")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EngineConfig:
    """Dimensions of one engine; the tensor set and parameter count follow.

    family_params carries the family-specific sizes: ``n_heads`` for the
    transformer, ``d_state`` for mamba, ``d_ffn`` (channel-mix width) for
    rwkv. Missing entries get the conventional defaults relative to
    d_model (4 heads, state 16, ffn 4*d_model).
    """

    family: str
    vocab_size: int
    d_model: int
    n_layers: int
    family_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        if self.vocab_size < 2:
            raise ConfigError("vocab_size must be >= 2")
        if self.d_model <= 0 or self.n_layers <= 0:
            raise ConfigError("d_model and n_layers must be positive")
        if self.family == "transformer":
            h = self.n_heads
            if h <= 0 or self.d_model % h != 0:
                raise ConfigError("d_model must be a positive multiple of n_heads")
            if (self.d_model // h) % 2 != 0:
                raise ConfigError("head dimension must be even (rotary encoding)")
        if self.family == "mamba" and self.d_state <= 0:
            raise ConfigError("d_state must be positive")
        if self.family == "rwkv" and self.d_ffn <= 0:
            raise ConfigError("d_ffn must be positive")

    @property
    def n_heads(self) -> int:
        return int(self.family_params.get("n_heads", 4))

    @property
    def d_state(self) -> int:
        return int(self.family_params.get("d_state", 16))

    @property
    def d_ffn(self) -> int:
        return int(self.family_params.get("d_ffn", 4 * self.d_model))

    @property
    def d_inner(self) -> int:
        # mamba expansion factor fixed at 2
        return 2 * self.d_model

    @property
    def dt_rank(self) -> int:
        return max(1, self.d_model // 16)

    def tensor_spec(self) -> dict[str, tuple[int, ...]]:
        """Ordered map of required tensor names to shapes."""
        v, d, nl = self.vocab_size, self.d_model, self.n_layers
        spec: dict[str, tuple[int, ...]] = {"embedding": (v, d)}
        for i in range(nl):
            pre = f"layers.{i}."
            if self.family == "transformer":
                f = 4 * d
                spec.update({
                    pre + "ln1.weight": (d,), pre + "ln1.bias": (d,),
                    pre + "attn.wq": (d, d), pre + "attn.wk": (d, d),
                    pre + "attn.wv": (d, d), pre + "attn.wo": (d, d),
                    pre + "ln2.weight": (d,), pre + "ln2.bias": (d,),
                    pre + "mlp.w1": (f, d), pre + "mlp.b1": (f,),
                    pre + "mlp.w2": (d, f), pre + "mlp.b2": (d,),
                })
            elif self.family == "rwkv":
                f = self.d_ffn
                spec.update({
                    pre + "ln1.weight": (d,), pre + "ln1.bias": (d,),
                    pre + "att.time_decay": (d,), pre + "att.time_first": (d,),
                    pre + "att.mix_r": (d,), pre + "att.mix_k": (d,),
                    pre + "att.mix_v": (d,),
                    pre + "att.wr": (d, d), pre + "att.wk": (d, d),
                    pre + "att.wv": (d, d), pre + "att.wo": (d, d),
                    pre + "ln2.weight": (d,), pre + "ln2.bias": (d,),
                    pre + "ffn.mix_r": (d,), pre + "ffn.mix_k": (d,),
                    pre + "ffn.wr": (d, d), pre + "ffn.wk": (f, d),
                    pre + "ffn.wv": (d, f),
                })
            else:  # mamba
                di, n, r = self.d_inner, self.d_state, self.dt_rank
                spec.update({
                    pre + "ln.weight": (d,), pre + "ln.bias": (d,),
                    pre + "in_proj": (2 * di, d),
                    pre + "x_proj": (r + 2 * n, di),
                    pre + "dt_proj.weight": (di, r), pre + "dt_proj.bias": (di,),
                    pre + "A_log": (di, n), pre + "D": (di,),
                    pre + "out_proj": (d, di),
                })
        spec.update({
            "ln_out.weight": (d,), "ln_out.bias": (d,),
            "head": (v, d),
        })
        return spec

    @property
    def param_count(self) -> int:
        return sum(int(np.prod(shape)) for shape in self.tensor_spec().values())
