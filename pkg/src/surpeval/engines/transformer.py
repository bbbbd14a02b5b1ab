"""Pre-norm causal transformer with rotary position encoding.

One attention block and one 4x GELU MLP per layer. The per-step cache
grows with the sequence (keys and values for every past position); that
growth is the structural contrast with the fixed-size recurrent states.
"""

import numpy as np
from scipy.special import erf

from .base import Engine, layer_norm, log_softmax


def gelu(x):
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def _rope_tables(positions, head_dim):
    inv_freq = 10000.0 ** (-np.arange(0, head_dim, 2) / head_dim)
    ang = np.asarray(positions, dtype=np.float64)[:, None] * inv_freq[None, :]
    return np.cos(ang), np.sin(ang)


def _apply_rope(x, cos, sin):
    # x: (T, H, head_dim); rotate interleaved even/odd channel pairs
    x1, x2 = x[..., 0::2], x[..., 1::2]
    out = np.empty_like(x)
    out[..., 0::2] = x1 * cos[:, None, :] - x2 * sin[:, None, :]
    out[..., 1::2] = x1 * sin[:, None, :] + x2 * cos[:, None, :]
    return out


class KVCache:
    """Growing per-layer attention cache for incremental evaluation."""

    def __init__(self, keys, values, length):
        self.keys = keys        # list of (t, H, hd) arrays
        self.values = values
        self.length = length

    @classmethod
    def empty(cls, n_layers):
        return cls([None] * n_layers, [None] * n_layers, 0)

    @property
    def nbytes(self) -> int:
        return sum(k.nbytes + v.nbytes for k, v in zip(self.keys, self.values)
                   if k is not None)


class TransformerEngine(Engine):
    family = "transformer"

    def _attn_qkv(self, h, layer):
        cfg = self.config
        hd = cfg.d_model // cfg.n_heads
        w = self.w
        q = (h @ w[f"layers.{layer}.attn.wq"].T).reshape(-1, cfg.n_heads, hd)
        k = (h @ w[f"layers.{layer}.attn.wk"].T).reshape(-1, cfg.n_heads, hd)
        v = (h @ w[f"layers.{layer}.attn.wv"].T).reshape(-1, cfg.n_heads, hd)
        return q, k, v

    def _mlp(self, x, layer):
        w = self.w
        h = layer_norm(x, w[f"layers.{layer}.ln2.weight"], w[f"layers.{layer}.ln2.bias"])
        inner = gelu(h @ w[f"layers.{layer}.mlp.w1"].T + w[f"layers.{layer}.mlp.b1"])
        return inner @ w[f"layers.{layer}.mlp.w2"].T + w[f"layers.{layer}.mlp.b2"]

    def _head(self, x):
        x = layer_norm(x, self.w["ln_out.weight"], self.w["ln_out.bias"])
        return log_softmax(x @ self.w["head"].T)

    def prefix_rows(self, ids) -> np.ndarray:
        seq = [self.bos_id] + self._check_ids(ids)
        cfg = self.config
        hd = cfg.d_model // cfg.n_heads
        T = len(seq)
        cos, sin = _rope_tables(np.arange(T), hd)
        x = self.w["embedding"][seq]
        mask = np.triu(np.full((T, T), -np.inf), k=1)
        for layer in range(cfg.n_layers):
            h = layer_norm(x, self.w[f"layers.{layer}.ln1.weight"],
                           self.w[f"layers.{layer}.ln1.bias"])
            q, k, v = self._attn_qkv(h, layer)
            q = _apply_rope(q, cos, sin)
            k = _apply_rope(k, cos, sin)
            scores = np.einsum("thd,shd->hts", q, k) / np.sqrt(hd)
            scores = scores + mask[None, :, :]
            scores -= scores.max(axis=-1, keepdims=True)
            att = np.exp(scores)
            att /= att.sum(axis=-1, keepdims=True)
            ctx = np.einsum("hts,shd->thd", att, v).reshape(T, cfg.d_model)
            x = x + ctx @ self.w[f"layers.{layer}.attn.wo"].T
            x = x + self._mlp(x, layer)
        return self._head(x)

    def empty_cache(self) -> KVCache:
        return KVCache.empty(self.config.n_layers)

    def step_cached(self, cache: KVCache, token) -> tuple[KVCache, np.ndarray]:
        """Incremental forward for one token; the returned cache has grown."""
        (tid,) = self._check_ids([token])
        cfg = self.config
        hd = cfg.d_model // cfg.n_heads
        pos = cache.length
        cos, sin = _rope_tables([pos], hd)
        x = self.w["embedding"][tid][None, :]
        new_keys, new_values = [], []
        for layer in range(cfg.n_layers):
            h = layer_norm(x, self.w[f"layers.{layer}.ln1.weight"],
                           self.w[f"layers.{layer}.ln1.bias"])
            q, k, v = self._attn_qkv(h, layer)
            q = _apply_rope(q, cos, sin)
            k = _apply_rope(k, cos, sin)
            if cache.keys[layer] is None:
                keys, values = k, v
            else:
                keys = np.concatenate([cache.keys[layer], k])
                values = np.concatenate([cache.values[layer], v])
            new_keys.append(keys)
            new_values.append(values)
            scores = np.einsum("hd,shd->hs", q[0], keys) / np.sqrt(hd)
            scores -= scores.max(axis=-1, keepdims=True)
            att = np.exp(scores)
            att /= att.sum(axis=-1, keepdims=True)
            ctx = np.einsum("hs,shd->hd", att, values).reshape(1, cfg.d_model)
            x = x + ctx @ self.w[f"layers.{layer}.attn.wo"].T
            x = x + self._mlp(x, layer)
        return KVCache(new_keys, new_values, pos + 1), self._head(x)[0]
