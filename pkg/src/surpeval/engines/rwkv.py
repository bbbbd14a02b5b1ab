"""Recurrent engine with token-shift mixing and per-channel exponential decay.

Each layer pairs a time-mix block (receptance/key/value attention over an
exponentially decayed running summary, with a separate bonus for the
current token) and a squared-ReLU channel-mix block. The running
summary is kept in log-stabilized form (numerator, denominator, running
max), so the state size is fixed at five d_model vectors per layer.
"""

import numpy as np

from .base import Engine, RecurrentState, layer_norm, log_softmax, sigmoid


class RwkvEngine(Engine):
    family = "rwkv"

    def initial_state(self) -> RecurrentState:
        cfg = self.config
        shift = np.zeros((cfg.n_layers, 2, cfg.d_model))    # att / ffn token shift
        aa = np.zeros((cfg.n_layers, cfg.d_model))
        bb = np.zeros((cfg.n_layers, cfg.d_model))
        pp = np.full((cfg.n_layers, cfg.d_model), -np.inf)
        return RecurrentState("rwkv", 0, (shift, aa, bb, pp))

    def _time_mix(self, h, h_prev, aa, bb, pp, layer):
        w = self.w
        pre = f"layers.{layer}.att."
        xr = w[pre + "mix_r"] * h + (1 - w[pre + "mix_r"]) * h_prev
        xk = w[pre + "mix_k"] * h + (1 - w[pre + "mix_k"]) * h_prev
        xv = w[pre + "mix_v"] * h + (1 - w[pre + "mix_v"]) * h_prev
        r = sigmoid(w[pre + "wr"] @ xr)
        k = w[pre + "wk"] @ xk
        v = w[pre + "wv"] @ xv
        # output uses the current token with the one-step bonus u
        u = w[pre + "time_first"]
        ww = u + k
        qq = np.maximum(pp, ww)
        e1 = np.exp(pp - qq)
        e2 = np.exp(ww - qq)
        wkv = (e1 * aa + e2 * v) / (e1 * bb + e2)
        # state update applies the per-channel decay
        decay = -np.exp(w[pre + "time_decay"])
        ww = pp + decay
        qq2 = np.maximum(ww, k)
        e1 = np.exp(ww - qq2)
        e2 = np.exp(k - qq2)
        return w[pre + "wo"] @ (r * wkv), e1 * aa + e2 * v, e1 * bb + e2, qq2

    def _channel_mix(self, h, h_prev, layer):
        w = self.w
        pre = f"layers.{layer}.ffn."
        xr = w[pre + "mix_r"] * h + (1 - w[pre + "mix_r"]) * h_prev
        xk = w[pre + "mix_k"] * h + (1 - w[pre + "mix_k"]) * h_prev
        r = sigmoid(w[pre + "wr"] @ xr)
        k = np.maximum(w[pre + "wk"] @ xk, 0.0) ** 2
        return r * (w[pre + "wv"] @ k)

    def step(self, state: RecurrentState, token):
        (tid,) = self._check_ids([token])
        cfg = self.config
        shift, aa, bb, pp = (a.copy() for a in state.arrays)
        x = self.w["embedding"][tid].copy()
        for layer in range(cfg.n_layers):
            h = layer_norm(x, self.w[f"layers.{layer}.ln1.weight"],
                           self.w[f"layers.{layer}.ln1.bias"])
            out, aa[layer], bb[layer], pp[layer] = self._time_mix(
                h, shift[layer, 0], aa[layer], bb[layer], pp[layer], layer)
            shift[layer, 0] = h
            x = x + out
            h = layer_norm(x, self.w[f"layers.{layer}.ln2.weight"],
                           self.w[f"layers.{layer}.ln2.bias"])
            x = x + self._channel_mix(h, shift[layer, 1], layer)
            shift[layer, 1] = h
        x = layer_norm(x, self.w["ln_out.weight"], self.w["ln_out.bias"])
        row = log_softmax(self.w["head"] @ x)
        new_state = RecurrentState("rwkv", state.step_index + 1, (shift, aa, bb, pp))
        return new_state, row

    def prefix_rows(self, ids) -> np.ndarray:
        """Full-sequence evaluation: vectorized projections, scalar wkv scan."""
        seq = [self.bos_id] + self._check_ids(ids)
        cfg, w = self.config, self.w
        T = len(seq)
        x = w["embedding"][seq]
        for layer in range(cfg.n_layers):
            pre = f"layers.{layer}.att."
            h = layer_norm(x, w[f"layers.{layer}.ln1.weight"],
                           w[f"layers.{layer}.ln1.bias"])
            hs = np.vstack([np.zeros(cfg.d_model), h[:-1]])
            r = sigmoid((w[pre + "mix_r"] * h + (1 - w[pre + "mix_r"]) * hs)
                        @ w[pre + "wr"].T)
            k = (w[pre + "mix_k"] * h + (1 - w[pre + "mix_k"]) * hs) @ w[pre + "wk"].T
            v = (w[pre + "mix_v"] * h + (1 - w[pre + "mix_v"]) * hs) @ w[pre + "wv"].T
            u = w[pre + "time_first"]
            decay = -np.exp(w[pre + "time_decay"])
            aa = np.zeros(cfg.d_model)
            bb = np.zeros(cfg.d_model)
            pp = np.full(cfg.d_model, -np.inf)
            wkv = np.empty((T, cfg.d_model))
            for t in range(T):
                ww = u + k[t]
                qq = np.maximum(pp, ww)
                e1, e2 = np.exp(pp - qq), np.exp(ww - qq)
                wkv[t] = (e1 * aa + e2 * v[t]) / (e1 * bb + e2)
                ww = pp + decay
                qq = np.maximum(ww, k[t])
                e1, e2 = np.exp(ww - qq), np.exp(k[t] - qq)
                aa, bb, pp = e1 * aa + e2 * v[t], e1 * bb + e2, qq
            x = x + (r * wkv) @ w[pre + "wo"].T
            pre = f"layers.{layer}.ffn."
            h = layer_norm(x, w[f"layers.{layer}.ln2.weight"],
                           w[f"layers.{layer}.ln2.bias"])
            hs = np.vstack([np.zeros(cfg.d_model), h[:-1]])
            r = sigmoid((w[pre + "mix_r"] * h + (1 - w[pre + "mix_r"]) * hs)
                        @ w[pre + "wr"].T)
            kk = np.maximum((w[pre + "mix_k"] * h + (1 - w[pre + "mix_k"]) * hs)
                            @ w[pre + "wk"].T, 0.0) ** 2
            x = x + r * (kk @ w[pre + "wv"].T)
        x = layer_norm(x, w["ln_out.weight"], w["ln_out.bias"])
        return log_softmax(x @ w["head"].T)
