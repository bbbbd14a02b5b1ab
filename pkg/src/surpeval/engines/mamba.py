"""Recurrent engine built on a diagonal selective state-space scan.

Per layer: the input is projected to an expanded stream and a gate; the
step size, input matrix B and readout C are all computed from the
current input (the selection mechanism), the per-channel diagonal state
decays by exp(dt * A), and the gated output is projected back down. The
state is one (d_inner, d_state) matrix per layer, fixed in size.
"""

import numpy as np

from .base import Engine, RecurrentState, layer_norm, log_softmax, silu, softplus


class MambaEngine(Engine):
    family = "mamba"

    def initial_state(self) -> RecurrentState:
        cfg = self.config
        h = np.zeros((cfg.n_layers, cfg.d_inner, cfg.d_state))
        return RecurrentState("mamba", 0, (h,))

    def _selection(self, xa, layer):
        """dt, B, C from the current input; xa may be (d_inner,) or (T, d_inner)."""
        cfg, w = self.config, self.w
        pre = f"layers.{layer}."
        dbc = xa @ w[pre + "x_proj"].T
        r, n = cfg.dt_rank, cfg.d_state
        dt_raw = dbc[..., :r]
        B = dbc[..., r:r + n]
        C = dbc[..., r + n:]
        dt = softplus(dt_raw @ w[pre + "dt_proj.weight"].T + w[pre + "dt_proj.bias"])
        return dt, B, C

    def step(self, state: RecurrentState, token):
        (tid,) = self._check_ids([token])
        cfg, w = self.config, self.w
        (hstate,) = state.arrays
        hstate = hstate.copy()
        x = w["embedding"][tid].copy()
        for layer in range(cfg.n_layers):
            pre = f"layers.{layer}."
            hin = layer_norm(x, w[pre + "ln.weight"], w[pre + "ln.bias"])
            xz = hin @ w[pre + "in_proj"].T
            xa, z = silu(xz[:cfg.d_inner]), xz[cfg.d_inner:]
            dt, B, C = self._selection(xa, layer)
            A = -np.exp(w[pre + "A_log"])
            hstate[layer] = (np.exp(dt[:, None] * A) * hstate[layer]
                             + (dt * xa)[:, None] * B[None, :])
            y = hstate[layer] @ C + w[pre + "D"] * xa
            x = x + (y * silu(z)) @ w[pre + "out_proj"].T
        x = layer_norm(x, w["ln_out.weight"], w["ln_out.bias"])
        row = log_softmax(w["head"] @ x)
        return RecurrentState("mamba", state.step_index + 1, (hstate,)), row

    def prefix_rows(self, ids) -> np.ndarray:
        """Full-sequence evaluation: vectorized projections, sequential scan."""
        seq = [self.bos_id] + self._check_ids(ids)
        cfg, w = self.config, self.w
        T = len(seq)
        x = w["embedding"][seq]
        for layer in range(cfg.n_layers):
            pre = f"layers.{layer}."
            hin = layer_norm(x, w[pre + "ln.weight"], w[pre + "ln.bias"])
            xz = hin @ w[pre + "in_proj"].T
            xa, z = silu(xz[:, :cfg.d_inner]), xz[:, cfg.d_inner:]
            dt, B, C = self._selection(xa, layer)
            A = -np.exp(w[pre + "A_log"])
            dA = np.exp(dt[:, :, None] * A[None, :, :])        # (T, di, n)
            dBx = (dt * xa)[:, :, None] * B[:, None, :]        # (T, di, n)
            h = np.zeros((cfg.d_inner, cfg.d_state))
            y = np.empty((T, cfg.d_inner))
            for t in range(T):
                h = dA[t] * h + dBx[t]
                y[t] = h @ C[t]
            y = y + w[pre + "D"] * xa
            x = x + (y * silu(z)) @ w[pre + "out_proj"].T
        x = layer_norm(x, w["ln_out.weight"], w["ln_out.bias"])
        return log_softmax(x @ w["head"].T)
