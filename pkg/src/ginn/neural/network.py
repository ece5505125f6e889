"""Stacked LSTM regressor with a linear/batch-norm/ReLU head, in numpy.

Layout for an input batch ``X`` of shape ``(B, T)``::

    LSTM(1 -> H) -> dropout -> ... -> LSTM(H -> H)      (last hidden state)
    -> Linear(H -> K) -> BatchNorm(K) -> ReLU -> Linear(K -> 1)

Gate order inside the packed ``4H`` axis is input, forget, cell, output.
Dropout sits between LSTM layers only. Every train-mode ``forward`` records
what ``backward`` needs; eval-mode ``forward`` touches no state.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class NetworkConfig:
    num_lstm_layers: int = 3
    hidden_width: int = 256
    dropout_rate: float = 0.2
    input_window: int = 90
    head_width: int | None = None  # defaults to hidden_width
    forget_bias: float = 1.0
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5

    def __post_init__(self):
        if self.num_lstm_layers < 1 or self.hidden_width < 1 or self.input_window < 1:
            raise ValueError("layer count, widths and input window must be >= 1")
        if self.head_width is not None and self.head_width < 1:
            raise ValueError("head_width must be >= 1")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")

    @property
    def head_units(self) -> int:
        return self.head_width or self.hidden_width

    def to_dict(self) -> dict:
        return asdict(self)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _xavier(rng, fan_in, fan_out, shape):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class LstmNetwork:
    """Parameters live in ``params`` (name -> array), batch-norm running
    statistics in ``buffers``."""

    def __init__(self, config: NetworkConfig, seed: int | np.random.Generator = 0):
        self.config = config
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        H, K = config.hidden_width, config.head_units
        self.params: dict[str, np.ndarray] = {}
        for layer in range(config.num_lstm_layers):
            n_in = 1 if layer == 0 else H
            Wx = np.concatenate([_xavier(rng, n_in, H, (n_in, H)) for _ in range(4)], axis=1)
            Wh = np.concatenate([_xavier(rng, H, H, (H, H)) for _ in range(4)], axis=1)
            b = np.zeros(4 * H)
            b[H:2 * H] = config.forget_bias
            self.params[f"lstm{layer}.Wx"] = Wx
            self.params[f"lstm{layer}.Wh"] = Wh
            self.params[f"lstm{layer}.b"] = b
        self.params["head.W1"] = _xavier(rng, H, K, (H, K))
        self.params["head.b1"] = np.zeros(K)
        self.params["bn.gamma"] = np.ones(K)
        self.params["bn.beta"] = np.zeros(K)
        self.params["head.W2"] = _xavier(rng, K, 1, (K, 1))
        self.params["head.b2"] = np.zeros(1)
        self.buffers = {"bn.running_mean": np.zeros(K), "bn.running_var": np.ones(K)}
        self.training = False
        self._cache = None

    def train(self) -> "LstmNetwork":
        self.training = True
        return self

    def eval(self) -> "LstmNetwork":
        self.training = False
        self._cache = None
        return self

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def _check_input(self, x):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.config.input_window:
            raise ValueError(f"expected windows of length {self.config.input_window}, got shape {np.shape(x)}")
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite input window")
        return x, single

    def forward(self, x, rng: np.random.Generator | None = None, masks=None):
        """Predict from one window ``(T,)`` -> float or a batch ``(B, T)`` -> ``(B,)``.

        In train mode dropout masks are drawn from ``rng`` unless explicit
        ``masks`` (one ``(B, T, H)`` array per gap between layers) are given.
        """
        x, single = self._check_input(x)
        cfg = self.config
        train = self.training
        B, T = x.shape
        H = cfg.hidden_width
        # time-major (T, B, features) so every step slice is contiguous
        seq = np.ascontiguousarray(x.T)[:, :, None]
        layers = []
        drop = []
        for layer in range(cfg.num_lstm_layers):
            Wx = self.params[f"lstm{layer}.Wx"]
            Wh = self.params[f"lstm{layer}.Wh"]
            b = self.params[f"lstm{layer}.b"]
            xproj = seq @ Wx + b  # (T, B, 4H)
            h = np.zeros((B, H))
            c = np.zeros((B, H))
            hs = np.empty((T, B, H))
            if train:
                gates = np.empty((T, B, 4 * H))
                cs = np.empty((T + 1, B, H))
                cs[0] = 0.0
            for t in range(T):
                z = xproj[t] + h @ Wh
                act = _sigmoid(z)
                act[:, 2 * H:3 * H] = np.tanh(z[:, 2 * H:3 * H])
                c = act[:, H:2 * H] * c + act[:, :H] * act[:, 2 * H:3 * H]
                h = act[:, 3 * H:] * np.tanh(c)
                hs[t] = h
                if train:
                    gates[t] = act
                    cs[t + 1] = c
            if train:
                layers.append((seq, gates, cs, hs))
            seq = hs
            if layer < cfg.num_lstm_layers - 1 and train and cfg.dropout_rate > 0:
                if masks is not None:
                    # caller masks are batch-major (B, T, H)
                    mask = np.ascontiguousarray(np.asarray(masks[layer], dtype=np.float64).transpose(1, 0, 2))
                else:
                    if rng is None:
                        raise ValueError("train-mode forward with dropout needs an rng")
                    keep = rng.random((T, B, H)) >= cfg.dropout_rate
                    mask = keep / (1.0 - cfg.dropout_rate)
                drop.append(mask)
                seq = seq * mask

        h_last = seq[-1]
        p = self.params
        a1 = h_last @ p["head.W1"] + p["head.b1"]
        if train:
            if B < 2:
                raise ValueError("train-mode batch norm needs a batch of at least 2")
            mu = a1.mean(axis=0)
            var = a1.var(axis=0)
            inv_std = 1.0 / np.sqrt(var + cfg.bn_eps)
            xhat = (a1 - mu) * inv_std
            m = cfg.bn_momentum
            self.buffers["bn.running_mean"] = (1 - m) * self.buffers["bn.running_mean"] + m * mu
            self.buffers["bn.running_var"] = (1 - m) * self.buffers["bn.running_var"] + m * var * B / (B - 1)
        else:
            inv_std = 1.0 / np.sqrt(self.buffers["bn.running_var"] + cfg.bn_eps)
            xhat = (a1 - self.buffers["bn.running_mean"]) * inv_std
        bn = p["bn.gamma"] * xhat + p["bn.beta"]
        r = np.maximum(bn, 0.0)
        out = (r @ p["head.W2"])[:, 0] + p["head.b2"][0]
        if train:
            self._cache = dict(layers=layers, drop=drop, h_last=h_last, xhat=xhat,
                               inv_std=inv_std, bn=bn, r=r, batch=B)
        return float(out[0]) if single else out

    __call__ = forward

    def backward(self, upstream) -> dict[str, np.ndarray]:
        """Gradients of ``sum(upstream * output)`` for the last train-mode forward."""
        cache = self._cache
        if cache is None:
            raise RuntimeError("backward called without a recorded train-mode forward")
        cfg = self.config
        p = self.params
        B = cache["batch"]
        H = cfg.hidden_width
        dout = np.broadcast_to(np.asarray(upstream, dtype=np.float64), (B,)).reshape(B, 1)
        grads: dict[str, np.ndarray] = {}

        r, bn, xhat = cache["r"], cache["bn"], cache["xhat"]
        grads["head.W2"] = r.T @ dout
        grads["head.b2"] = dout.sum(axis=0)
        dbn = (dout @ p["head.W2"].T) * (bn > 0)
        grads["bn.gamma"] = (dbn * xhat).sum(axis=0)
        grads["bn.beta"] = dbn.sum(axis=0)
        dxhat = dbn * p["bn.gamma"]
        da1 = cache["inv_std"] / B * (B * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
        grads["head.W1"] = cache["h_last"].T @ da1
        grads["head.b1"] = da1.sum(axis=0)
        dh_last = da1 @ p["head.W1"].T

        T = cache["layers"][0][1].shape[0]
        dseq = np.zeros((T, B, H))
        dseq[-1] = dh_last
        for layer in reversed(range(cfg.num_lstm_layers)):
            if layer < cfg.num_lstm_layers - 1 and cache["drop"]:
                dseq = dseq * cache["drop"][layer]
            seq_in, gates, cs, hs = cache["layers"][layer]
            WhT = np.ascontiguousarray(p[f"lstm{layer}.Wh"].T)
            dZ = np.empty((T, B, 4 * H))
            dh_next = np.zeros((B, H))
            dc_next = np.zeros((B, H))
            for t in range(T - 1, -1, -1):
                act = gates[t]
                i, f, g, o = act[:, :H], act[:, H:2 * H], act[:, 2 * H:3 * H], act[:, 3 * H:]
                tc = np.tanh(cs[t + 1])
                dh = dseq[t] + dh_next
                dc = dh * o * (1.0 - tc * tc) + dc_next
                dz = dZ[t]
                dz[:, :H] = dc * g
                dz[:, H:2 * H] = dc * cs[t]
                dz[:, 2 * H:3 * H] = dc * i
                dz[:, 3 * H:] = dh * tc
                # sigmoid' = s(1-s) on i, f, o; tanh' = 1-g^2 on the cell candidate
                deriv = act * (1.0 - act)
                deriv[:, 2 * H:3 * H] = 1.0 - g * g
                dz *= deriv
                dc_next = dc * f
                dh_next = dz @ WhT
            n_in = seq_in.shape[2]
            flat = dZ.reshape(T * B, 4 * H)
            grads[f"lstm{layer}.Wx"] = seq_in.reshape(T * B, n_in).T @ flat
            grads[f"lstm{layer}.Wh"] = hs[:-1].reshape((T - 1) * B, H).T @ flat[B:]
            grads[f"lstm{layer}.b"] = flat.sum(axis=0)
            if layer > 0:
                dseq = dZ @ p[f"lstm{layer}.Wx"].T
        return grads

    def state_dict(self) -> dict:
        return {"config": self.config.to_dict(),
                "params": {k: v.tolist() for k, v in self.params.items()},
                "buffers": {k: v.tolist() for k, v in self.buffers.items()}}

    @classmethod
    def from_state_dict(cls, state: dict) -> "LstmNetwork":
        net = cls(NetworkConfig(**state["config"]), seed=0)
        for store, key in ((net.params, "params"), (net.buffers, "buffers")):
            for name, ref in store.items():
                arr = np.asarray(state[key][name], dtype=np.float64)
                if arr.shape != ref.shape:
                    raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {ref.shape}")
                store[name] = arr
        return net
