"""Single-layer LSTM regression network with a dense read-out, trained by BPTT.

Gate parameters are stored stacked along the first axis in the order
(forget, candidate, input, output), so ``W`` is ``(4H, I)``, ``R`` is
``(4H, H)`` and ``b`` is ``(4H,)``. Per-gate views are available through
:meth:`LstmParams.gate`.

Cell update::

    f = sigmoid(W_f x + R_f h + b_f)    g = tanh(W_g x + R_g h + b_g)
    i = sigmoid(W_i x + R_i h + b_i)    o = sigmoid(W_o x + R_o h + b_o)
    c' = f * c + i * g                  h' = o * tanh(c')
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DomainError, ShapeError

GATES = ("f", "g", "i", "o")
PARAM_NAMES = ("W", "R", "b", "W_fc", "b_fc")


@dataclass
class LstmParams:
    W: np.ndarray
    R: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        H4, I = self.W.shape
        if H4 % 4 or self.R.shape != (H4, H4 // 4) or self.b.shape != (H4,):
            raise ShapeError(
                f"inconsistent LSTM shapes W{self.W.shape} R{self.R.shape} b{self.b.shape}"
            )

    @property
    def hidden_size(self) -> int:
        return self.R.shape[1]

    @property
    def input_size(self) -> int:
        return self.W.shape[1]

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(W_g, R_g, b_g) views for gate ``name`` in ``"fgio"``."""
        k = GATES.index(name)
        H = self.hidden_size
        sl = slice(k * H, (k + 1) * H)
        return self.W[sl], self.R[sl], self.b[sl]


@dataclass
class DenseParams:
    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ShapeError(f"inconsistent dense shapes W{self.W.shape} b{self.b.shape}")


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden_size: int) -> "LstmState":
        return cls(np.zeros(hidden_size), np.zeros(hidden_size))


@dataclass
class LstmNetwork:
    lstm: LstmParams
    dense: DenseParams
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.dense.W.shape[1] != self.lstm.hidden_size:
            raise ShapeError("dense layer input does not match LSTM hidden size")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise DomainError(f"sigma must be positive, got {self.sigma}")

    @property
    def hidden_size(self) -> int:
        return self.lstm.hidden_size

    @property
    def input_size(self) -> int:
        return self.lstm.input_size

    @property
    def output_size(self) -> int:
        return self.dense.W.shape[0]

    def parameters(self) -> dict[str, np.ndarray]:
        return {
            "W": self.lstm.W,
            "R": self.lstm.R,
            "b": self.lstm.b,
            "W_fc": self.dense.W,
            "b_fc": self.dense.b,
        }

    def with_parameters(self, params: dict[str, np.ndarray]) -> "LstmNetwork":
        return LstmNetwork(
            LstmParams(params["W"], params["R"], params["b"]),
            DenseParams(params["W_fc"], params["b_fc"]),
            self.mu,
            self.sigma,
        )

    def copy(self) -> "LstmNetwork":
        return self.with_parameters({k: v.copy() for k, v in self.parameters().items()})


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 250
    learning_rate: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 1.0
    hidden_size: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise DomainError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise DomainError("learning_rate must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise DomainError("Adam betas must lie in (0, 1)")
        if not (self.eps > 0 and self.clip_norm > 0 and self.hidden_size >= 1):
            raise DomainError("eps, clip_norm and hidden_size must be positive")


def init_params(hidden_size: int, input_size: int = 1, output_size: int = 1, seed: int = 0) -> LstmNetwork:
    """Glorot-uniform weights per gate, zero biases, forget-gate bias 1."""
    H, I, O = hidden_size, input_size, output_size
    if min(H, I, O) < 1:
        raise DomainError(f"sizes must be >= 1, got H={H}, I={I}, O={O}")
    rng = np.random.default_rng(seed)

    def glorot(rows, cols):
        limit = math.sqrt(6.0 / (rows + cols))
        return rng.uniform(-limit, limit, size=(rows, cols))

    W = np.concatenate([glorot(H, I) for _ in GATES])
    R = np.concatenate([glorot(H, H) for _ in GATES])
    b = np.zeros(4 * H)
    b[:H] = 1.0
    dense = DenseParams(glorot(O, H), np.zeros(O))
    return LstmNetwork(LstmParams(W, R, b), dense)


# sigmoid(z) = 0.5 + 0.5 tanh(z / 2): one tanh over the whole stacked vector
def _gate_coefficients(H):
    scale = np.full(4 * H, 0.5)
    scale[H : 2 * H] = 1.0
    return scale, scale.copy(), 1.0 - scale  # inner scale, outer scale, offset


def _activate(z, coeffs):
    scale, outer, offset = coeffs
    return outer * np.tanh(scale * z) + offset


@dataclass
class CellCache:
    f: np.ndarray
    g: np.ndarray
    i: np.ndarray
    o: np.ndarray
    c: np.ndarray


def _cell(preact_input, R, coeffs, h, c, H):
    gates = _activate(preact_input + R @ h, coeffs)
    c_new = gates[:H] * c + gates[2 * H : 3 * H] * gates[H : 2 * H]
    h_new = gates[3 * H :] * np.tanh(c_new)
    return gates, h_new, c_new


def lstm_cell_forward(params: LstmParams, x_t, state: LstmState) -> tuple[LstmState, CellCache]:
    H = params.hidden_size
    x_t = np.atleast_1d(np.asarray(x_t, dtype=float))
    if x_t.shape != (params.input_size,):
        raise ShapeError(f"input must have shape ({params.input_size},), got {x_t.shape}")
    if state.h.shape != (H,) or state.c.shape != (H,):
        raise ShapeError(f"state must have hidden size {H}")
    gates, h, c = _cell(params.W @ x_t + params.b, params.R, _gate_coefficients(H), state.h, state.c, H)
    cache = CellCache(gates[:H], gates[H : 2 * H], gates[2 * H : 3 * H], gates[3 * H :], c)
    return LstmState(h, c), cache


@dataclass
class ForwardCache:
    inputs: np.ndarray  # (T, I)
    gates: np.ndarray  # (T, 4H), post-activation
    h: np.ndarray  # (T + 1, H), h[0] is the initial state
    c: np.ndarray  # (T + 1, H)
    outputs: np.ndarray  # (T, O)

    def final_state(self) -> LstmState:
        return LstmState(self.h[-1].copy(), self.c[-1].copy())


def _as_sequence(sequence, input_size) -> np.ndarray:
    X = np.asarray(sequence, dtype=float)
    if X.ndim == 1 and input_size == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[1] != input_size:
        raise ShapeError(f"sequence must have shape (T, {input_size}), got {X.shape}")
    if len(X) == 0:
        raise ShapeError("sequence must be non-empty")
    return X


def network_forward(net: LstmNetwork, sequence, initial: LstmState | None = None) -> tuple[np.ndarray, ForwardCache]:
    """Unroll over ``sequence`` and apply the dense layer at every step; returns ``(T, O)`` outputs."""
    lstm = net.lstm
    H = lstm.hidden_size
    X = _as_sequence(sequence, lstm.input_size)
    if initial is None:
        initial = LstmState.zeros(H)
    T = len(X)
    coeffs = _gate_coefficients(H)
    preact = X @ lstm.W.T + lstm.b
    gates = np.empty((T, 4 * H))
    hs = np.empty((T + 1, H))
    cs = np.empty((T + 1, H))
    hs[0], cs[0] = initial.h, initial.c
    R = lstm.R
    for t in range(T):
        gates[t], hs[t + 1], cs[t + 1] = _cell(preact[t], R, coeffs, hs[t], cs[t], H)
    outputs = hs[1:] @ net.dense.W.T + net.dense.b
    return outputs, ForwardCache(X, gates, hs, cs, outputs)


def mse_loss(preds, targets) -> float:
    preds = np.asarray(preds, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if preds.shape != targets.shape:
        raise ShapeError(f"shape mismatch: predictions {preds.shape} vs targets {targets.shape}")
    if preds.size == 0:
        raise ShapeError("empty inputs")
    return float(np.mean((preds - targets) ** 2))


def _as_targets(targets, shape) -> np.ndarray:
    Y = np.asarray(targets, dtype=float)
    if Y.ndim == 1 and shape[1] == 1:
        Y = Y[:, None]
    if Y.shape != shape:
        raise ShapeError(f"targets must have shape {shape}, got {Y.shape}")
    return Y


def backward(net: LstmNetwork, cache: ForwardCache, d_outputs: np.ndarray) -> dict[str, np.ndarray]:
    """Reverse-mode pass given the loss gradient with respect to every output."""
    H = net.hidden_size
    T = len(cache.inputs)
    hs, cs, G = cache.h, cache.c, cache.gates
    grads = {
        "W_fc": d_outputs.T @ hs[1:],
        "b_fc": d_outputs.sum(axis=0),
    }
    dh_out = d_outputs @ net.dense.W
    RT = np.ascontiguousarray(net.lstm.R.T)
    dZ = np.empty((T, 4 * H))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    for t in range(T - 1, -1, -1):
        g = G[t]
        f, cand, i, o = g[:H], g[H : 2 * H], g[2 * H : 3 * H], g[3 * H :]
        tc = np.tanh(cs[t + 1])
        dh = dh_out[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz = dZ[t]
        dz[:H] = dc * cs[t] * f * (1.0 - f)
        dz[H : 2 * H] = dc * i * (1.0 - cand * cand)
        dz[2 * H : 3 * H] = dc * cand * i * (1.0 - i)
        dz[3 * H :] = dh * tc * o * (1.0 - o)
        dc_next = dc * f
        dh_next = RT @ dz
    grads["W"] = dZ.T @ cache.inputs
    grads["R"] = dZ.T @ hs[:-1]
    grads["b"] = dZ.sum(axis=0)
    return {name: grads[name] for name in PARAM_NAMES}


def loss_and_gradients(net: LstmNetwork, sequence, targets, initial: LstmState | None = None):
    outputs, cache = network_forward(net, sequence, initial)
    Y = _as_targets(targets, outputs.shape)
    residual = outputs - Y
    loss = float(np.mean(residual**2))
    return loss, backward(net, cache, 2.0 * residual / residual.size)


def bptt_gradients(net: LstmNetwork, sequence, targets, initial: LstmState | None = None) -> dict[str, np.ndarray]:
    """Exact gradient of the MSE of the full unrolled sequence with respect to every parameter."""
    return loss_and_gradients(net, sequence, targets, initial)[1]


def central_difference(f: Callable[[np.ndarray], float], theta: np.ndarray, eps: float) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``theta`` (perturbed in place, then restored)."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    grad = np.empty(theta.shape)
    for idx in np.ndindex(theta.shape):
        saved = theta[idx]
        theta[idx] = saved + eps
        up = f(theta)
        theta[idx] = saved - eps
        down = f(theta)
        theta[idx] = saved
        grad[idx] = (up - down) / (2.0 * eps)
    return grad


def finite_diff_gradients(net: LstmNetwork, sequence, targets, eps: float = 1e-5,
                          initial: LstmState | None = None) -> dict[str, np.ndarray]:
    probe = net.copy()
    params = probe.parameters()

    def loss(_):
        outputs, _cache = network_forward(probe, sequence, initial)
        return mse_loss(outputs, _as_targets(targets, outputs.shape))

    return {name: central_difference(loss, params[name], eps) for name in PARAM_NAMES}


def max_relative_error(a: dict, b: dict, floor: float = 1e-8) -> float:
    """Largest ``|a - b| / max(|a|, |b|, floor)`` over all parameter entries."""
    worst = 0.0
    for name in a:
        x, y = a[name], b[name]
        denom = np.maximum(np.maximum(np.abs(x), np.abs(y)), floor)
        worst = max(worst, float(np.max(np.abs(x - y) / denom)))
    return worst


def gradient_check(seed: int, hidden_size: int = 4, steps: int = 20, eps: float = 1e-5) -> float:
    """BPTT vs central differences on a random instance; returns the max relative error."""
    rng = np.random.default_rng(seed)
    net = init_params(hidden_size, 1, 1, seed=seed)
    params = net.parameters()
    for name in PARAM_NAMES:
        params[name][...] = rng.normal(scale=0.5, size=params[name].shape)
    x = rng.normal(size=(steps, 1))
    y = rng.normal(size=(steps, 1))
    analytic = bptt_gradients(net, x, y)
    numeric = finite_diff_gradients(net, x, y, eps)
    return max_relative_error(analytic, numeric)


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()})


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def clip_by_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> dict[str, np.ndarray]:
    norm = global_norm(grads)
    if norm <= max_norm:
        return grads
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState,
              cfg: TrainingConfig, t: int) -> tuple[dict[str, np.ndarray], AdamState]:
    if t < 1:
        raise DomainError("Adam step index starts at 1")
    grads = clip_by_global_norm(grads, cfg.clip_norm)
    b1, b2 = cfg.beta1, cfg.beta2
    m_hat_scale = 1.0 / (1.0 - b1**t)
    v_hat_scale = 1.0 / (1.0 - b2**t)
    new_params, m, v = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        m[name] = b1 * state.m[name] + (1.0 - b1) * g
        v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        step = m[name] * m_hat_scale / (np.sqrt(v[name] * v_hat_scale) + cfg.eps)
        new_params[name] = p - cfg.learning_rate * step
    return new_params, AdamState(m, v)


def train(series, cfg: TrainingConfig, net: LstmNetwork | None = None,
          callback: Callable[[int, float], None] | None = None) -> tuple[LstmNetwork, list[float]]:
    """Next-step regression on a (standardized) 1-D series with full-length BPTT per epoch.

    Inputs are ``series[:-1]`` and targets ``series[1:]``. The recorded loss for
    an epoch is the one evaluated before that epoch's update.
    """
    z = np.asarray(series, dtype=float).ravel()
    if len(z) < 2:
        raise DomainError(f"series needs at least 2 samples, got {len(z)}")
    if not np.all(np.isfinite(z)):
        raise DomainError("series contains non-finite values")
    if net is None:
        net = init_params(cfg.hidden_size, 1, 1, seed=cfg.seed)
    x, y = z[:-1, None], z[1:, None]
    params = {k: v.copy() for k, v in net.parameters().items()}
    state = AdamState.zeros_like(params)
    history = []
    for epoch in range(1, cfg.epochs + 1):
        loss, grads = loss_and_gradients(net.with_parameters(params), x, y)
        if not math.isfinite(loss):
            raise FloatingPointError(f"non-finite loss at epoch {epoch}")
        history.append(loss)
        params, state = adam_step(params, grads, state, cfg, epoch)
        if callback is not None:
            callback(epoch, loss)
    return net.with_parameters(params), history


def network_to_dict(net: LstmNetwork, config: TrainingConfig | None = None, extra: dict | None = None) -> dict:
    doc = {
        "H": net.hidden_size,
        "I": net.input_size,
        "O": net.output_size,
        "mu": float(net.mu),
        "sigma": float(net.sigma),
        "gate_order": "".join(GATES),
    }
    for gate in GATES:
        W, R, b = net.lstm.gate(gate)
        doc[f"W_{gate}"] = W.tolist()
        doc[f"R_{gate}"] = R.tolist()
        doc[f"b_{gate}"] = b.tolist()
    doc["W_fc"] = net.dense.W.tolist()
    doc["b_fc"] = net.dense.b.tolist()
    doc["training"] = asdict(config) if config is not None else None
    if extra:
        doc["meta"] = extra
    return doc


def network_from_dict(doc: dict) -> tuple[LstmNetwork, TrainingConfig | None, dict]:
    try:
        H, I, O = int(doc["H"]), int(doc["I"]), int(doc["O"])
        W = np.concatenate([np.array(doc[f"W_{g}"], dtype=float).reshape(H, I) for g in GATES])
        R = np.concatenate([np.array(doc[f"R_{g}"], dtype=float).reshape(H, H) for g in GATES])
        b = np.concatenate([np.array(doc[f"b_{g}"], dtype=float).reshape(H) for g in GATES])
        dense = DenseParams(np.array(doc["W_fc"], dtype=float).reshape(O, H),
                            np.array(doc["b_fc"], dtype=float).reshape(O))
        net = LstmNetwork(LstmParams(W, R, b), dense, float(doc["mu"]), float(doc["sigma"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise ShapeError(f"malformed model document: {exc}") from exc
    training = doc.get("training")
    config = TrainingConfig(**training) if training else None
    return net, config, doc.get("meta") or {}


def save_network(net: LstmNetwork, path, config: TrainingConfig | None = None, extra: dict | None = None) -> None:
    # json writes floats with repr(), the shortest string that round-trips exactly
    text = json.dumps(network_to_dict(net, config, extra), sort_keys=True)
    Path(path).write_text(text + "\n")


def load_network(path) -> tuple[LstmNetwork, TrainingConfig | None, dict]:
    return network_from_dict(json.loads(Path(path).read_text()))
