"""Small multilayer perceptron with hand-written backprop and Adam.

All parameters live in one flat float64 vector; per-layer weight matrices
(rows = outputs) and bias vectors are views into it. That keeps the
optimizer update and target-network copies to a handful of array ops, which
matters because the DQN loop calls them once per environment step.

Hidden layers use ReLU, the output layer is linear.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ParseError, ShapeError

FORMAT_TAG = "mlp-v1"


def _layout(sizes: Sequence[int]) -> list[tuple[slice, tuple[int, int], slice]]:
    out, off = [], 0
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        w = slice(off, off + n_out * n_in)
        off += n_out * n_in
        b = slice(off, off + n_out)
        off += n_out
        out.append((w, (n_out, n_in), b))
    return out


class MlpModel:
    def __init__(self, layer_sizes: Sequence[int], params: np.ndarray | None = None):
        sizes = tuple(int(s) for s in layer_sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ShapeError(f"need at least two positive layer sizes, got {sizes}")
        self.layer_sizes = sizes
        self._layout = _layout(sizes)
        n = self._layout[-1][2].stop
        if params is None:
            params = np.zeros(n)
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (n,):
            raise ShapeError(f"expected {n} parameters, got shape {params.shape}")
        self.params = params
        self.weights = [params[w].reshape(shape) for w, shape, _ in self._layout]
        self.biases = [params[b] for _, _, b in self._layout]

    @classmethod
    def initialize(cls, layer_sizes: Sequence[int], rng: np.random.Generator) -> "MlpModel":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias."""
        m = cls(layer_sizes)
        for w, b in zip(m.weights, m.biases):
            bound = 1.0 / np.sqrt(w.shape[1])
            w[...] = rng.uniform(-bound, bound, size=w.shape)
            b[...] = rng.uniform(-bound, bound, size=b.shape)
        return m

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "MlpModel":
        return MlpModel(self.layer_sizes, self.params.copy())

    def load_from(self, other: "MlpModel") -> None:
        """Overwrite parameters in place (hard target-network sync)."""
        self.params[...] = other.params

    def unflatten(self, flat: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Split a parameter-shaped flat vector into per-layer (W, b) views."""
        return [(flat[w].reshape(shape), flat[b]) for w, shape, b in self._layout]

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1:] != (self.n_inputs,) or x.ndim > 2:
            raise ShapeError(f"input of shape {x.shape} does not match width {self.n_inputs}")
        return x

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Network output for one input vector or a batch of row vectors."""
        a = self._check(x)
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = a @ w.T
            a += b
            if k < last:
                np.maximum(a, 0.0, out=a)
        return a

    __call__ = forward

    def forward_trace(self, x: np.ndarray) -> list[np.ndarray]:
        """Activations of every layer, input first and output last."""
        acts = [self._check(x)]
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = acts[-1] @ w.T
            z += b
            if k < last:
                np.maximum(z, 0.0, out=z)
            acts.append(z)
        return acts

    def backward(self, x: np.ndarray, d_out: np.ndarray, acts: list[np.ndarray] | None = None) -> np.ndarray:
        """Gradient of ``sum(d_out * forward(x))`` w.r.t. the flat parameters.

        For a batch, contributions of all rows are summed. Pass ``acts`` from
        ``forward_trace`` to skip the recomputation.
        """
        if acts is None:
            acts = self.forward_trace(x)
        d = np.asarray(d_out, dtype=np.float64)
        if d.shape != acts[-1].shape:
            raise ShapeError(f"d_out shape {d.shape} does not match output {acts[-1].shape}")
        grad = np.empty_like(self.params)
        batched = d.ndim == 2
        for k in range(len(self.weights) - 1, -1, -1):
            w_sl, shape, b_sl = self._layout[k]
            a_in = acts[k]
            if batched:
                grad[w_sl] = (d.T @ a_in).ravel()
                grad[b_sl] = d.sum(axis=0)
            else:
                grad[w_sl] = np.outer(d, a_in).ravel()
                grad[b_sl] = d
            if k > 0:
                d = (d @ self.weights[k]) * (a_in > 0.0)
        return grad


def forward(m: MlpModel, x: np.ndarray) -> np.ndarray:
    return m.forward(x)


def backward(m: MlpModel, x: np.ndarray, d_out: np.ndarray) -> np.ndarray:
    return m.backward(x, d_out)


@dataclass
class OptimizerState:
    """Adam moments for one model (or plain SGD when ``kind='sgd'``)."""

    n_params: int
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    kind: str = "adam"
    t: int = 0
    m: np.ndarray = field(init=False, repr=False)
    v: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        self.m = np.zeros(self.n_params)
        self.v = np.zeros(self.n_params)
        self._scratch = np.zeros(self.n_params)

    @classmethod
    def for_model(cls, model: MlpModel, **kw) -> "OptimizerState":
        return cls(model.params.size, **kw)


def optimize_step(m: MlpModel, opt: OptimizerState, grads: np.ndarray, lr: float | None = None) -> MlpModel:
    """Apply one descent step in place and return the model."""
    lr = opt.lr if lr is None else lr
    if grads.shape != m.params.shape or opt.m.shape != m.params.shape:
        raise ShapeError("gradient/optimizer shape does not match model parameters")
    if opt.kind == "sgd":
        m.params -= lr * grads
        return m
    opt.t += 1
    tmp = opt._scratch
    opt.m *= opt.beta1
    np.multiply(grads, 1.0 - opt.beta1, out=tmp)
    opt.m += tmp
    opt.v *= opt.beta2
    np.multiply(grads, grads, out=tmp)
    tmp *= 1.0 - opt.beta2
    opt.v += tmp
    step = lr * np.sqrt(1.0 - opt.beta2 ** opt.t) / (1.0 - opt.beta1 ** opt.t)
    np.sqrt(opt.v, out=tmp)
    tmp += opt.eps
    np.divide(opt.m, tmp, out=tmp)
    tmp *= step
    m.params -= tmp
    return m


def serialize(m: MlpModel) -> str:
    lines = [FORMAT_TAG, " ".join(str(s) for s in m.layer_sizes)]
    for w, b in zip(m.weights, m.biases):
        lines.append(" ".join("%.17g" % x for x in w.ravel()))
        lines.append(" ".join("%.17g" % x for x in b))
    return "\n".join(lines) + "\n"


def deserialize(text: str) -> MlpModel:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise ParseError("empty model blob", line=1)
    if lines[0].strip() != FORMAT_TAG:
        raise ParseError(f"expected {FORMAT_TAG!r} header, got {lines[0]!r}", line=1)
    if len(lines) < 2:
        raise ParseError("missing layer sizes", line=2)
    try:
        sizes = [int(tok) for tok in lines[1].split()]
    except ValueError:
        raise ParseError("layer sizes must be integers", line=2) from None
    if len(sizes) < 2 or min(sizes) < 1:
        raise ParseError("need at least two positive layer sizes", line=2)
    m = MlpModel(sizes)
    tensors = []
    for w, b in zip(m.weights, m.biases):
        tensors += [w, b]
    body = lines[2:]
    if len(body) != len(tensors):
        raise ParseError(f"expected {len(tensors)} parameter lines, got {len(body)}", line=2 + min(len(body), len(tensors)) + 1)
    for i, (line, t) in enumerate(zip(body, tensors)):
        lineno = i + 3
        try:
            vals = np.array([float(tok) for tok in line.split()])
        except ValueError:
            raise ParseError("non-numeric parameter", line=lineno) from None
        if vals.size != t.size:
            raise ParseError(f"expected {t.size} values, got {vals.size}", line=lineno)
        if not np.all(np.isfinite(vals)):
            raise ParseError("non-finite parameter", line=lineno)
        t[...] = vals.reshape(t.shape)
    return m
