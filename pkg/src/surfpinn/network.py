"""Fully connected networks with the sin(pi s) activation.

Parameters are kept as per-layer weight matrices and bias vectors. The
flattened order is stable: layer by layer, row-major weights first, then
the bias, which fixes the checkpoint format and the gradient layout.

Inputs are fed raw: surface coordinates are O(1) and the continuous-time
network receives t/T, so everything lives in [-2, 2]. The 1/T chain
factor this introduces into the time derivative is applied inside the
residual assembly, not here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidShape, ShapeMismatch

ACTIVATION = "sin-pi"


@dataclass
class MlpParams:
    """Layer sizes plus weight/bias arrays for one network."""

    layer_sizes: tuple
    weights: list
    biases: list
    activation: str = ACTIVATION
    seed: int = 0

    @property
    def input_dim(self):
        return self.layer_sizes[0]

    @property
    def output_dim(self):
        return self.layer_sizes[-1]

    def copy(self):
        return MlpParams(
            layer_sizes=self.layer_sizes,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activation=self.activation,
            seed=self.seed,
        )


def continuous_layer_sizes(width=100, depth=4):
    """Input (x, y, z, t/T), four hidden layers, one output head."""
    return (4, *([width] * depth), 1)


def discrete_layer_sizes(q, width=200, depth=4):
    """Input (x, y, z); q stage heads plus the final-time head."""
    return (3, *([width] * depth), q + 1)


def init_params(layer_sizes, seed):
    """Glorot-uniform weights with zero biases, reproducible from seed."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 3:
        raise InvalidShape("need at least one hidden layer")
    if any(s < 1 for s in sizes):
        raise InvalidShape("layer sizes must be positive")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for nin, nout in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (nin + nout))
        weights.append(rng.uniform(-limit, limit, size=(nout, nin)))
        biases.append(np.zeros(nout))
    return MlpParams(layer_sizes=sizes, weights=weights, biases=biases, seed=seed)


def forward(params, x):
    """Plain forward pass; returns (m,) for one point or (N, m) for a batch."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    a = x[None, :] if single else x
    if a.shape[1] != params.input_dim:
        raise ShapeMismatch(
            f"input dim {a.shape[1]} != network input {params.input_dim}"
        )
    last = len(params.weights) - 1
    for li, (w, b) in enumerate(zip(params.weights, params.biases)):
        a = a @ w.T + b
        if li < last:
            a = np.sin(np.pi * a)
    return a[0] if single else a


def param_count(params):
    return sum(w.size + b.size for w, b in zip(params.weights, params.biases))


def flatten_params(params):
    """Flatten layer-major, row-major, weights before biases."""
    chunks = []
    for w, b in zip(params.weights, params.biases):
        chunks.append(w.ravel())
        chunks.append(b)
    return np.concatenate(chunks)


def set_from_flat(params, flat):
    """Write a flat vector back into the parameter arrays (same order)."""
    flat = np.asarray(flat, dtype=float)
    if flat.size != param_count(params):
        raise ShapeMismatch("flat vector length does not match parameter count")
    pos = 0
    for w, b in zip(params.weights, params.biases):
        w[...] = flat[pos : pos + w.size].reshape(w.shape)
        pos += w.size
        b[...] = flat[pos : pos + b.size]
        pos += b.size
    return params


CHECKPOINT_MAGIC = "surfpinn-checkpoint v1"


def save_checkpoint(params, path):
    """Plain-text checkpoint, bit-exact via shortest-repr float encoding."""
    flat = flatten_params(params)
    with open(path, "w") as fh:
        fh.write(CHECKPOINT_MAGIC + "\n")
        fh.write("layer_sizes " + " ".join(str(s) for s in params.layer_sizes) + "\n")
        fh.write(f"activation {params.activation}\n")
        fh.write(f"seed {params.seed}\n")
        fh.write(f"values {flat.size}\n")
        for v in flat:
            fh.write(repr(float(v)) + "\n")


def load_checkpoint(path):
    with open(path) as fh:
        magic = fh.readline().strip()
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"not a checkpoint file: {path}")
        sizes = tuple(int(s) for s in fh.readline().split()[1:])
        activation = fh.readline().split()[1]
        seed = int(fh.readline().split()[1])
        count = int(fh.readline().split()[1])
        flat = np.empty(count)
        for i in range(count):
            flat[i] = float(fh.readline())
    weights = [
        np.zeros((nout, nin)) for nin, nout in zip(sizes[:-1], sizes[1:])
    ]
    biases = [np.zeros(nout) for nout in sizes[1:]]
    params = MlpParams(
        layer_sizes=sizes,
        weights=weights,
        biases=biases,
        activation=activation,
        seed=seed,
    )
    return set_from_flat(params, flat)
