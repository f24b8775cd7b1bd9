"""Exact input-jets (value, gradient, Hessian) and parameter gradients.

The engine propagates, for every network layer, a slab of slots per
point: slot 0 carries the value, slots 1..d the input-Jacobian columns,
and the remaining slots the upper triangle of the input Hessian (the
full symmetric matrix is redundant). Propagation is exact layer-by-layer
calculus, no finite differences; a reverse sweep over the recorded slabs
yields the exact gradient of any scalar assembled from the jets with
respect to every weight and bias.

The input dimension is at most 4, so forward-mode jets are cheap; the
slab layout turns each layer into one BLAS matmul plus one fused
elementwise kernel. ``hess_dims`` restricts Hessian propagation to the
leading input coordinates: space-time networks only ever need the
spatial 3x3 block, never d_tt or mixed time derivatives.

Everything runs in 64-bit floats; the second-derivative penalty terms
make 32-bit round-off visible. Per-point work is independent (the fused
kernels may run on any number of threads without changing results) and
all batch reductions are fixed-order numpy sums, so runs are
reproducible at a fixed BLAS thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import config as _numba_config
from numba import njit, prange

from .errors import NonFiniteLoss, ShapeMismatch
from .network import flatten_params

# TBB availability varies across installs; the workqueue layer always
# exists and the kernels are embarrassingly parallel anyway
_numba_config.THREADING_LAYER = "workqueue"

PI = np.pi


def hessian_pairs(dims):
    """Index arrays (K, L) of the packed upper triangle for `dims` inputs."""
    pairs = [(k, l) for k in range(dims) for l in range(k, dims)]
    k_idx = np.array([p[0] for p in pairs], dtype=np.int64)
    l_idx = np.array([p[1] for p in pairs], dtype=np.int64)
    return k_idx, l_idx


@njit(parallel=True, cache=True)
def _act_fwd(z, a, trig, d, k_idx, l_idx):
    """sin(pi s) activation applied to a jet slab, caching sin/cos."""
    n_pts, _, width = z.shape
    n_pairs = k_idx.shape[0]
    for i in prange(n_pts):
        zi = z[i]
        ai = a[i]
        ti = trig[i]
        for j in range(width):
            s0 = np.sin(PI * zi[0, j])
            s1 = PI * np.cos(PI * zi[0, j])
            s2 = -(PI * PI) * s0
            ti[0, j] = s0
            ti[1, j] = s1
            ai[0, j] = s0
            for k in range(d):
                ai[1 + k, j] = s1 * zi[1 + k, j]
            for p in range(n_pairs):
                ai[1 + d + p, j] = (
                    s2 * zi[1 + k_idx[p], j] * zi[1 + l_idx[p], j]
                    + s1 * zi[1 + d + p, j]
                )


@njit(parallel=True, cache=True)
def _act_bwd(z, trig, adj, zadj, d, k_idx, l_idx):
    """Adjoint of _act_fwd: maps post-activation to pre-activation adjoints."""
    n_pts, _, width = z.shape
    n_pairs = k_idx.shape[0]
    for i in prange(n_pts):
        zi = z[i]
        ti = trig[i]
        gi = adj[i]
        oi = zadj[i]
        for j in range(width):
            s0 = ti[0, j]
            s1 = ti[1, j]
            s2 = -(PI * PI) * s0
            s3 = -(PI * PI) * s1
            acc = gi[0, j] * s1
            for k in range(d):
                oi[1 + k, j] = gi[1 + k, j] * s1
                acc += gi[1 + k, j] * s2 * zi[1 + k, j]
            for p in range(n_pairs):
                hp = gi[1 + d + p, j]
                jk = zi[1 + k_idx[p], j]
                jl = zi[1 + l_idx[p], j]
                acc += hp * (s3 * jk * jl + s2 * zi[1 + d + p, j])
                oi[1 + k_idx[p], j] += hp * s2 * jl
                oi[1 + l_idx[p], j] += hp * s2 * jk
                oi[1 + d + p, j] = hp * s1
            oi[0, j] = acc


@dataclass
class JetBatch:
    """Jets of every output head at a batch of input points.

    ``hess`` holds the packed upper triangle (pairs ``k_idx``/``l_idx``)
    of the Hessian restricted to the first ``hess_dims`` inputs.
    """

    value: np.ndarray  # (N, m)
    grad: np.ndarray  # (N, m, d)
    hess: np.ndarray  # (N, m, P)
    hess_dims: int
    k_idx: np.ndarray
    l_idx: np.ndarray

    @property
    def n_points(self):
        return self.value.shape[0]

    @property
    def n_heads(self):
        return self.value.shape[1]

    def laplacian(self):
        """Trace of the packed Hessian block, per point and head."""
        diag = self.k_idx == self.l_idx
        return self.hess[:, :, diag].sum(axis=2)

    def normal_hessian(self, normals):
        """n^T H n per point and head for unit normals of shape (N, 3)."""
        mult = np.where(self.k_idx == self.l_idx, 1.0, 2.0)
        coef = mult * normals[:, self.k_idx] * normals[:, self.l_idx]  # (N, P)
        return np.einsum("nmp,np->nm", self.hess, coef)

    def hess_full(self):
        """Unpacked symmetric Hessian blocks, (N, m, hd, hd)."""
        n, m, _ = self.hess.shape
        hd = self.hess_dims
        full = np.zeros((n, m, hd, hd))
        for p in range(len(self.k_idx)):
            k, l = self.k_idx[p], self.l_idx[p]
            full[:, :, k, l] = self.hess[:, :, p]
            full[:, :, l, k] = self.hess[:, :, p]
        return full


@dataclass
class JetSeeds:
    """Adjoints of a scalar loss with respect to every jet entry."""

    value: np.ndarray  # (N, m)
    grad: np.ndarray  # (N, m, d)
    hess: np.ndarray  # (N, m, P)

    @classmethod
    def zeros_like(cls, jets):
        return cls(
            value=np.zeros_like(jets.value),
            grad=np.zeros_like(jets.grad),
            hess=np.zeros_like(jets.hess),
        )


@dataclass
class Jet2:
    """Value, input gradient, and full symmetric input Hessian at a point."""

    value: float
    grad: np.ndarray
    hess: np.ndarray


class _Tape:
    __slots__ = ("inputs", "zs", "trigs", "d", "k_idx", "l_idx", "n_slots")


def _forward(params, x, hess_dims):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise ShapeMismatch(
            f"expected points of dimension {params.input_dim}, got {x.shape}"
        )
    n_pts, d = x.shape
    k_idx, l_idx = hessian_pairs(hess_dims)
    n_pairs = len(k_idx)
    n_slots = 1 + d + n_pairs
    slab = np.zeros((n_pts, n_slots, d))
    slab[:, 0, :] = x
    for k in range(d):
        slab[:, 1 + k, k] = 1.0

    tape = _Tape()
    tape.inputs, tape.zs, tape.trigs = [], [], []
    tape.d, tape.k_idx, tape.l_idx, tape.n_slots = d, k_idx, l_idx, n_slots

    last = len(params.weights) - 1
    for li, (w, b) in enumerate(zip(params.weights, params.biases)):
        width = w.shape[0]
        tape.inputs.append(slab)
        z = (slab.reshape(n_pts * n_slots, -1) @ w.T).reshape(n_pts, n_slots, width)
        z[:, 0, :] += b
        tape.zs.append(z)
        if li < last:
            a = np.empty_like(z)
            trig = np.empty((n_pts, 2, width))
            _act_fwd(z, a, trig, d, k_idx, l_idx)
            tape.trigs.append(trig)
            slab = a
        else:
            tape.trigs.append(None)
            slab = z

    jets = JetBatch(
        value=slab[:, 0, :].copy(),
        grad=np.ascontiguousarray(np.moveaxis(slab[:, 1 : 1 + d, :], 1, 2)),
        hess=np.ascontiguousarray(np.moveaxis(slab[:, 1 + d :, :], 1, 2)),
        hess_dims=hess_dims,
        k_idx=k_idx,
        l_idx=l_idx,
    )
    return jets, tape


def _backward(params, tape, seeds):
    n_pts = seeds.value.shape[0]
    d, n_slots = tape.d, tape.n_slots
    m = params.output_dim
    adj = np.empty((n_pts, n_slots, m))
    adj[:, 0, :] = seeds.value
    adj[:, 1 : 1 + d, :] = np.moveaxis(seeds.grad, 1, 2)
    adj[:, 1 + d :, :] = np.moveaxis(seeds.hess, 1, 2)

    grad_w = [None] * len(params.weights)
    grad_b = [None] * len(params.biases)
    for li in range(len(params.weights) - 1, -1, -1):
        if tape.trigs[li] is not None:
            zadj = np.empty_like(adj)
            _act_bwd(tape.zs[li], tape.trigs[li], adj, zadj, d, tape.k_idx, tape.l_idx)
            adj = zadj
        width = adj.shape[2]
        flat_adj = adj.reshape(n_pts * n_slots, width)
        grad_w[li] = flat_adj.T @ tape.inputs[li].reshape(n_pts * n_slots, -1)
        grad_b[li] = adj[:, 0, :].sum(axis=0)
        if li > 0:
            adj = (flat_adj @ params.weights[li]).reshape(n_pts, n_slots, -1)

    chunks = []
    for gw, gb in zip(grad_w, grad_b):
        chunks.append(gw.ravel())
        chunks.append(gb)
    return np.concatenate(chunks)


def jet2_eval(params, x):
    """Full 2-jets (value, gradient, d x d Hessian) of every output head."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    jets, _ = _forward(params, pts, hess_dims=params.input_dim)
    full = jets.hess_full()
    out = []
    for i in range(pts.shape[0]):
        row = [
            Jet2(value=float(jets.value[i, h]), grad=jets.grad[i, h].copy(), hess=full[i, h])
            for h in range(jets.n_heads)
        ]
        out.append(row)
    return out[0] if single else out


def jet_batch(params, x, hess_dims=None):
    """Forward-only jets for a batch; Hessians on the leading hess_dims axes."""
    if hess_dims is None:
        hess_dims = params.input_dim
    jets, _ = _forward(params, np.asarray(x, dtype=float), hess_dims)
    return jets


def loss_value(params, x, assembler):
    """Assembled loss without the reverse sweep (used by fd_check)."""
    jets, _ = _forward(params, x, assembler.hess_dims)
    total, breakdown, _ = assembler.assemble(jets)
    return total, breakdown


def loss_param_gradient(params, x, assembler):
    """Loss plus its exact gradient with respect to every parameter.

    The assembler consumes the jets of the batch and returns the scalar
    total, an optional loss breakdown, and the adjoint seeds of the total
    with respect to each jet entry; batch contributions sum through the
    reverse sweep.
    """
    x = np.asarray(x, dtype=float)
    jets, tape = _forward(params, x, assembler.hess_dims)
    total, breakdown, seeds = assembler.assemble(jets)
    if not np.isfinite(total):
        raise NonFiniteLoss(f"loss evaluated to {total}")
    grad = _backward(params, tape, seeds)
    return total, grad, breakdown


def fd_check(params, x, assembler, step=1e-5):
    """Worst central-difference discrepancy of the parameter gradient.

    Perturbs every parameter by +-step and compares against the analytic
    gradient; the discrepancy is |fd - analytic| relative to
    max(|analytic|_inf, 1e-8).
    """
    if not 1e-7 <= step <= 1e-3:
        raise ValueError("step must lie in [1e-7, 1e-3]")
    x = np.asarray(x, dtype=float)
    _, grad, _ = loss_param_gradient(params, x, assembler)
    flat = flatten_params(params)
    work = params.copy()
    fd = np.empty_like(flat)
    from .network import set_from_flat

    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        set_from_flat(work, flat)
        hi, _ = loss_value(work, x, assembler)
        flat[i] = orig - step
        set_from_flat(work, flat)
        lo, _ = loss_value(work, x, assembler)
        flat[i] = orig
        fd[i] = (hi - lo) / (2.0 * step)
    set_from_flat(work, flat)
    denom = max(float(np.max(np.abs(grad))), 1e-8)
    return float(np.max(np.abs(fd - grad)) / denom)
