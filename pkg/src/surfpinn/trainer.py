"""Adam training loop with deterministic seeding, logging and checkpoints.

The paper never names an optimizer, so the artifact default is plain
Adam with bias correction at a constant learning rate (the de facto PINN
baseline). Full batch is the default; mini-batches subsample the
interior set with a seeded generator, which keeps runs reproducible.

A windowed-median divergence detector aborts a run whose loss grows by
more than 10x, keeping the last good checkpoint on disk.
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .diffengine import loss_param_gradient
from .errors import NonFiniteUpdate, TrainingDiverged
from .network import flatten_params, save_checkpoint, set_from_flat


@dataclass
class TrainingConfig:
    iterations: int = 10_000
    learning_rate: float = 1e-3
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    batch_size: int = 0  # 0 means full batch
    seed: int = 0
    log_every: int = 100
    checkpoint_every: int = 5_000
    divergence_window: int = 2_000
    divergence_factor: float = 10.0
    refinement: str = "none"  # stub; a second-phase quasi-Newton pass is
    # deliberately out of scope for v1

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        b1, b2 = self.adam_betas
        if not (0 <= b1 < 1 and 0 <= b2 < 1):
            raise ValueError("adam betas must lie in [0, 1)")
        if self.refinement != "none":
            raise ValueError("only refinement='none' is implemented")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n):
        return cls(m=np.zeros(n), v=np.zeros(n), t=0)


def adam_step(flat, grad, state, config):
    """One bias-corrected Adam update; returns the new flat parameters."""
    b1, b2 = config.adam_betas
    state.t += 1
    state.m = b1 * state.m + (1.0 - b1) * grad
    state.v = b2 * state.v + (1.0 - b2) * grad * grad
    m_hat = state.m / (1.0 - b1**state.t)
    v_hat = state.v / (1.0 - b2**state.t)
    new = flat - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.adam_eps)
    if not np.all(np.isfinite(new)):
        raise NonFiniteUpdate("Adam update produced non-finite parameters")
    return new


@dataclass
class LogRecord:
    iteration: int
    total: float
    pde_residual: float
    normal_grad_penalty: float
    hessian_penalty: float
    initial_misfit: float
    wall_seconds: float


@dataclass
class TrainingLog:
    records: list = field(default_factory=list)

    def append(self, record):
        self.records.append(record)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "total", "pde", "ng", "hess", "init", "seconds"])
            for r in self.records:
                writer.writerow(
                    [
                        r.iteration,
                        repr(r.total),
                        repr(r.pde_residual),
                        repr(r.normal_grad_penalty),
                        repr(r.hessian_penalty),
                        repr(r.initial_misfit),
                        f"{r.wall_seconds:.3f}",
                    ]
                )


def train(setup, params, config, out_dir=None, checkpoint_name="checkpoint.txt"):
    """Run `config.iterations` Adam steps of the setup's loss.

    ``setup`` provides ``sample(rng, batch_size) -> (batch, assembler)``;
    with batch_size 0 it must return the full deterministic batch. The
    trained parameters and the TrainingLog are returned; on a NonFinite
    abort the last good checkpoint stays on disk.
    """
    rng = np.random.default_rng(config.seed)
    flat = flatten_params(params)
    state = AdamState.zeros(flat.size)
    log = TrainingLog()
    totals = []
    window_medians = []
    ckpt_path = os.path.join(out_dir, checkpoint_name) if out_dir else None
    start = time.perf_counter()

    for it in range(1, config.iterations + 1):
        batch, assembler = setup.sample(rng, config.batch_size)
        # on a NonFiniteLoss abort the last periodic checkpoint stays on disk
        total, grad, breakdown = loss_param_gradient(params, batch, assembler)
        flat = adam_step(flat, grad, state, config)
        set_from_flat(params, flat)
        totals.append(total)

        if it % config.log_every == 0 or it == 1 or it == config.iterations:
            log.append(
                LogRecord(
                    iteration=it,
                    total=total,
                    pde_residual=breakdown.pde_residual,
                    normal_grad_penalty=breakdown.normal_grad_penalty,
                    hessian_penalty=breakdown.hessian_penalty,
                    initial_misfit=breakdown.initial_misfit,
                    wall_seconds=time.perf_counter() - start,
                )
            )
        if ckpt_path and config.checkpoint_every and it % config.checkpoint_every == 0:
            save_checkpoint(params, ckpt_path)

        if len(totals) >= config.divergence_window:
            med = float(np.median(totals[-config.divergence_window :]))
            if window_medians and med > config.divergence_factor * min(window_medians):
                if ckpt_path:
                    save_checkpoint(params, ckpt_path)
                raise TrainingDiverged(
                    f"windowed-median loss {med:.3e} exceeds "
                    f"{config.divergence_factor}x the best window"
                )
            window_medians.append(med)
            totals = []

    if ckpt_path:
        save_checkpoint(params, ckpt_path)
    return params, log


class FixedBatchSetup:
    """Minimal setup wrapping one precomputed (batch, assembler) pair."""

    def __init__(self, batch, assembler):
        self.batch = np.asarray(batch, dtype=float)
        self.assembler = assembler

    def sample(self, rng, batch_size):
        return self.batch, self.assembler
