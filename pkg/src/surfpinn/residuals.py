"""Surface-penalty loss functions assembled from network jets.

Every loss combines a PDE residual with the two surface-operator
penalties that make the mean square error an indicator of the intrinsic
residual: the squared normal derivative |<grad u, n>|^2 and the squared
normal-normal second derivative |n^T hess(u) n|^2. Stationary,
continuous-time and discrete-time (implicit Runge-Kutta) variants share
this structure.

Each assembler produces both the loss breakdown and the exact adjoint
seeds of the total with respect to every jet entry, which is what the
differentiation engine's reverse sweep consumes. Unit weights reproduce
the plain sum of mean-square terms; the Hessian-penalty weight is a
tuning knob (dropping it can speed up convergence on very smooth
surfaces).

Sign convention for the Runge-Kutta couplings: the stage reconstruction
uses the standard update u^{n+1} = u^n + dt * sum_j b_j (lap u + f), so
the recovered initial values are

    u_j^n = u^{n+c_j} - dt * sum_k a_jk N[u^{n+c_k}].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidReference, NonFiniteLoss, TableauMismatch

UNIT_WEIGHTS = (1.0, 1.0, 1.0, 1.0)


@dataclass
class LossBreakdown:
    """Non-negative loss components and their weighted total."""

    pde_residual: float
    normal_grad_penalty: float
    hessian_penalty: float
    initial_misfit: float
    total: float
    weights: tuple

    @classmethod
    def combine(cls, pde, ng, hess, init, weights):
        w = tuple(float(v) for v in weights)
        total = w[0] * pde + w[1] * ng + w[2] * hess + w[3] * init
        return cls(
            pde_residual=float(pde),
            normal_grad_penalty=float(ng),
            hessian_penalty=float(hess),
            initial_misfit=float(init),
            total=float(total),
            weights=w,
        )


@dataclass
class PdeRhs:
    """Forcing term f(x, t) with a provenance tag.

    ``fn`` maps an (N, 3) point block and a scalar or (N,) time to (N,)
    values; provenance is "analytic" or "oracle-manufactured".
    """

    fn: object
    provenance: str = "analytic"

    def __call__(self, points, t):
        return np.asarray(self.fn(points, t), dtype=float)


def _hess_coef(jets, normals):
    """Per-pair contraction coefficients for n^T H n in packed storage."""
    mult = np.where(jets.k_idx == jets.l_idx, 1.0, 2.0)
    return mult * normals[:, jets.k_idx] * normals[:, jets.l_idx]


def _check_finite(total):
    if not np.isfinite(total):
        raise NonFiniteLoss(f"loss evaluated to {total}")


class StationaryAssembler:
    """Loss for the stationary problem lap_surface(u) = f on a surface."""

    hess_dims = 3

    def __init__(self, normals, f_values, weights=UNIT_WEIGHTS):
        self.normals = np.asarray(normals, dtype=float)
        self.f_values = np.asarray(f_values, dtype=float)
        self.weights = tuple(weights)

    def assemble(self, jets):
        from .diffengine import JetSeeds

        n = jets.n_points
        lr, lg, lh, _ = self.weights
        lap = jets.laplacian()[:, 0]
        resid = lap - self.f_values
        ng = np.einsum("nk,nk->n", jets.grad[:, 0, :], self.normals)
        coef = _hess_coef(jets, self.normals)
        hn = np.einsum("np,np->n", jets.hess[:, 0, :], coef)

        breakdown = LossBreakdown.combine(
            np.mean(resid**2), np.mean(ng**2), np.mean(hn**2), 0.0, self.weights
        )
        _check_finite(breakdown.total)

        seeds = JetSeeds.zeros_like(jets)
        diag = jets.k_idx == jets.l_idx
        seeds.hess[:, 0, diag] += (lr * 2.0 / n) * resid[:, None]
        seeds.hess[:, 0, :] += (lh * 2.0 / n) * hn[:, None] * coef
        seeds.grad[:, 0, :] = (lg * 2.0 / n) * ng[:, None] * self.normals
        return breakdown.total, breakdown, seeds


class ContinuousAssembler:
    """Space-time loss for d_t u = lap_surface(u) + f with initial data.

    The batch stacks interior rows (x, t/T) first and initial rows (x, 0)
    after them. The time input is t/T, so the time derivative carries a
    1/T chain factor. Initial points are ordinary on-surface points and
    participate in both penalties in addition to the initial misfit.
    """

    hess_dims = 3

    def __init__(self, n_interior, normals, f_values, u0_values, horizon,
                 weights=UNIT_WEIGHTS):
        self.n_interior = int(n_interior)
        self.normals = np.asarray(normals, dtype=float)
        self.f_values = np.asarray(f_values, dtype=float)
        self.u0_values = np.asarray(u0_values, dtype=float)
        self.horizon = float(horizon)
        self.weights = tuple(weights)

    def assemble(self, jets):
        from .diffengine import JetSeeds

        ni = self.n_interior
        n_all = jets.n_points
        n0 = n_all - ni
        lr, lg, lh, li = self.weights

        lap = jets.laplacian()[:, 0]
        dt_u = jets.grad[:ni, 0, 3] / self.horizon
        resid = dt_u - lap[:ni] - self.f_values
        ng = np.einsum("nk,nk->n", jets.grad[:, 0, :3], self.normals)
        coef = _hess_coef(jets, self.normals)
        hn = np.einsum("np,np->n", jets.hess[:, 0, :], coef)
        misfit = jets.value[ni:, 0] - self.u0_values

        breakdown = LossBreakdown.combine(
            np.mean(resid**2),
            np.mean(ng**2),
            np.mean(hn**2),
            np.mean(misfit**2) if n0 else 0.0,
            self.weights,
        )
        _check_finite(breakdown.total)

        seeds = JetSeeds.zeros_like(jets)
        diag = jets.k_idx == jets.l_idx
        seeds.grad[:ni, 0, 3] = (lr * 2.0 / (ni * self.horizon)) * resid
        seeds.hess[:ni, 0, diag] -= (lr * 2.0 / ni) * resid[:, None]
        seeds.grad[:, 0, :3] += (lg * 2.0 / n_all) * ng[:, None] * self.normals
        seeds.hess[:, 0, :] += (lh * 2.0 / n_all) * hn[:, None] * coef
        if n0:
            seeds.value[ni:, 0] = (li * 2.0 / n0) * misfit
        return breakdown.total, breakdown, seeds


class DiscreteAssembler:
    """Implicit Runge-Kutta loss: every head must reconstruct u0.

    Head j < q is the stage value u^{n+c_j}, head q the final value
    u^{n+1}. With N[w] = scale * (lap w + f(x, t_stage)), the stage
    predictors u_j^n = head_j - dt * sum_k a_jk N_k (weights b for the
    final head) are all driven to the initial data; the initial misfit is
    merged into the residual term. Both penalties apply to every head.

    ``operator_scale`` carries the T/T_ref factor of the time-rescaled
    problem (1 when no rescaling is applied).
    """

    hess_dims = 3

    def __init__(self, normals, tableau, dt, stage_f_values, u0_values,
                 weights=UNIT_WEIGHTS, operator_scale=1.0):
        self.normals = np.asarray(normals, dtype=float)
        self.tableau = tableau
        self.dt = float(dt)
        self.stage_f = np.asarray(stage_f_values, dtype=float)  # (N, q)
        self.u0_values = np.asarray(u0_values, dtype=float)
        self.weights = tuple(weights)
        self.operator_scale = float(operator_scale)
        # stage couplings for all q+1 heads
        self.coupling = np.vstack([tableau.a, tableau.b])  # (q+1, q)

    def assemble(self, jets):
        from .diffengine import JetSeeds

        q = self.tableau.q
        m = q + 1
        if jets.n_heads != m:
            raise TableauMismatch(
                f"network has {jets.n_heads} heads, tableau needs {m}"
            )
        n = jets.n_points
        lr, lg, lh, _ = self.weights
        scale = self.dt * self.operator_scale

        lap = jets.laplacian()  # (N, m)
        stage_n = lap[:, :q] + self.stage_f  # N[u^{n+c_k}] / operator_scale
        pred = jets.value - scale * stage_n @ self.coupling.T
        resid = pred - self.u0_values[:, None]  # (N, m)

        ng = np.einsum("nmk,nk->nm", jets.grad, self.normals)
        coef = _hess_coef(jets, self.normals)
        hn = np.einsum("nmp,np->nm", jets.hess, coef)

        breakdown = LossBreakdown.combine(
            np.mean(resid**2), np.mean(ng**2), np.mean(hn**2), 0.0, self.weights
        )
        _check_finite(breakdown.total)

        seeds = JetSeeds.zeros_like(jets)
        diag = jets.k_idx == jets.l_idx
        c_res = lr * 2.0 / (n * m)
        seeds.value[:, :] = c_res * resid
        # d resid / d lap_k = -scale * coupling[j, k] for stage heads k < q
        lap_bar = -c_res * scale * (resid @ self.coupling)  # (N, q)
        for p in np.nonzero(diag)[0]:
            seeds.hess[:, :q, p] += lap_bar
        c_pen = 2.0 / (n * m)
        seeds.grad += (lg * c_pen) * ng[:, :, None] * self.normals[:, None, :]
        seeds.hess += (lh * c_pen) * hn[:, :, None] * coef[:, None, :]
        return breakdown.total, breakdown, seeds


def stationary_loss(params, points, normals, f_values, weights=UNIT_WEIGHTS):
    """Mean-square stationary loss |lap u - f|^2 + penalties at points."""
    from .diffengine import jet_batch

    asm = StationaryAssembler(normals, f_values, weights)
    jets = jet_batch(params, points, hess_dims=asm.hess_dims)
    _, breakdown, _ = asm.assemble(jets)
    return breakdown


def continuous_loss(params, surface, interior_xt, initial_x, rhs, u0,
                    horizon, weights=UNIT_WEIGHTS):
    """Continuous-time space-time loss from a collocation set.

    ``interior_xt`` has columns (x, y, z, t); ``rhs`` and ``u0`` are
    callables evaluated here once per call (training precomputes them).
    """
    from .diffengine import jet_batch

    interior_xt = np.asarray(interior_xt, dtype=float)
    initial_x = np.asarray(initial_x, dtype=float)
    xs = interior_xt[:, :3]
    ts = interior_xt[:, 3]
    f_values = rhs(xs, ts)
    u0_values = np.asarray(u0(initial_x), dtype=float) if len(initial_x) else np.zeros(0)
    normals = np.vstack([surface.normal(xs), surface.normal(initial_x)]) \
        if len(initial_x) else surface.normal(xs)
    batch = np.vstack(
        [
            np.column_stack([xs, ts / horizon]),
            np.column_stack([initial_x, np.zeros(len(initial_x))]),
        ]
    )
    asm = ContinuousAssembler(
        len(xs), normals, f_values, u0_values, horizon, weights
    )
    jets = jet_batch(params, batch, hess_dims=asm.hess_dims)
    _, breakdown, _ = asm.assemble(jets)
    return breakdown


def discrete_loss(params, surface, points, tableau, dt, stage_f_values,
                  u0_values, weights=UNIT_WEIGHTS, operator_scale=1.0):
    """Implicit Runge-Kutta loss at spatial collocation points."""
    from .diffengine import jet_batch

    points = np.asarray(points, dtype=float)
    asm = DiscreteAssembler(
        surface.normal(points), tableau, dt, stage_f_values, u0_values,
        weights, operator_scale,
    )
    if params.output_dim != tableau.q + 1:
        raise TableauMismatch(
            f"network has {params.output_dim} heads, tableau needs {tableau.q + 1}"
        )
    jets = jet_batch(params, points, hess_dims=asm.hess_dims)
    _, breakdown, _ = asm.assemble(jets)
    return breakdown


@dataclass(frozen=True)
class TimeRescaling:
    """Transform t_ref = (t/T) * reference for horizons T >= 1.

    The rescaled problem reads d_t u = (T/T_ref) * (lap u + f) on
    [0, reference] with the forcing evaluated at the original time
    t = t_ref * T / reference; exact-solution comparisons undo the map.
    """

    horizon: float
    reference: float

    @property
    def factor(self):
        return self.horizon / self.reference

    def original_time(self, t_scaled):
        return np.asarray(t_scaled, dtype=float) * self.factor

    def scaled_time(self, t_original):
        return np.asarray(t_original, dtype=float) / self.factor


def rescale_time(horizon, reference):
    """Build the time rescaling; reference must lie in (0, 1), T >= 1."""
    if not 0.0 < reference < 1.0:
        raise InvalidReference(f"reference horizon {reference} not in (0, 1)")
    if horizon < 1.0:
        raise InvalidReference("rescaling is for horizons T >= 1")
    return TimeRescaling(horizon=float(horizon), reference=float(reference))
