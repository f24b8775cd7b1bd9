"""Benchmark problems, error metrics, and the prior-estimate verifier.

The registry ships the four experiments: a manufactured solution on the
sphere in continuous time, the heating-a-torus run, and two discrete
(implicit Runge-Kutta) sphere runs, one with a rescaled T = 3 horizon.

Manufactured forcings are produced by the geometry operator oracle
(provenance "oracle-manufactured") instead of hand algebra; cases with
spherical-harmonic structure also carry an analytic cross-check (for
u = x1 x2 x3 e^t on the unit sphere, lap_surface(u) = -12 u, hence
f = 13 u).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import network, sampling
from .errors import (
    NoExactSolution,
    QuadratureTooCoarse,
    UnknownProblem,
    ZeroDenominator,
)
from .geometry import (
    Sphere,
    Torus,
    quadrature,
    surface_operator_oracle,
)
from .irk import gauss_legendre_tableau
from .residuals import (
    UNIT_WEIGHTS,
    ContinuousAssembler,
    DiscreteAssembler,
    PdeRhs,
    rescale_time,
)

# heat source of the torus benchmark: ball around a core-circle point
TORUS_SOURCE_CENTER = np.array([0.0, 1.0, 0.0])
TORUS_SOURCE_RADIUS = 0.25
TORUS_SOURCE_STRENGTH = 100.0
DEFAULT_MOLLIFIER_WIDTH = 0.05


@dataclass
class ExactSolution:
    """Closed-form space-time solution used to manufacture benchmarks."""

    name: str
    u: object  # (N, 3), t -> (N,)
    u_t: object  # (N, 3), t -> (N,)
    analytic_rhs: object = None  # optional cross-check forcing on the sphere


def _sin_solution():
    return ExactSolution(
        name="x1*sin(t*x2)+x3",
        u=lambda X, t: X[:, 0] * np.sin(np.asarray(t) * X[:, 1]) + X[:, 2],
        u_t=lambda X, t: X[:, 0] * X[:, 1] * np.cos(np.asarray(t) * X[:, 1]),
    )


def _xyz_exp_solution():
    def u(X, t):
        return X[:, 0] * X[:, 1] * X[:, 2] * np.exp(np.asarray(t))

    # degree-3 spherical harmonic: lap_surface(u) = -12 u on the unit sphere
    return ExactSolution(
        name="x1*x2*x3*exp(t)",
        u=u,
        u_t=u,
        analytic_rhs=lambda X, t: 13.0 * u(X, t),
    )


def manufactured_rhs(surface, exact, h=1e-4):
    """Forcing f = d_t u - lap_surface(u) computed with the operator oracle.

    Rows sharing a time value are evaluated together, so tensor-product
    and stage-time layouts stay vectorized.
    """

    def fn(X, t):
        X = np.asarray(X, dtype=float)
        t_arr = np.broadcast_to(np.asarray(t, dtype=float), (len(X),))
        out = np.empty(len(X))
        for tv in np.unique(t_arr):
            mask = t_arr == tv
            lb = surface_operator_oracle(
                surface, lambda P, tv=tv: exact.u(P, tv), X[mask], "lb", h=h
            )
            out[mask] = exact.u_t(X[mask], tv) - lb
        return out

    return PdeRhs(fn=fn, provenance="oracle-manufactured")


def torus_forcing(x, eps=DEFAULT_MOLLIFIER_WIDTH):
    """Regularized heat source 100 * chi_G, G the ball at (0, 1, 0).

    ``eps`` is the tanh mollifier width; eps = 0 selects the sharp
    indicator. The source circle (the tube section closest to the
    centre) sits exactly at the mollifier midpoint f = 50.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    dist = np.linalg.norm(pts - TORUS_SOURCE_CENTER, axis=1)
    if eps == 0:
        f = TORUS_SOURCE_STRENGTH * (dist <= TORUS_SOURCE_RADIUS).astype(float)
    else:
        f = TORUS_SOURCE_STRENGTH * 0.5 * (
            1.0 + np.tanh((TORUS_SOURCE_RADIUS - dist) / eps)
        )
    return float(f[0]) if single else f


def forcing_mass(surface, eps=DEFAULT_MOLLIFIER_WIDTH, resolution=512):
    """Integral of the torus forcing over the surface (the heat input rate)."""
    return quadrature(surface, lambda X: torus_forcing(X, eps), resolution)


@dataclass
class ProblemSpec:
    """One benchmark problem: surface, PDE data, and default budgets."""

    name: str
    surface: object
    mode: str  # "continuous" | "discrete"
    horizon: float
    rhs: PdeRhs
    u0: object
    exact: ExactSolution = None
    n_space: int = 500
    n_times: int = 100
    n_u: int = 50_000
    n_0: int = 1_000
    n_c: int = 10_000
    lhs_sampling: bool = False
    q: int = 8
    t_ref: float = None  # reference horizon when rescaling (T >= 1, discrete)
    seed: int = 0
    # conditioning: the network learns u/output_scale against a forcing
    # f/output_scale (the PDE is linear); predictions are scaled back, so
    # every reported quantity stays in physical units
    output_scale: float = 1.0

    def layer_sizes(self):
        if self.mode == "continuous":
            return network.continuous_layer_sizes()
        return network.discrete_layer_sizes(self.q)

    def collocation(self, n_space=None, n_times=None, n_u=None, n_0=None,
                    n_c=None, seed=None):
        """Build the problem's collocation set, optionally at desk scale."""
        seed = self.seed if seed is None else seed
        n_c = self.n_c if n_c is None else n_c
        if self.mode == "discrete":
            return sampling.spatial_collocation(
                self.surface, n_space or self.n_space, n_c, seed
            )
        if self.lhs_sampling:
            return sampling.lhs_collocation(
                self.surface, n_u or self.n_u, self.n_0 if n_0 is None else n_0,
                n_c, self.horizon, seed,
            )
        return sampling.tensor_collocation(
            self.surface,
            n_space or self.n_space,
            n_times or self.n_times,
            self.n_0 if n_0 is None else n_0,
            n_c,
            self.horizon,
            seed,
        )


def _problem_sphere_continuous():
    surface = Sphere(1.0)
    exact = _sin_solution()
    return ProblemSpec(
        name="sphere-continuous",
        surface=surface,
        mode="continuous",
        horizon=1.0,
        rhs=manufactured_rhs(surface, exact),
        u0=lambda X: exact.u(X, 0.0),
        exact=exact,
        n_space=500,
        n_times=100,
        n_u=50_000,
    )


def _problem_torus_heating(eps=DEFAULT_MOLLIFIER_WIDTH):
    surface = Torus(1.0, 0.25)
    return ProblemSpec(
        name="torus-heating",
        surface=surface,
        mode="continuous",
        horizon=3.0,
        rhs=PdeRhs(fn=lambda X, t: torus_forcing(X, eps), provenance="analytic"),
        u0=lambda X: np.zeros(len(X)),
        exact=None,
        n_u=50_000,
        lhs_sampling=True,
        # the heated field grows to ~12 while a fresh network outputs O(1)
        output_scale=10.0,
    )


def _problem_discrete_short():
    surface = Sphere(1.0)
    exact = _xyz_exp_solution()
    return ProblemSpec(
        name="sphere-discrete-short",
        surface=surface,
        mode="discrete",
        horizon=0.5,
        rhs=manufactured_rhs(surface, exact),
        u0=lambda X: exact.u(X, 0.0),
        exact=exact,
        n_space=500,
        q=8,
    )


def _problem_discrete_long(variant="xyz-exp"):
    surface = Sphere(1.0)
    exact = _xyz_exp_solution() if variant == "xyz-exp" else _sin_solution()
    return ProblemSpec(
        name="sphere-discrete-long",
        surface=surface,
        mode="discrete",
        horizon=3.0,
        rhs=manufactured_rhs(surface, exact),
        u0=lambda X: exact.u(X, 0.0),
        exact=exact,
        n_space=500,
        q=8,
        t_ref=0.5,
    )


_REGISTRY = {
    "sphere-continuous": _problem_sphere_continuous,
    "torus-heating": _problem_torus_heating,
    "sphere-discrete-short": _problem_discrete_short,
    "sphere-discrete-long": _problem_discrete_long,
}


def registry():
    """Names of the shipped benchmark problems."""
    return sorted(_REGISTRY)


def get_problem(name, exact_variant=None):
    """Look up a problem; sphere-discrete-long carries two exact solutions.

    ``exact_variant`` is "xyz-exp" (default) or "sin" and only applies to
    sphere-discrete-long, which ships with both manufactured solutions.
    """
    if name not in _REGISTRY:
        raise UnknownProblem(f"unknown problem {name!r}; known: {registry()}")
    if name == "sphere-discrete-long" and exact_variant is not None:
        if exact_variant not in ("xyz-exp", "sin"):
            raise UnknownProblem(f"unknown exact variant {exact_variant!r}")
        return _problem_discrete_long(exact_variant)
    return _REGISTRY[name]()


# ---------------------------------------------------------------------------
# training setups (assembler factories consumed by trainer.train)


class ContinuousTrainingSetup:
    """Precomputed arrays plus mini-batch sampling for continuous problems."""

    def __init__(self, problem, colloc, weights=UNIT_WEIGHTS):
        self.problem = problem
        self.weights = tuple(weights)
        xs = colloc.interior[:, :3]
        ts = colloc.interior[:, 3]
        self.xs, self.ts = xs, ts
        self.norm_int = problem.surface.normal(xs)
        self.f_values = problem.rhs(xs, ts) / problem.output_scale
        self.x0 = colloc.initial
        self.norm_0 = (
            problem.surface.normal(colloc.initial) if len(colloc.initial) else
            np.zeros((0, 3))
        )
        self.u0_values = (
            np.asarray(problem.u0(colloc.initial), dtype=float) / problem.output_scale
            if len(colloc.initial)
            else np.zeros(0)
        )
        self.horizon = problem.horizon
        self._full = None

    def _build(self, idx):
        xs = self.xs[idx]
        batch = np.vstack(
            [
                np.column_stack([xs, self.ts[idx] / self.horizon]),
                np.column_stack([self.x0, np.zeros(len(self.x0))]),
            ]
        )
        normals = np.vstack([self.norm_int[idx], self.norm_0])
        asm = ContinuousAssembler(
            len(xs), normals, self.f_values[idx], self.u0_values,
            self.horizon, self.weights,
        )
        return batch, asm

    def sample(self, rng, batch_size):
        if not batch_size or batch_size >= len(self.xs):
            if self._full is None:
                self._full = self._build(np.arange(len(self.xs)))
            return self._full
        idx = rng.choice(len(self.xs), size=batch_size, replace=False)
        return self._build(idx)


class DiscreteTrainingSetup:
    """Stage-time forcing and IRK assembler for discrete problems.

    For horizons T >= 1 the problem is rescaled to [0, t_ref]; stage
    forcings are evaluated at the original stage times c_j * T and the
    assembler carries the T/t_ref operator factor.
    """

    def __init__(self, problem, colloc, weights=UNIT_WEIGHTS):
        self.problem = problem
        self.weights = tuple(weights)
        self.tableau = gauss_legendre_tableau(problem.q)
        if problem.t_ref is not None:
            scaling = rescale_time(problem.horizon, problem.t_ref)
            self.dt = scaling.reference
            self.operator_scale = scaling.factor
        else:
            self.dt = problem.horizon
            self.operator_scale = 1.0
        pts = colloc.interior
        self.points = pts
        self.normals = problem.surface.normal(pts)
        stage_times = self.tableau.c * self.dt * self.operator_scale
        self.stage_f = np.column_stack(
            [problem.rhs(pts, tv) for tv in stage_times]
        ) / problem.output_scale
        self.u0_values = np.asarray(problem.u0(pts), dtype=float) / problem.output_scale
        self._full = None

    def _build(self, idx):
        asm = DiscreteAssembler(
            self.normals[idx],
            self.tableau,
            self.dt,
            self.stage_f[idx],
            self.u0_values[idx],
            self.weights,
            self.operator_scale,
        )
        return self.points[idx], asm

    def sample(self, rng, batch_size):
        if not batch_size or batch_size >= len(self.points):
            if self._full is None:
                self._full = self._build(np.arange(len(self.points)))
            return self._full
        idx = rng.choice(len(self.points), size=batch_size, replace=False)
        return self._build(idx)


def training_setup(problem, colloc, weights=UNIT_WEIGHTS):
    if problem.mode == "continuous":
        return ContinuousTrainingSetup(problem, colloc, weights)
    return DiscreteTrainingSetup(problem, colloc, weights)


# ---------------------------------------------------------------------------
# evaluation


def predict(params, problem, points, t):
    """Network prediction u_h(x, t) under the problem's conventions.

    Continuous mode feeds (x, t/T). Discrete mode returns the matching
    head when t hits a stage or final node and otherwise interpolates
    cubically across head times.
    """
    points = np.asarray(points, dtype=float)
    if problem.mode == "continuous":
        batch = np.column_stack(
            [points, np.full(len(points), t / problem.horizon)]
        )
        return problem.output_scale * network.forward(params, batch)[:, 0]
    tableau = gauss_legendre_tableau(problem.q)
    if problem.t_ref is not None:
        scaling = rescale_time(problem.horizon, problem.t_ref)
        dt = scaling.reference
        t_scaled = scaling.scaled_time(t)
    else:
        dt = problem.horizon
        t_scaled = t
    head_times = np.append(tableau.c * dt, dt)
    values = problem.output_scale * network.forward(params, points)  # (N, q+1)
    hit = np.nonzero(np.abs(head_times - t_scaled) < 1e-12)[0]
    if len(hit):
        return values[:, hit[0]]
    return _cubic_interpolate(head_times, values, t_scaled)


def _cubic_interpolate(nodes, values, t):
    """Lagrange cubic through the four nodes nearest to t."""
    order = np.argsort(np.abs(nodes - t))[: min(4, len(nodes))]
    sel = np.sort(order)
    out = np.zeros(values.shape[0])
    for i in sel:
        w = 1.0
        for j in sel:
            if j != i:
                w *= (t - nodes[j]) / (nodes[i] - nodes[j])
        out += w * values[:, i]
    return out


@dataclass
class ErrorReport:
    """Relative errors at requested times for one trained network."""

    rows: list = field(default_factory=list)  # (t, err, n_eval, seed)

    def append(self, t, err, n_eval, seed):
        self.rows.append((float(t), float(err), int(n_eval), int(seed)))

    def to_csv(self, path):
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "err", "n_eval", "seed"])
            for t, err, n_eval, seed in self.rows:
                writer.writerow([repr(t), repr(err), n_eval, seed])


def relative_error(params, problem, eval_points, t):
    """Relative l2 error of the prediction against the exact solution."""
    if problem.exact is None:
        raise NoExactSolution(f"{problem.name} has no exact solution")
    eval_points = np.asarray(eval_points, dtype=float)
    u_pred = predict(params, problem, eval_points, t)
    u_true = np.asarray(problem.exact.u(eval_points, t), dtype=float)
    denom = float(np.sum(u_true**2))
    if denom < 1e-30:
        raise ZeroDenominator("exact solution vanishes on the evaluation set")
    return float(np.sqrt(np.sum((u_pred - u_true) ** 2) / denom))


def heat_content(params, problem, t, resolution=256):
    """Integral of the predicted solution over the surface at time t."""
    return quadrature(
        problem.surface,
        lambda X: predict(params, problem, X, t),
        resolution,
    )


def dump_fields_csv(path, points, t, u_pred, u_exact=None):
    """Field dump with columns x,y,z,t,u_pred,u_exact,abs_err."""
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z", "t", "u_pred", "u_exact", "abs_err"])
        for i, p in enumerate(points):
            row = [
                repr(float(p[0])),
                repr(float(p[1])),
                repr(float(p[2])),
                repr(float(t)),
                repr(float(u_pred[i])),
            ]
            if u_exact is not None:
                row += [
                    repr(float(u_exact[i])),
                    repr(abs(float(u_pred[i]) - float(u_exact[i]))),
                ]
            else:
                row += ["", ""]
            writer.writerow(row)


# ---------------------------------------------------------------------------
# numerical verification of the prior estimates


@dataclass
class TheoremTrial:
    """Ambient fields for one randomized trial of the three estimates.

    ``scalar_u`` and ``vector_v`` are smooth R^3 fields standing in for a
    network's raw output (generally not constant along normals); the
    targets ``vector_f`` and ``scalar_g`` play the right-hand sides.
    """

    scalar_u: object
    vector_v: object
    vector_f: object
    scalar_g: object


@dataclass
class TheoremRow:
    estimate: int
    lhs: float
    rhs: float
    constant: float
    margin: float


def random_trig_field(rng, vector=False, terms=3, max_freq=2):
    """Random low-order trigonometric polynomial field on R^3."""

    def make_scalar():
        coefs = rng.uniform(-1.0, 1.0, size=terms)
        freqs = rng.integers(0, max_freq + 1, size=(terms, 3))
        phases = rng.integers(0, 2, size=(terms, 3))  # 0 -> cos, 1 -> sin

        def fn(X):
            X = np.asarray(X, dtype=float)
            out = np.zeros(len(X))
            for m in range(terms):
                term = np.full(len(X), coefs[m])
                for i in range(3):
                    arg = freqs[m, i] * X[:, i]
                    term = term * (np.sin(arg) if phases[m, i] else np.cos(arg))
                out += term
            return out

        return fn

    if not vector:
        return make_scalar()
    comps = [make_scalar() for _ in range(3)]
    return lambda X: np.column_stack([c(X) for c in comps])


def _fd_gradient(fn, X, h):
    grad = np.empty((len(X), 3))
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        grad[:, k] = (np.asarray(fn(X + e)) - np.asarray(fn(X - e))) / (2 * h)
    return grad


def _fd_jacobian(fn, X, h):
    jac = np.empty((len(X), 3, 3))
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        jac[:, :, k] = (np.asarray(fn(X + e)) - np.asarray(fn(X - e))) / (2 * h)
    return jac


def _fd_hessian(fn, X, h):
    hess = np.empty((len(X), 3, 3))
    f0 = np.asarray(fn(X))
    for k in range(3):
        ek = np.zeros(3)
        ek[k] = h
        hess[:, k, k] = (np.asarray(fn(X + ek)) - 2 * f0 + np.asarray(fn(X - ek))) / h**2
        for l in range(k + 1, 3):
            el = np.zeros(3)
            el[l] = h
            cross = (
                np.asarray(fn(X + ek + el))
                - np.asarray(fn(X + ek - el))
                - np.asarray(fn(X - ek + el))
                + np.asarray(fn(X - ek - el))
            ) / (4 * h**2)
            hess[:, k, l] = cross
            hess[:, l, k] = cross
    return hess


def _quad_nodes(surface, resolution):
    t = (np.arange(resolution) + 0.5) / resolution
    A, B = np.meshgrid(t, t, indexing="ij")
    ab = np.column_stack([A.ravel(), B.ravel()])
    pts = surface.chart(ab)
    w = surface.chart_area_element(ab) / resolution**2
    return pts, w


def _estimate_sides(surface, trial, resolution, h):
    """lhs/rhs of the three estimates as discrete L2 norms at one resolution."""
    X, w = _quad_nodes(surface, resolution)
    n = surface.normal(X)

    def norm_scalar(v):
        return float(np.sqrt(np.sum(w * v**2)))

    def norm_vector(v):
        return float(np.sqrt(np.sum(w * np.sum(v**2, axis=1))))

    curvature = surface.mean_curvature(X, h=h)
    constant = max(1.0, 2.0 * float(np.max(np.abs(curvature))))

    grad_u = _fd_gradient(trial.scalar_u, X, h)
    normal_der = np.einsum("ij,ij->i", n, grad_u)
    hess_u = _fd_hessian(trial.scalar_u, X, h)
    lap_u = np.einsum("iaa->i", hess_u)
    nhn = np.einsum("ia,iab,ib->i", n, hess_u, n)
    f_vals = np.asarray(trial.vector_f(X), dtype=float)
    g_vals = np.asarray(trial.scalar_g(X), dtype=float)

    lhs1 = norm_vector(
        surface_operator_oracle(surface, trial.scalar_u, X, "grad", h=h) - f_vals
    )
    rhs1 = norm_vector(grad_u - f_vals) + norm_scalar(normal_der)

    jac_v = _fd_jacobian(trial.vector_v, X, h)
    div_v = np.einsum("iaa->i", jac_v)
    njn = np.einsum("ia,iab,ib->i", n, jac_v, n)
    lhs2 = norm_scalar(
        surface_operator_oracle(surface, trial.vector_v, X, "div", h=h) - g_vals
    )
    rhs2 = norm_scalar(div_v - g_vals) + norm_scalar(njn)

    lhs3 = norm_scalar(
        surface_operator_oracle(surface, trial.scalar_u, X, "lb", h=h) - g_vals
    )
    rhs3 = constant * (
        norm_scalar(lap_u - g_vals) + norm_scalar(normal_der) + norm_scalar(nhn)
    )
    return [(1, lhs1, rhs1), (2, lhs2, rhs2), (3, lhs3, rhs3)], constant


def verify_theorem(surface, trials, resolution=128, h=1e-4):
    """Check the three prior estimates on a batch of trials.

    All right-hand terms use plain finite-difference derivatives of the
    ambient fields; left-hand intrinsic quantities come from the surface
    operator oracle. The constant is max(1, 2 sup|H|) over the quadrature
    nodes. Raises QuadratureTooCoarse when halving the resolution moves
    either side of any estimate by more than 1%.
    """
    rows = []
    for trial in trials:
        sides, constant = _estimate_sides(surface, trial, resolution, h)
        coarse, _ = _estimate_sides(surface, trial, resolution // 2, h)
        for (est, lhs, rhs), (_, lhs_c, rhs_c) in zip(sides, coarse):
            # sides at the finite-difference noise floor are converged by
            # construction; the relative test only makes sense above it
            scale = max(lhs, rhs, 1e-3)
            if abs(lhs - lhs_c) > 0.01 * scale or abs(rhs - rhs_c) > 0.01 * scale:
                raise QuadratureTooCoarse(
                    f"estimate {est} not converged at resolution {resolution}"
                )
            rows.append(
                TheoremRow(
                    estimate=est,
                    lhs=lhs,
                    rhs=rhs,
                    constant=constant,
                    margin=rhs * (1.0 + 1e-6) + 1e-8 - lhs,
                )
            )
    return rows


def random_trials(rng, count):
    """Randomized trig-polynomial trials, non-constant along normals."""
    return [
        TheoremTrial(
            scalar_u=random_trig_field(rng),
            vector_v=random_trig_field(rng, vector=True),
            vector_f=random_trig_field(rng, vector=True),
            scalar_g=random_trig_field(rng),
        )
        for _ in range(count)
    ]


def true_pde_residual_rms(params, problem, points, times, h=1e-4):
    """RMS of the intrinsic PDE residual measured with the operator oracle.

    Evaluates |d_t u_h - lap_surface(u_h) - f| at fresh points for the raw
    network head u_h (no output rescaling) against the problem's forcing;
    the intrinsic Laplacian extends the network restriction by the closest
    point map. This is the left-hand side of the loss-as-indicator bound
    for a loss assembled from the same raw pairing.
    """
    surface = problem.surface
    points = np.asarray(points, dtype=float)
    res = []
    for tv in np.unique(np.asarray(times, dtype=float)):
        from .diffengine import jet_batch

        batch = np.column_stack(
            [points, np.full(len(points), tv / problem.horizon)]
        )
        jets = jet_batch(params, batch, hess_dims=3)
        dt_u = jets.grad[:, 0, 3] / problem.horizon
        lb = surface_operator_oracle(
            surface,
            lambda P, tv=tv: network.forward(
                params, np.column_stack([P, np.full(len(P), tv / problem.horizon)])
            )[:, 0],
            points,
            "lb",
            h=h,
        )
        f = problem.rhs(points, tv)
        res.append(dt_u - lb - f)
    res = np.concatenate(res)
    return float(np.sqrt(np.mean(res**2)))
