"""Collocation sampling on surfaces and on surface x time cylinders.

Two generators cover every benchmark surface: a Fibonacci lattice mapped
through coordinate scaling for sphere-like surfaces, and seeded Latin
hypercube sampling through the chart for the torus. Evaluation sets use
a separate generator stream (plus a fixed irrational rotation for the
lattice) so they never coincide with training points.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InvalidCount, NotSphereHomeomorphic
from .geometry import Ellipsoid, Sphere

GOLDEN_RATIO = (1.0 + np.sqrt(5.0)) / 2.0
# any irrational angle keeps the rotated evaluation lattice disjoint
# from the training lattice
EVAL_ROTATION = np.sqrt(2.0)


@dataclass
class CollocationSet:
    """Training and evaluation points for one problem instance.

    ``interior`` has columns (x, y, z, t) for continuous-time problems
    and (x, y, z) for discrete-time problems, where time lives in the
    Runge-Kutta stages instead.
    """

    interior: np.ndarray
    initial: np.ndarray
    eval_points: np.ndarray
    horizon: float
    seed: int

    @property
    def n_u(self):
        return len(self.interior)

    @property
    def n_0(self):
        return len(self.initial)

    @property
    def n_c(self):
        return len(self.eval_points)

    def dump_csv(self, path):
        """Audit dump of the interior set with columns x,y,z,t."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "z", "t"])
            for row in self.interior:
                t = row[3] if len(row) > 3 else 0.0
                writer.writerow([repr(float(row[0])), repr(float(row[1])), repr(float(row[2])), repr(float(t))])


def fibonacci_sphere(n):
    """Fibonacci lattice of n quasi-uniform points on the unit sphere.

    Point i sits at height z_i = 1 - (2i+1)/n with azimuth
    2*pi*i/golden_ratio.
    """
    if n < 1:
        raise InvalidCount("need at least one lattice point")
    i = np.arange(n, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / n
    theta = 2.0 * np.pi * i / GOLDEN_RATIO
    s = np.sqrt(1.0 - z * z)
    return np.column_stack([s * np.cos(theta), s * np.sin(theta), z])


def map_to_surface(points, surface):
    """Map unit-sphere points onto a sphere-homeomorphic surface."""
    if not surface.sphere_homeomorphic:
        raise NotSphereHomeomorphic(
            f"{surface.kind} is not sphere-homeomorphic; use lhs_parametric"
        )
    points = np.asarray(points, dtype=float)
    if isinstance(surface, Sphere):
        return points * surface.radius
    if isinstance(surface, Ellipsoid):
        return points * surface.semi_axes
    raise NotSphereHomeomorphic(f"no lattice map for {surface.kind}")


def tensor_time(points, horizon, n_times):
    """Tensor product of surface points with a uniform partition of [0, T].

    The partition always contains both endpoints: t_k = k*T/(n_times-1).
    Output rows are point-major (all times of point 0 first).
    """
    if n_times < 2:
        raise ValueError("need at least two partition points")
    points = np.asarray(points, dtype=float)
    times = np.linspace(0.0, horizon, n_times)
    xs = np.repeat(points, n_times, axis=0)
    ts = np.tile(times, len(points))
    return np.column_stack([xs, ts])


def latin_hypercube(n, dims, rng):
    """Seeded LHS in [0,1]^dims: one sample per stratum per coordinate."""
    if n < 1:
        raise InvalidCount("need at least one sample")
    out = np.empty((n, dims))
    for d in range(dims):
        out[:, d] = (rng.permutation(n) + rng.uniform(size=n)) / n
    return out


def lhs_parametric(n, surface, horizon, seed):
    """LHS collocation (x, t) on a chart surface times [0, horizon]."""
    rng = np.random.default_rng(seed)
    cube = latin_hypercube(n, 3, rng)
    pts = surface.chart(cube[:, :2])
    return np.column_stack([pts, horizon * cube[:, 2]])


def _rotate_z(points, angle):
    c, s = np.cos(angle), np.sin(angle)
    out = points.copy()
    out[:, 0] = c * points[:, 0] - s * points[:, 1]
    out[:, 1] = s * points[:, 0] + c * points[:, 1]
    return out


def eval_lattice(n, surface, seed):
    """Spatial evaluation points guaranteed disjoint from training sets.

    Sphere-like surfaces get a Fibonacci lattice rotated by a fixed
    irrational angle; the torus gets a fresh LHS draw through the chart.
    """
    if surface.sphere_homeomorphic:
        pts = _rotate_z(fibonacci_sphere(n), EVAL_ROTATION)
        return map_to_surface(pts, surface)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7919]))
    return surface.chart(latin_hypercube(n, 2, rng))


def tensor_collocation(surface, n_space, n_times, n_0, n_c, horizon, seed):
    """Fibonacci x uniform-time training set for sphere-like surfaces."""
    interior = tensor_time(map_to_surface(fibonacci_sphere(n_space), surface), horizon, n_times)
    initial = map_to_surface(fibonacci_sphere(n_0), surface) if n_0 else np.zeros((0, 3))
    return CollocationSet(
        interior=interior,
        initial=initial,
        eval_points=eval_lattice(n_c, surface, seed),
        horizon=horizon,
        seed=seed,
    )


def lhs_collocation(surface, n_u, n_0, n_c, horizon, seed):
    """LHS space-time training set for chart surfaces (paper's torus run)."""
    seq = np.random.SeedSequence(seed).spawn(3)
    interior = lhs_parametric(n_u, surface, horizon, seq[0])
    if n_0:
        rng0 = np.random.default_rng(seq[1])
        initial = surface.chart(latin_hypercube(n_0, 2, rng0))
    else:
        initial = np.zeros((0, 3))
    rng_c = np.random.default_rng(seq[2])
    eval_points = surface.chart(latin_hypercube(n_c, 2, rng_c))
    return CollocationSet(
        interior=interior,
        initial=initial,
        eval_points=eval_points,
        horizon=horizon,
        seed=seed,
    )


def spatial_collocation(surface, n_space, n_c, seed):
    """Spatial-only training set for discrete-time (Runge-Kutta) problems."""
    interior = map_to_surface(fibonacci_sphere(n_space), surface)
    return CollocationSet(
        interior=interior,
        initial=np.zeros((0, 3)),
        eval_points=eval_lattice(n_c, surface, seed),
        horizon=0.0,
        seed=seed,
    )
