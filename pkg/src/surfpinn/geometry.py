"""Closed surfaces embedded in R^3 and brute-force intrinsic-operator oracles.

Each surface provides an implicit level function ``phi`` (zero on the
surface), its analytic gradient, an analytic closest-point map, and for
the kinds used in quadrature a periodic chart ``[0,1]^2 -> R^3`` with an
analytic area element.

Conventions
-----------
* Normals are unit length and point outward (for the torus: away from
  the core circle).
* Mean curvature follows the sign convention ``div(n_bar) = -2 H`` with
  ``n_bar = grad(phi)/|grad(phi)|``, so the unit sphere has ``H = -1``.
  Textbooks differ; every curvature-dependent formula in this package
  assumes this convention.
* Intrinsic operators are evaluated by central finite differences of the
  closest-point extension with step ``h`` (default ``1e-4``), which is
  O(h^2) accurate.

Scalar and vector fields are plain callables mapping an ``(N, 3)`` array
to ``(N,)`` (scalar) or ``(N, 3)`` (vector), row-aligned with the input.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    AmbiguousProjection,
    DegenerateNormal,
    OutsideBand,
    UnsupportedSurface,
)

ON_SURFACE_TOL = 1e-9
DEGENERATE_GRAD_TOL = 1e-12
DEFAULT_FD_STEP = 1e-4


def _as_points(x):
    """Return (points as (N, 3), was_single) for a (3,) or (N, 3) input."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


class Surface:
    """Base class; subclasses fill in the analytic pieces."""

    kind: str
    sphere_homeomorphic: bool = False
    feature_size: float

    @property
    def band_width(self):
        """Width of the band where the closest-point map is single-valued."""
        return 0.1 * self.feature_size

    # -- implicit representation -------------------------------------
    def level(self, x):
        raise NotImplementedError

    def level_gradient(self, x):
        raise NotImplementedError

    def distance(self, x):
        """Unsigned distance to the surface (analytic where available)."""
        raise NotImplementedError

    def closest_point(self, x):
        raise NotImplementedError

    # -- parametric representation ------------------------------------
    has_chart = False

    def chart(self, ab):
        """Map (N, 2) parameters in [0,1]^2 to points on the surface."""
        raise UnsupportedSurface(f"{self.kind} has no parametric chart")

    def chart_area_element(self, ab):
        """Analytic |x_alpha x x_beta| at (N, 2) chart parameters."""
        raise UnsupportedSurface(f"{self.kind} has no parametric chart")

    # -- derived quantities -------------------------------------------
    def _require_on_surface(self, pts):
        grad = self.level_gradient(pts)
        gnorm = np.linalg.norm(grad, axis=1)
        if np.any(gnorm < DEGENERATE_GRAD_TOL):
            raise DegenerateNormal("level gradient vanishes at a query point")
        # |phi|/|grad phi| approximates the distance to the surface
        if np.any(np.abs(self.level(pts)) / gnorm > ON_SURFACE_TOL):
            raise ValueError("point is not on the surface within 1e-9")
        return grad, gnorm

    def normal(self, x):
        """Outward unit normal at on-surface points."""
        pts, single = _as_points(x)
        grad, gnorm = self._require_on_surface(pts)
        n = grad / gnorm[:, None]
        return n[0] if single else n

    def unit_normal_field(self, x):
        """grad(phi)/|grad(phi)| evaluated off the surface (extension of n)."""
        pts, single = _as_points(x)
        grad = self.level_gradient(pts)
        gnorm = np.linalg.norm(grad, axis=1)
        if np.any(gnorm < DEGENERATE_GRAD_TOL):
            raise DegenerateNormal("level gradient vanishes near a query point")
        n = grad / gnorm[:, None]
        return n[0] if single else n

    def mean_curvature(self, x, h=DEFAULT_FD_STEP):
        """Mean curvature H with div(n_bar) = -2 H (unit sphere: H = -1)."""
        pts, single = _as_points(x)
        self._require_on_surface(pts)
        div = np.zeros(len(pts))
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            div += (
                self.unit_normal_field(pts + e)[:, k]
                - self.unit_normal_field(pts - e)[:, k]
            ) / (2.0 * h)
        hmean = -0.5 * div
        return hmean[0] if single else hmean

    def _require_in_band(self, pts):
        d = self.distance(pts)
        if np.any(d > self.band_width):
            raise OutsideBand(
                f"point at distance {d.max():.3g} exceeds band {self.band_width:.3g}"
            )


class Sphere(Surface):
    """Sphere of given radius centred at the origin; phi = |x|^2 - r^2."""

    kind = "implicit_sphere"
    sphere_homeomorphic = True
    has_chart = True

    def __init__(self, radius=1.0):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)
        self.feature_size = self.radius

    def level(self, x):
        pts, _ = _as_points(x)
        return np.einsum("ij,ij->i", pts, pts) - self.radius**2

    def level_gradient(self, x):
        pts, _ = _as_points(x)
        return 2.0 * pts

    def distance(self, x):
        pts, _ = _as_points(x)
        return np.abs(np.linalg.norm(pts, axis=1) - self.radius)

    def closest_point(self, x):
        pts, single = _as_points(x)
        self._require_in_band(pts)
        r = np.linalg.norm(pts, axis=1)
        if np.any(r < DEGENERATE_GRAD_TOL):
            raise AmbiguousProjection("closest point undefined at the centre")
        cp = pts * (self.radius / r)[:, None]
        return cp[0] if single else cp

    # Cylindrical (Archimedes) chart: alpha -> z, beta -> azimuth.
    # Equal-area, so the element is constant; midpoint grids avoid the poles.
    def chart(self, ab):
        ab = np.atleast_2d(np.asarray(ab, dtype=float))
        z = 2.0 * ab[:, 0] - 1.0
        phi = 2.0 * np.pi * ab[:, 1]
        s = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        return self.radius * np.column_stack([s * np.cos(phi), s * np.sin(phi), z])

    def chart_area_element(self, ab):
        ab = np.atleast_2d(np.asarray(ab, dtype=float))
        return np.full(len(ab), 4.0 * np.pi * self.radius**2)


class Ellipsoid(Surface):
    """Axis-aligned ellipsoid sum((x_i/a_i)^2) = 1."""

    kind = "implicit_ellipsoid"
    sphere_homeomorphic = True
    has_chart = True

    def __init__(self, semi_axes):
        axes = np.asarray(semi_axes, dtype=float)
        if axes.shape != (3,) or np.any(axes <= 0):
            raise ValueError("semi_axes must be three positive numbers")
        self.semi_axes = axes
        self.feature_size = float(axes.min())

    def level(self, x):
        pts, _ = _as_points(x)
        return np.einsum("ij,ij->i", pts / self.semi_axes, pts / self.semi_axes) - 1.0

    def level_gradient(self, x):
        pts, _ = _as_points(x)
        return 2.0 * pts / self.semi_axes**2

    def closest_point(self, x):
        """Newton on the secular equation x_i = a_i^2 y_i / (a_i^2 + mu).

        Reliable inside the band; this is the test-only fallback for
        surfaces without a closed-form projection.
        """
        pts, single = _as_points(x)
        a2 = self.semi_axes**2
        mu = np.zeros(len(pts))
        ay2 = a2 * pts**2
        for _ in range(60):
            den = a2 + mu[:, None]
            g = (ay2 / den**2).sum(axis=1) - 1.0
            dg = (-2.0 * ay2 / den**3).sum(axis=1)
            step = g / dg
            mu = mu - step
            if np.max(np.abs(step)) < 1e-15:
                break
        cp = a2 * pts / (a2 + mu[:, None])
        dist = np.linalg.norm(cp - pts, axis=1)
        if np.any(dist > self.band_width):
            raise OutsideBand("point outside the ellipsoid band")
        return cp[0] if single else cp

    def distance(self, x):
        pts, _ = _as_points(x)
        cp = self.closest_point(pts)
        return np.linalg.norm(cp - pts, axis=1)

    def _require_in_band(self, pts):
        pass  # closest_point enforces the band itself

    def chart(self, ab):
        ab = np.atleast_2d(np.asarray(ab, dtype=float))
        z = 2.0 * ab[:, 0] - 1.0
        phi = 2.0 * np.pi * ab[:, 1]
        s = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        u = np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
        return u * self.semi_axes

    def chart_area_element(self, ab):
        ab = np.atleast_2d(np.asarray(ab, dtype=float))
        z = 2.0 * ab[:, 0] - 1.0
        phi = 2.0 * np.pi * ab[:, 1]
        s = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        zr = np.where(s > 0, z / np.where(s > 0, s, 1.0), 0.0)
        # partials of the scaled cylindrical chart (factor 2 from z=2a-1,
        # 2*pi from phi=2*pi*b)
        ua = np.column_stack([-zr * np.cos(phi), -zr * np.sin(phi), np.ones_like(z)]) * 2.0
        ub = np.column_stack([-s * np.sin(phi), s * np.cos(phi), np.zeros_like(z)]) * (2.0 * np.pi)
        xa = ua * self.semi_axes
        xb = ub * self.semi_axes
        return np.linalg.norm(np.cross(xa, xb), axis=1)


class Torus(Surface):
    """Torus (sqrt(x1^2+x2^2) - R)^2 + x3^2 = r^2 around the z-axis."""

    sphere_homeomorphic = False
    has_chart = True

    def __init__(self, major_radius=1.0, minor_radius=0.25, parametric=True):
        if not 0 < minor_radius < major_radius:
            raise ValueError("need 0 < minor_radius < major_radius")
        self.major_radius = float(major_radius)
        self.minor_radius = float(minor_radius)
        self.feature_size = self.minor_radius
        self.kind = "parametric_torus" if parametric else "implicit_torus"
        if not parametric:
            self.has_chart = False

    def level(self, x):
        pts, _ = _as_points(x)
        rho = np.hypot(pts[:, 0], pts[:, 1])
        return (rho - self.major_radius) ** 2 + pts[:, 2] ** 2 - self.minor_radius**2

    def level_gradient(self, x):
        pts, _ = _as_points(x)
        rho = np.hypot(pts[:, 0], pts[:, 1])
        safe = np.where(rho > 0, rho, 1.0)
        fac = 2.0 * (rho - self.major_radius) / safe
        return np.column_stack([fac * pts[:, 0], fac * pts[:, 1], 2.0 * pts[:, 2]])

    def distance(self, x):
        pts, _ = _as_points(x)
        rho = np.hypot(pts[:, 0], pts[:, 1])
        return np.abs(np.hypot(rho - self.major_radius, pts[:, 2]) - self.minor_radius)

    def closest_point(self, x):
        pts, single = _as_points(x)
        self._require_in_band(pts)
        rho = np.hypot(pts[:, 0], pts[:, 1])
        if np.any(rho < DEGENERATE_GRAD_TOL):
            raise AmbiguousProjection("closest point undefined on the torus axis")
        core = np.column_stack(
            [
                self.major_radius * pts[:, 0] / rho,
                self.major_radius * pts[:, 1] / rho,
                np.zeros(len(pts)),
            ]
        )
        d = pts - core
        dn = np.linalg.norm(d, axis=1)
        if np.any(dn < DEGENERATE_GRAD_TOL):
            raise AmbiguousProjection("closest point undefined on the core circle")
        cp = core + d * (self.minor_radius / dn)[:, None]
        return cp[0] if single else cp

    def normal(self, x):
        """Outward normal from the chart-partial cross product.

        Coincides with grad(phi)/|grad(phi)| (checked in tests); the
        parametric route is exact even where rho ~ R.
        """
        pts, single = _as_points(x)
        self._require_on_surface(pts)
        rho = np.hypot(pts[:, 0], pts[:, 1])
        cos_t = pts[:, 0] / rho
        sin_t = pts[:, 1] / rho
        cos_v = (rho - self.major_radius) / self.minor_radius
        sin_v = pts[:, 2] / self.minor_radius
        n = np.column_stack([cos_v * cos_t, cos_v * sin_t, sin_v])
        n /= np.linalg.norm(n, axis=1)[:, None]
        return n[0] if single else n

    def chart(self, ab):
        if not self.has_chart:
            raise UnsupportedSurface("implicit torus carries no chart")
        ab = np.atleast_2d(np.asarray(ab, dtype=float))
        theta = 2.0 * np.pi * ab[:, 0]
        v = 2.0 * np.pi * ab[:, 1]
        arm = self.major_radius + self.minor_radius * np.cos(v)
        return np.column_stack(
            [arm * np.cos(theta), arm * np.sin(theta), self.minor_radius * np.sin(v)]
        )

    def chart_area_element(self, ab):
        if not self.has_chart:
            raise UnsupportedSurface("implicit torus carries no chart")
        ab = np.atleast_2d(np.asarray(ab, dtype=float))
        v = 2.0 * np.pi * ab[:, 1]
        arm = self.major_radius + self.minor_radius * np.cos(v)
        return (2.0 * np.pi) ** 2 * self.minor_radius * arm


def closest_point_extend(surface, field, x):
    """Evaluate the closest-point extension field(cp(x)) at near-surface x."""
    pts, single = _as_points(x)
    vals = np.asarray(field(surface.closest_point(pts)))
    return vals[0] if single else vals


def surface_operator_oracle(surface, field, x, which, h=DEFAULT_FD_STEP):
    """Finite-difference oracle for the intrinsic operators on the surface.

    Parameters
    ----------
    field : callable
        Scalar field for ``"grad"``/``"lb"``, vector field for ``"div"``,
        given on the surface; it is extended along normals internally.
    which : {"grad", "div", "lb"}
        ``grad`` returns the surface gradient (ordinary gradient of the
        extension minus its normal component), ``div`` the surface
        divergence (component sum of the projected derivatives), ``lb``
        their composition, the Laplace-Beltrami operator.
    h : float
        Central-difference step; O(h^2) accuracy.
    """
    pts, single = _as_points(x)
    if which == "grad":
        out = _surface_gradient(surface, field, pts, h)
    elif which == "div":
        out = _surface_divergence(surface, field, pts, h)
    elif which == "lb":
        out = _surface_divergence(
            surface, lambda p: _surface_gradient(surface, field, p, h), pts, h
        )
    else:
        raise ValueError(f"unknown operator {which!r}")
    return out[0] if single else out


def _extension_gradient(surface, field, pts, h):
    """Plain central-difference gradient of the closest-point extension."""
    grad = np.empty((len(pts), 3))
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        grad[:, k] = (
            closest_point_extend(surface, field, pts + e)
            - closest_point_extend(surface, field, pts - e)
        ) / (2.0 * h)
    return grad


def _surface_gradient(surface, field, pts, h):
    grad = _extension_gradient(surface, field, pts, h)
    n = surface.normal(pts)
    return grad - np.einsum("ij,ij->i", grad, n)[:, None] * n


def _surface_divergence(surface, field, pts, h):
    jac = np.empty((len(pts), 3, 3))  # jac[:, a, b] = d v_a / d y_b
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        jac[:, :, k] = (
            closest_point_extend(surface, field, pts + e)
            - closest_point_extend(surface, field, pts - e)
        ) / (2.0 * h)
    n = surface.normal(pts)
    trace = np.einsum("iaa->i", jac)
    return trace - np.einsum("ia,iab,ib->i", n, jac, n)


def quadrature(surface, field, resolution):
    """Integrate a scalar field over the surface on a chart midpoint grid.

    Tensor-product midpoint rule in both chart parameters with the
    analytic area element; periodic directions make this the periodic
    rectangle rule. Converges at least O(resolution^-2) for smooth fields.
    """
    if not surface.has_chart:
        raise UnsupportedSurface(f"{surface.kind} supports no quadrature chart")
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    t = (np.arange(resolution) + 0.5) / resolution
    A, B = np.meshgrid(t, t, indexing="ij")
    ab = np.column_stack([A.ravel(), B.ravel()])
    pts = surface.chart(ab)
    w = surface.chart_area_element(ab) / resolution**2
    return float(np.dot(np.asarray(field(pts)), w))


def surface_from_config(kind, params):
    """Build a surface from a config-file kind string plus parameters."""
    kind = kind.lower().replace("-", "_")
    if kind in ("sphere", "implicit_sphere"):
        return Sphere(radius=params.get("radius", 1.0))
    if kind in ("ellipsoid", "implicit_ellipsoid"):
        return Ellipsoid(params.get("semi_axes", (1.0, 1.0, 1.0)))
    if kind in ("torus", "parametric_torus"):
        return Torus(
            major_radius=params.get("major_radius", 1.0),
            minor_radius=params.get("minor_radius", 0.25),
            parametric=True,
        )
    if kind == "implicit_torus":
        return Torus(
            major_radius=params.get("major_radius", 1.0),
            minor_radius=params.get("minor_radius", 0.25),
            parametric=False,
        )
    raise ValueError(f"unknown surface kind {kind!r}")
