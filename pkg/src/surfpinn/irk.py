"""Gauss-Legendre implicit Runge-Kutta tableaus and their validation.

Stage counts are capped at 32: the q-stage Gauss-Legendre method has
temporal order 2q, and already 0.5^(2*27) underflows double precision,
so moderate stage counts make the time error negligible against the
spatial network error. Node clustering also degrades the collocation
solves beyond that point.

Nodes come from Newton iteration on the shifted Legendre polynomial
(three-term recurrence, no tables); weights and the stage matrix solve
the collocation conditions in the shifted-Legendre basis, which keeps
the linear systems well conditioned up to the stage cap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularStageSystem, StageCountUnsupported

MAX_STAGES = 32


@dataclass(frozen=True)
class ButcherTableau:
    """Coefficients (a, b, c) of a q-stage collocation Runge-Kutta method."""

    q: int
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        assert self.a.shape == (self.q, self.q)
        assert self.b.shape == (self.q,)
        assert self.c.shape == (self.q,)


def _legendre_and_derivative(k, s):
    """P_k(s) and P_k'(s) on [-1, 1] via the three-term recurrence."""
    s = np.asarray(s, dtype=float)
    if k == 0:
        return np.ones_like(s), np.zeros_like(s)
    p_prev = np.ones_like(s)
    p = s.copy()
    for j in range(1, k):
        p_prev, p = p, ((2 * j + 1) * s * p - j * p_prev) / (j + 1)
    dp = k * (s * p - p_prev) / (s * s - 1.0)
    return p, dp


def _shifted_legendre(k, x):
    """P_k(2x - 1), the Legendre polynomial shifted to [0, 1]."""
    return _legendre_and_derivative(k, 2.0 * np.asarray(x, dtype=float) - 1.0)[0]


def _shifted_legendre_antiderivative(k, x):
    """Integral of P_k(2u - 1) over u in [0, x]."""
    x = np.asarray(x, dtype=float)
    if k == 0:
        return x.copy()
    s = 2.0 * x - 1.0
    p_hi = _legendre_and_derivative(k + 1, s)[0]
    p_lo = _legendre_and_derivative(k - 1, s)[0]
    return 0.5 * (p_hi - p_lo) / (2 * k + 1)


def _gauss_nodes(q):
    """Roots of the degree-q shifted Legendre polynomial in (0, 1)."""
    i = np.arange(1, q + 1, dtype=float)
    s = -np.cos(np.pi * (i - 0.25) / (q + 0.5))  # Chebyshev-type initial guess
    for _ in range(100):
        p, dp = _legendre_and_derivative(q, s)
        step = p / dp
        s = s - step
        if np.max(np.abs(step)) < 1e-16:
            break
    p, _ = _legendre_and_derivative(q, s)
    if np.max(np.abs(p)) > 1e-14:
        raise RuntimeError("Legendre root iteration failed to converge")
    c = 0.5 * (s + 1.0)
    # enforce the exact c_j + c_{q+1-j} = 1 symmetry of Gauss nodes
    return 0.5 * (c + 1.0 - c[::-1])


def gauss_legendre_tableau(q):
    """Build the q-stage Gauss-Legendre tableau (order 2q).

    Raises StageCountUnsupported outside 1 <= q <= 32.
    """
    if not 1 <= q <= MAX_STAGES:
        raise StageCountUnsupported(
            f"stage count {q} unsupported; 64-bit precision caps q at {MAX_STAGES}"
        )
    c = _gauss_nodes(q)
    basis = np.vstack([_shifted_legendre(k, c) for k in range(q)])  # (q, q)
    rhs_b = np.zeros(q)
    rhs_b[0] = 1.0  # integral of P~_k over [0,1] is delta_k0
    b = np.linalg.solve(basis, rhs_b)
    integrals = np.vstack(
        [_shifted_legendre_antiderivative(k, c) for k in range(q)]
    )  # (q basis, q node)
    a = np.linalg.solve(basis, integrals).T
    return ButcherTableau(q=q, a=a, b=b, c=c)


def order_check(tableau, max_order):
    """Worst residual of the quadrature and stage-collocation conditions.

    Checks B(p): sum_j b_j c_j^(k-1) = 1/k for k = 1..max_order and
    C(q): sum_j a_ij c_j^(k-1) = c_i^k / k for k = 1..q.
    """
    if max_order > 2 * tableau.q:
        raise ValueError("max_order exceeds the method order 2q")
    c, b, a, q = tableau.c, tableau.b, tableau.a, tableau.q
    worst = 0.0
    for k in range(1, max_order + 1):
        worst = max(worst, abs(float(b @ c ** (k - 1)) - 1.0 / k))
    for k in range(1, q + 1):
        res = a @ c ** (k - 1) - c**k / k
        worst = max(worst, float(np.max(np.abs(res))))
    return worst


def ode_integrate(tableau, lam, u0, dt, steps):
    """Integrate the scalar linear ODE u' = lam*u with exact stage solves."""
    q = tableau.q
    system = np.eye(q) - dt * lam * tableau.a
    try:
        inv = np.linalg.inv(system)
    except np.linalg.LinAlgError as exc:
        raise SingularStageSystem("(I - dt*lam*a) is singular") from exc
    if abs(np.linalg.det(system)) < 1e-300:
        raise SingularStageSystem("(I - dt*lam*a) is singular")
    u = float(u0)
    ones = np.ones(q)
    for _ in range(steps):
        stages = inv @ (lam * u * ones)
        u = u + dt * float(tableau.b @ stages)
    return u


def stability_magnitude(tableau, z):
    """|R(z)| for complex z via a 2x2 real embedding of the stage solve."""
    q = tableau.q
    m = np.array([[z.real, -z.imag], [z.imag, z.real]])
    big = np.eye(2 * q) - np.kron(tableau.a, m)
    u0 = np.array([1.0, 0.0])
    rhs = np.tile(m @ u0, q)
    try:
        stages = np.linalg.solve(big, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularStageSystem("embedded stage system is singular") from exc
    u1 = u0 + (tableau.b @ stages.reshape(q, 2))
    return float(np.linalg.norm(u1))


def save_tableau(tableau, path):
    """Write one tableau as plain text, round-trippable bit-exactly."""
    with open(path, "w") as fh:
        fh.write(f"gauss-legendre {tableau.q}\n")
        fh.write(" ".join(repr(float(v)) for v in tableau.c) + "\n")
        fh.write(" ".join(repr(float(v)) for v in tableau.b) + "\n")
        for row in tableau.a:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_tableau(path):
    with open(path) as fh:
        header = fh.readline().split()
        q = int(header[1])
        c = np.array([float(v) for v in fh.readline().split()])
        b = np.array([float(v) for v in fh.readline().split()])
        a = np.array(
            [[float(v) for v in fh.readline().split()] for _ in range(q)]
        )
    return ButcherTableau(q=q, a=a, b=b, c=c)
