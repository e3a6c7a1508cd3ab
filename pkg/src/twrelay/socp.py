"""
Second-order cone feasibility by margin maximization.

For constraints ``||A_i x + b_i|| <= c_i.x + d_i`` the solver maximizes
the common slack ``t`` such that ``||A_i x + b_i|| <= c_i.x + d_i - t`` for
every i.  The problem is feasible iff the optimal ``t`` is nonnegative.

The method is a standard log-barrier path following scheme over
``z = (x, t)``.  A large ball ``||x|| <= radius`` keeps the margin bounded;
it only matters for problems whose feasible set lies entirely outside it.
"""

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 500
DEFAULT_RADIUS = 1e6


class SocpError(ValueError):
    """Malformed problem data."""


class Status(enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class SocConstraint:
    """``||a_map @ x + b_off|| <= c_row @ x + d_off``."""

    a_map: np.ndarray
    b_off: np.ndarray
    c_row: np.ndarray
    d_off: float

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a_map, dtype=float))
        b = np.asarray(self.b_off, dtype=float).reshape(-1)
        c = np.asarray(self.c_row, dtype=float).reshape(-1)
        if a.shape[0] != b.size or a.shape[1] != c.size:
            raise SocpError(f"inconsistent cone shapes: A {a.shape}, b {b.size}, c {c.size}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))
                and np.isfinite(self.d_off)):
            raise SocpError("cone data must be finite")
        object.__setattr__(self, "a_map", a)
        object.__setattr__(self, "b_off", b)
        object.__setattr__(self, "c_row", c)
        object.__setattr__(self, "d_off", float(self.d_off))

    def slack(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(self.c_row @ x + self.d_off - np.linalg.norm(self.a_map @ x + self.b_off))

    def scaled(self, s: float) -> "SocConstraint":
        return SocConstraint(s * self.a_map, s * self.b_off, s * self.c_row, s * self.d_off)


@dataclass(frozen=True)
class SocpProblem:
    n: int
    constraints: Sequence[SocConstraint] = field(default_factory=list)

    def __post_init__(self):
        if self.n < 1:
            raise SocpError("decision dimension must be >= 1")
        if not self.constraints:
            raise SocpError("at least one constraint is required")
        for c in self.constraints:
            if c.c_row.size != self.n:
                raise SocpError(f"constraint width {c.c_row.size} != n = {self.n}")
        object.__setattr__(self, "constraints", tuple(self.constraints))

    def slacks(self, x) -> np.ndarray:
        return np.array([c.slack(x) for c in self.constraints])


@dataclass(frozen=True)
class SocpOutcome:
    status: Status
    point: Optional[np.ndarray]
    margin: float
    iterations: int = 0

    @property
    def feasible(self) -> bool:
        return self.status is Status.FEASIBLE


class _Stack:
    """Cone data stacked for vectorized evaluation over z = (x, t)."""

    def __init__(self, p: SocpProblem):
        n = p.n
        self.n = n
        self.m = len(p.constraints)
        self.A = np.vstack([np.hstack([c.a_map, np.zeros((c.a_map.shape[0], 1))])
                            for c in p.constraints])
        self.b = np.concatenate([c.b_off for c in p.constraints])
        self.C = np.array([np.append(c.c_row, -1.0) for c in p.constraints])
        self.d = np.array([c.d_off for c in p.constraints])
        sizes = [c.a_map.shape[0] for c in p.constraints]
        owner = np.repeat(np.arange(self.m), sizes)
        # cone-membership indicator: row sums per cone as one matmul
        self.E = (owner[None, :] == np.arange(self.m)[:, None]).astype(float)
        # constant part of each cone's barrier Hessian: 2 (A^T A - c c^T)
        blocks = []
        for i in range(self.m):
            ai = self.A[owner == i]
            blocks.append(2.0 * (ai.T @ ai - np.outer(self.C[i], self.C[i])))
        self.P = np.array(blocks).reshape(self.m, -1)

    def eval(self, z):
        u = self.C @ z + self.d
        w = self.A @ z + self.b
        return u, w, u * u - self.E @ (w * w)

    def barrier(self, z, s, r2):
        """Objective -s t + barrier, or +inf outside the domain."""
        u, w, g = self.eval(z)
        xx = z[:-1] @ z[:-1]
        if u.min() <= 0 or g.min() <= 0 or xx >= r2:
            return np.inf
        return -s * z[-1] - np.log(g).sum() - np.log(r2 - xx)


def solve_margin(p: SocpProblem, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                 radius: float = DEFAULT_RADIUS, early_exit: bool = False,
                 x0=None) -> SocpOutcome:
    """
    Maximize the common slack of all cones.

    ``max_iter`` bounds the total number of Newton steps.  With
    ``early_exit`` the solver returns as soon as the sign of the optimal
    margin is settled (a point with slack >= ``tol``, or an upper bound below
    ``-tol``), which is all a feasibility oracle needs; the reported margin
    is then only a bound on the optimum.  ``x0`` is an optional starting
    point inside the ball; any point works since ``t`` starts below every
    slack.
    """
    if tol <= 0:
        raise SocpError("tol must be positive")
    st = _Stack(p)
    n = p.n
    # barrier parameter: two per cone plus one for the ball
    theta = 2.0 * st.m + 1.0
    scale = max(1.0, float(np.max(np.abs(st.d))), float(np.max(np.abs(st.b), initial=0.0)))

    r2 = radius * radius
    z = np.zeros(n + 1)
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        if x0.size != n:
            raise SocpError(f"x0 has {x0.size} entries, expected {n}")
        if x0 @ x0 < 0.25 * r2:
            z[:-1] = x0
    u, w, g = st.eval(z)
    z[-1] = float(np.min(u - np.sqrt(st.E @ (w * w)))) - 1.0
    s = 1.0 / scale
    mu = 20.0
    iters = 0
    eye = np.eye(n)

    while True:
        # centering by damped Newton
        f0 = st.barrier(z, s, r2)
        for _ in range(50):
            if iters >= max_iter:
                break
            u, w, g = st.eval(z)
            x = z[:-1]
            rem = r2 - x @ x
            grad_g = 2.0 * (u[:, None] * st.C - (st.E * w) @ st.A)
            ig = 1.0 / g
            grad = -grad_g.T @ ig
            grad[:-1] += 2.0 * x / rem
            grad[-1] -= s
            hess = (ig @ st.P).reshape(n + 1, n + 1)
            hess += (grad_g.T * ig ** 2) @ grad_g
            hess[:-1, :-1] += 2.0 * eye / rem + 4.0 * np.outer(x, x) / rem ** 2
            try:
                step = -np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(hess, grad, rcond=None)[0]
            dec = float(-grad @ step)
            iters += 1
            if not np.isfinite(dec) or dec < 1e-10:
                break
            h = 1.0
            while h > 1e-12:
                zn = z + h * step
                fn = st.barrier(zn, s, r2)
                if fn <= f0 - 0.25 * h * dec:
                    break
                h *= 0.5
            else:
                break
            z, f0 = zn, fn
            if early_exit and z[-1] >= tol:
                return SocpOutcome(Status.FEASIBLE, z[:-1].copy(), float(z[-1]), iters)
            if dec < 1e-9:
                break
        t = float(z[-1])
        gap = theta / s
        if early_exit and t + gap < -tol:
            return SocpOutcome(Status.INFEASIBLE, None, t, iters)
        if gap <= tol:
            if t >= -tol:
                return SocpOutcome(Status.FEASIBLE, z[:-1].copy(), t, iters)
            return SocpOutcome(Status.INFEASIBLE, None, t, iters)
        if iters >= max_iter:
            if t >= -tol:
                return SocpOutcome(Status.FEASIBLE, z[:-1].copy(), t, iters)
            log.debug("SOCP hit the iteration cap with margin bracket [%g, %g]", t, t + gap)
            return SocpOutcome(Status.INDETERMINATE, None, t, iters)
        s *= mu


def lift_complex(a_cplx, b_cplx, c_cplx, d_real, imag_tol: float = 1e-9) -> SocConstraint:
    """
    Real form of ``||A v + b|| <= Re(c . v) + d`` for complex ``v``.

    The decision vector is ``x = [Re v; Im v]``.  ``c_cplx`` is a complex row
    whose real part of ``c . v`` is taken, so the right-hand side is real for
    every lift.  ``d_real`` must be real.
    """
    a = np.atleast_2d(np.asarray(a_cplx, dtype=complex))
    b = np.asarray(b_cplx, dtype=complex).reshape(-1)
    c = np.asarray(c_cplx, dtype=complex).reshape(-1)
    d = complex(d_real)
    if abs(d.imag) > imag_tol * max(1.0, abs(d.real)):
        raise SocpError("constant on the scalar side must be real")
    if a.shape[1] != c.size or a.shape[0] != b.size:
        raise SocpError("inconsistent complex cone shapes")
    a_real = np.block([[a.real, -a.imag], [a.imag, a.real]])
    b_real = np.concatenate([b.real, b.imag])
    c_real = np.concatenate([c.real, -c.imag])
    return SocConstraint(a_real, b_real, c_real, d.real)


def lift_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex).reshape(-1)
    return np.concatenate([v.real, v.imag])


def unlift_vector(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    h = x.size // 2
    return x[:h] + 1j * x[h:]
