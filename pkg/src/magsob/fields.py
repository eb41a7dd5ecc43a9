"""Complex scalar fields, magnetic potentials, and the phase-twisted comparison.

The central object is the comparison

    psi(u, A, x, y) = exp(i (x - y) . A((x + y)/2)) u(y),

whose midpoint phase makes nonlocal difference quotients gauge-aware, and
the covariant derivative ``grad u - i A u``.  Complex N-vectors are plain
``numpy`` arrays; their mixed p-modulus is

    |z|_p = (|Re z|^p + |Im z|^p)^{1/p},

with Euclidean norms of the real and imaginary parts (equal to the
Euclidean modulus at p = 2).

Catalog fields are smooth and either Gaussian-decaying or compactly
supported; they carry analytic gradients, exact Lipschitz data and a
descriptor consumed by the compiled quadrature core.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import UsageError

__all__ = [
    "ScalarField",
    "VectorPotential",
    "psi",
    "magnetic_gradient",
    "magnetic_gradient_many",
    "lp_modulus",
    "lp_pow_rows",
    "catalog",
    "zero_field",
    "default_fd_step",
]

# descriptor codes shared with the compiled core (keep in sync with _core.pyx)
F_GAUSSIAN = 1
F_MODULATED_GAUSSIAN = 2
F_BUMP = 3
F_TRUNCATED = 4
A_ZERO = 1
A_CONSTANT = 2
A_ROTATIONAL = 3
A_GRADIENT = 4

FIELD_NAMES = ("gaussian", "modulated_gaussian", "bump")
POTENTIAL_NAMES = (
    "zero_potential",
    "constant_potential",
    "rotational_potential",
    "gradient_potential",
)


def default_fd_step(x) -> float:
    """Central-difference step balancing truncation and rounding."""
    return 1e-5 * (1.0 + float(np.linalg.norm(x)))


@dataclass(frozen=True)
class ScalarField:
    """Complex-valued function on R^N.

    ``eval_one`` maps a point to a complex value; ``eval_many`` the
    vectorized version on ``(n, N)`` arrays.  ``grad_many`` is the analytic
    gradient when available (``None`` forces finite differences).  If
    ``support_radius`` is set the field vanishes outside that ball.
    Instances are immutable and safe to share across workers.
    """

    dim: int
    eval_many: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    grad_many: Callable[[np.ndarray], np.ndarray] | None = field(
        default=None, repr=False
    )
    support_radius: float | None = None
    label: str = "field"
    sup_abs: float | None = None
    core: tuple[int, tuple[float, ...]] | None = None

    def eval_one(self, x) -> complex:
        return complex(self.eval_many(np.asarray(x, float).reshape(1, self.dim))[0])

    def grad_one(self, x) -> np.ndarray | None:
        if self.grad_many is None:
            return None
        return self.grad_many(np.asarray(x, float).reshape(1, self.dim))[0]


@dataclass(frozen=True)
class VectorPotential:
    """Lipschitz map R^N -> R^N; ``lipschitz_bound`` doubles as the value
    used for ``|grad A|_inf`` (operator norm of the Jacobian, exact for
    catalog potentials)."""

    dim: int
    eval_many: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    lipschitz_bound: float = 0.0
    label: str = "potential"
    core: tuple[int, tuple[float, ...]] | None = None

    def eval_one(self, x) -> np.ndarray:
        return self.eval_many(np.asarray(x, float).reshape(1, self.dim))[0]


def _as_points(x, dim):
    p = np.asarray(x, dtype=float)
    if p.shape != (dim,):
        raise UsageError(f"expected a point in R^{dim}, got shape {p.shape}")
    return p


def psi(u: ScalarField, A: VectorPotential, x, y) -> complex:
    """Phase-twisted comparison exp(i (x - y) . A((x + y)/2)) u(y)."""
    if u.dim != A.dim:
        raise UsageError(f"field dim {u.dim} != potential dim {A.dim}")
    xp = _as_points(x, u.dim)
    yp = _as_points(y, u.dim)
    mid = 0.5 * (xp + yp)
    phase = float(np.dot(xp - yp, A.eval_one(mid)))
    return complex(np.exp(1j * phase) * u.eval_one(yp))


def magnetic_gradient(
    u: ScalarField, A: VectorPotential, x, fd_step: float | None = None
) -> np.ndarray:
    """Covariant derivative grad u(x) - i A(x) u(x) as a complex N-vector.

    Uses the analytic gradient when the field carries one, otherwise
    central differences with step ``fd_step`` per coordinate.
    """
    xp = _as_points(x, u.dim)
    return magnetic_gradient_many(u, A, xp.reshape(1, -1), fd_step)[0]


def magnetic_gradient_many(
    u: ScalarField, A: VectorPotential, pts: np.ndarray, fd_step: float | None = None
) -> np.ndarray:
    """Vectorized ``magnetic_gradient`` on ``(n, N)`` points."""
    if u.dim != A.dim:
        raise UsageError(f"field dim {u.dim} != potential dim {A.dim}")
    pts = np.asarray(pts, dtype=float)
    if u.grad_many is not None:
        g = np.asarray(u.grad_many(pts), dtype=complex)
    else:
        g = np.empty((len(pts), u.dim), dtype=complex)
        for d in range(u.dim):
            if fd_step is not None:
                step = np.full(len(pts), float(fd_step))
            else:
                step = 1e-5 * (1.0 + np.linalg.norm(pts, axis=1))
            e = np.zeros(u.dim)
            e[d] = 1.0
            up = u.eval_many(pts + step[:, None] * e)
            um = u.eval_many(pts - step[:, None] * e)
            g[:, d] = (up - um) / (2.0 * step)
    av = np.asarray(A.eval_many(pts), dtype=float)
    uv = np.asarray(u.eval_many(pts), dtype=complex)
    return g - 1j * av * uv[:, None]


def lp_modulus(z, p: float) -> float:
    """Mixed modulus (|Re z|^p + |Im z|^p)^{1/p} of a complex vector."""
    if not (p > 1.0 and math.isfinite(p)):
        raise UsageError(f"p must be finite and > 1, got {p}")
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    re = float(np.linalg.norm(z.real))
    im = float(np.linalg.norm(z.imag))
    return (re**p + im**p) ** (1.0 / p)


def lp_pow_rows(z: np.ndarray, p: float) -> np.ndarray:
    """Row-wise |z|_p^p for an (n, N) complex array (or (n,) scalars)."""
    z = np.asarray(z, dtype=complex)
    if z.ndim == 1:
        re = np.abs(z.real)
        im = np.abs(z.imag)
    else:
        re = np.linalg.norm(z.real, axis=-1)
        im = np.linalg.norm(z.imag, axis=-1)
    if p == 2.0:
        return re * re + im * im
    return re**p + im**p


def _gaussian(dim, a):
    if a <= 0:
        raise UsageError("gaussian width parameter must be positive")

    def ev(P):
        return np.exp(-0.5 * a * np.einsum("ij,ij->i", P, P)) + 0.0j

    def gr(P):
        return -a * P * ev(P)[:, None]

    return ScalarField(
        dim=dim,
        eval_many=ev,
        grad_many=gr,
        label=f"gaussian(a={a:g})",
        sup_abs=1.0,
        core=(F_GAUSSIAN, (float(a),)),
    )


def _modulated_gaussian(dim, k):
    k = np.asarray(k, dtype=float)

    def ev(P):
        return np.exp(1j * (P @ k) - 0.5 * np.einsum("ij,ij->i", P, P))

    def gr(P):
        return (1j * k[None, :] - P) * ev(P)[:, None]

    return ScalarField(
        dim=dim,
        eval_many=ev,
        grad_many=gr,
        label=f"modulated_gaussian(k={tuple(k)})",
        sup_abs=1.0,
        core=(F_MODULATED_GAUSSIAN, (1.0, *map(float, k))),
    )


def _bump(dim, r):
    if r <= 0:
        raise UsageError("bump radius must be positive")

    def ev(P):
        t2 = np.einsum("ij,ij->i", P, P) / (r * r)
        out = np.zeros(len(P), dtype=complex)
        inside = t2 < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - t2[inside]))
        return out

    def gr(P):
        t2 = np.einsum("ij,ij->i", P, P) / (r * r)
        out = np.zeros((len(P), dim), dtype=complex)
        inside = t2 < 1.0
        u = np.exp(1.0 - 1.0 / (1.0 - t2[inside]))
        out[inside] = (
            P[inside] * (-2.0 / (r * r)) / (1.0 - t2[inside, None]) ** 2 * u[:, None]
        )
        return out

    return ScalarField(
        dim=dim,
        eval_many=ev,
        grad_many=gr,
        support_radius=float(r),
        label=f"bump(r={r:g})",
        sup_abs=1.0,
        core=(F_BUMP, (float(r),)),
    )


def _zero_potential(dim):
    return VectorPotential(
        dim=dim,
        eval_many=lambda P: np.zeros((len(P), dim)),
        lipschitz_bound=0.0,
        label="zero_potential",
        core=(A_ZERO, ()),
    )


def _constant_potential(dim, params):
    c = np.zeros(dim)
    vals = list(params) if params else [1.0]
    if len(vals) == 1:
        c[0] = vals[0]
    elif len(vals) == dim:
        c[:] = vals
    else:
        raise UsageError(
            f"constant_potential takes 1 or {dim} parameters, got {len(vals)}"
        )
    return VectorPotential(
        dim=dim,
        eval_many=lambda P: np.broadcast_to(c, (len(P), dim)).copy(),
        lipschitz_bound=0.0,
        label=f"constant_potential(c={tuple(c)})",
        core=(A_CONSTANT, tuple(map(float, c))),
    )


def _rotational_potential(dim, b):
    if dim == 2:

        def ev(P):
            return 0.5 * b * np.stack([-P[:, 1], P[:, 0]], axis=1)

    elif dim == 3:

        def ev(P):
            z = np.zeros(len(P))
            return 0.5 * b * np.stack([-P[:, 1], P[:, 0], z], axis=1)

    else:
        raise UsageError("rotational_potential needs dim 2 or 3")
    return VectorPotential(
        dim=dim,
        eval_many=ev,
        lipschitz_bound=abs(b) / 2.0,  # operator norm of the Jacobian
        label=f"rotational_potential(b={b:g})",
        core=(A_ROTATIONAL, (float(b),)),
    )


def _gradient_potential(dim, a):
    return VectorPotential(
        dim=dim,
        eval_many=lambda P: a * P,
        lipschitz_bound=abs(a),
        label=f"gradient_potential(a={a:g})",
        core=(A_GRADIENT, (float(a),)),
    )


def zero_field(dim: int) -> ScalarField:
    """The identically zero field; energy paths short-circuit on it."""
    return ScalarField(
        dim=dim,
        eval_many=lambda P: np.zeros(len(P), dtype=complex),
        grad_many=lambda P: np.zeros((len(P), dim), dtype=complex),
        label="zero_field",
        sup_abs=0.0,
        core=None,
    )


def catalog(name: str, params=(), *, dim: int = 1):
    """Named analytic fields and potentials.

    Fields: ``gaussian [a]``, ``modulated_gaussian [k_1..k_N]``,
    ``bump [r]``.  Potentials: ``zero_potential``,
    ``constant_potential [c | c_1..c_N]``, ``rotational_potential [b]``
    (dims 2 and 3 only), ``gradient_potential [a]``.
    """
    params = tuple(float(v) for v in params)
    if name == "gaussian":
        return _gaussian(dim, params[0] if params else 1.0)
    if name == "modulated_gaussian":
        k = np.zeros(dim)
        if params:
            if len(params) > dim:
                raise UsageError("modulated_gaussian takes at most dim parameters")
            k[: len(params)] = params
        else:
            k[0] = 1.0
        return _modulated_gaussian(dim, k)
    if name == "bump":
        return _bump(dim, params[0] if params else 2.0)
    if name == "zero_potential":
        return _zero_potential(dim)
    if name == "constant_potential":
        return _constant_potential(dim, params)
    if name == "rotational_potential":
        return _rotational_potential(dim, params[0] if params else 1.0)
    if name == "gradient_potential":
        return _gradient_potential(dim, params[0] if params else 1.0)
    raise UsageError(f"unknown catalog name {name!r}")
