"""Radial mollifier families, their diagnostics, and sphere-moment constants.

Two normalization regimes are supported.  ``full`` kernels satisfy

    int_0^inf rho(r) r^{N-1} dr = 1,    int_delta^inf rho(r) r^{N-1} dr -> 0,

while ``unit_interval`` kernels are normalized over (0, 1] and carry a
finite tail moment int_1^inf rho(r) r^{N-3} dr.  The built-in families are
the fractional kernels ``rho(r) = 2(1-s) r^{2-2s-N}`` and their truncated
variants ``rho(r) = 2(1-s) R^{2s-2} r^{2-2s-N}`` on (0, R].  Both expose
closed-form radial masses; these are what the energy quadratures use for
the sub-grid radial completion, with the log-grid quadrature kept as a
self-test.

The sphere-moment constant is

    Q_{N,p} = (1/p) int_{S^{N-1}} |w . sigma|_p^p dsigma

for a fixed reference unit vector w = e_N (rotation invariance makes the
choice immaterial; the tests check three random references), with the
closed form |S^{N-1}|/(2N) at p = 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NumericDomainError, UsageError
from .fields import lp_pow_rows
from .quadrature import SphereRule, sphere_area

__all__ = [
    "Mollifier",
    "MollifierDiagnostics",
    "QConstant",
    "fractional_mollifier",
    "truncated_fractional_mollifier",
    "mollifier_diagnostics",
    "q_constant",
    "q_constant_exact",
    "sphere_moment_identity_residual",
]


@dataclass(frozen=True)
class Mollifier:
    """Radial kernel with a declared normalization regime.

    ``radial_mass(a, b)`` returns int_a^b rho(r) r^{dim-1} dr; the built-in
    families supply it in closed form.  Custom kernels may omit it, in
    which case masses are computed on a log grid (adequate only for
    kernels that do not concentrate below the grid floor).
    """

    dim: int
    eval_many: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    regime: str = "full"
    concentration: float = 0.0
    support_cutoff: float | None = None
    label: str = "mollifier"
    radial_mass: Callable[[float, float], float] | None = field(
        default=None, repr=False
    )

    def __post_init__(self):
        if self.regime not in ("full", "unit_interval"):
            raise UsageError(f"unknown mollifier regime {self.regime!r}")

    def mass(self, a: float, b: float) -> float:
        if self.radial_mass is not None:
            return self.radial_mass(a, b)
        return _numeric_radial_mass(self.eval_many, self.dim, a, b)


def _numeric_radial_mass(rho, N, a, b, count=4000):
    if b <= a:
        return 0.0
    lo = a if a > 0 else max(b * 1e-12, 1e-300)
    if not math.isfinite(b):
        b = lo * 1e12
    t = np.linspace(math.log(lo), math.log(b), count)
    r = np.exp(t)
    w = np.full(count, t[1] - t[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    vals = np.asarray(rho(r), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NumericDomainError("mollifier evaluates non-finite on radial sample")
    return float(np.sum(w * r * vals * r ** (N - 1)))


def fractional_mollifier(s: float, N: int) -> Mollifier:
    """rho(r) = 2(1-s) r^{2-2s-N} for all r > 0 (unit-interval regime)."""
    if not 0.0 < s < 1.0:
        raise UsageError(f"s must lie in (0, 1), got {s}")
    c = 2.0 * (1.0 - s)
    expo = 2.0 - 2.0 * s - N

    def ev(r):
        return c * np.asarray(r, dtype=float) ** expo

    def mass(a, b):
        # int rho r^{N-1} dr has antiderivative r^{2-2s}
        bt = b ** (2.0 - 2.0 * s) if math.isfinite(b) else math.inf
        at = a ** (2.0 - 2.0 * s) if a > 0 else 0.0
        return bt - at

    return Mollifier(
        dim=N,
        eval_many=ev,
        regime="unit_interval",
        concentration=s,
        support_cutoff=None,
        label=f"fractional(s={s:g})",
        radial_mass=mass,
    )


def truncated_fractional_mollifier(s: float, R: float, N: int) -> Mollifier:
    """rho(r) = 2(1-s) R^{2s-2} r^{2-2s-N} on (0, R], zero beyond (full regime)."""
    if not 0.0 < s < 1.0:
        raise UsageError(f"s must lie in (0, 1), got {s}")
    if R <= 0:
        raise UsageError(f"R must be positive, got {R}")
    c = 2.0 * (1.0 - s) * R ** (2.0 * s - 2.0)
    expo = 2.0 - 2.0 * s - N

    def ev(r):
        r = np.asarray(r, dtype=float)
        out = c * r**expo
        return np.where(r > R, 0.0, out)

    def mass(a, b):
        b = min(b, R)
        a = min(a, R)
        if b <= a:
            return 0.0
        at = (a / R) ** (2.0 - 2.0 * s) if a > 0 else 0.0
        return (b / R) ** (2.0 - 2.0 * s) - at

    return Mollifier(
        dim=N,
        eval_many=ev,
        regime="full",
        concentration=s,
        support_cutoff=float(R),
        label=f"truncated(s={s:g},R={R:g})",
        radial_mass=mass,
    )


@dataclass(frozen=True)
class MollifierDiagnostics:
    mass: float
    tail: float
    remark_tail: float


def _remark_tail(rho: Mollifier) -> float:
    """int_1^inf rho(r) r^{N-3} dr, closed form for the built-in families."""
    s = rho.concentration
    if rho.label.startswith("fractional"):
        return (1.0 - s) / s
    if rho.label.startswith("truncated"):
        R = rho.support_cutoff
        if R <= 1.0:
            return 0.0
        return (1.0 - s) / s * (R ** (2.0 * s - 2.0) - R**-2.0)
    # generic kernel: numeric moment with weight r^{N-3} over (1, horizon)
    def weighted(r):
        return np.asarray(rho.eval_many(r), dtype=float) * np.asarray(r, float) ** (-2.0)

    hi = rho.support_cutoff if rho.support_cutoff else 1e6
    return _numeric_radial_mass(weighted, rho.dim, 1.0, hi)


def mollifier_diagnostics(rho: Mollifier, N: int, delta: float) -> MollifierDiagnostics:
    """Normalization mass, delta-tail, and the unit-interval tail moment.

    ``mass`` is the regime normalization (over (0, cutoff] for full
    kernels with a cutoff, over (0, 1] in the unit-interval regime);
    ``tail`` is int_delta^inf rho r^{N-1} dr (infinite for the
    untruncated fractional family).
    """
    if N != rho.dim:
        raise UsageError(f"mollifier built for dim {rho.dim}, asked for {N}")
    if delta <= 0:
        raise UsageError(f"delta must be positive, got {delta}")
    sample = np.geomspace(max(delta, 1e-8) * 1e-2, rho.support_cutoff or 1e4, 64)
    vals = np.asarray(rho.eval_many(sample), dtype=float)
    if not np.all(np.isfinite(vals)) or np.any(vals < 0):
        raise NumericDomainError("mollifier sample is non-finite or negative")

    if rho.regime == "unit_interval":
        mass = rho.mass(0.0, 1.0)
    else:
        mass = rho.mass(0.0, rho.support_cutoff or math.inf)
    if rho.regime == "unit_interval" and rho.support_cutoff is None:
        # int_delta^inf r^{N-1} rho diverges for the fractional family
        tail = rho.mass(delta, math.inf)
    else:
        tail = rho.mass(delta, rho.support_cutoff or math.inf)
    return MollifierDiagnostics(
        mass=float(mass), tail=float(tail), remark_tail=float(_remark_tail(rho))
    )


@dataclass(frozen=True)
class QConstant:
    dim: int
    p: float
    value: float
    quadrature_value: float


def q_constant_exact(N: int, p: float) -> float:
    """Closed-form Q_{N,p} = 2 pi^{(N-1)/2} Gamma((p+1)/2) / (p Gamma((N+p)/2))."""
    return (
        2.0
        * math.pi ** ((N - 1) / 2.0)
        * math.gamma((p + 1.0) / 2.0)
        / (p * math.gamma((N + p) / 2.0))
    )


def q_constant(N: int, p: float, rule: SphereRule) -> QConstant:
    """Sphere moment (1/p) sum_sigma w |e_N . sigma|^p.

    At p = 2 the closed form |S^{N-1}|/(2N) is returned as the value and
    the quadrature result is kept alongside as a cross-check.
    """
    if rule.dim != N:
        raise UsageError(f"sphere rule has dim {rule.dim}, expected {N}")
    if not (p > 1.0 and math.isfinite(p)):
        raise UsageError(f"p must be finite and > 1, got {p}")
    om = np.zeros(N)
    om[-1] = 1.0
    quad = float(np.sum(rule.weights * np.abs(rule.nodes @ om) ** p) / p)
    if p == 2.0:
        return QConstant(dim=N, p=p, value=sphere_area(N) / (2.0 * N), quadrature_value=quad)
    return QConstant(dim=N, p=p, value=quad, quadrature_value=quad)


def sphere_moment_identity_residual(z, p: float, rule: SphereRule) -> float:
    """Relative defect of sum_sigma w |z . sigma|_p^p = p Q_{N,p} |z|_p^p."""
    z = np.asarray(z, dtype=complex)
    if z.shape != (rule.dim,):
        raise UsageError(f"z must be a complex {rule.dim}-vector, got shape {z.shape}")
    if np.all(z == 0):
        return 0.0
    zs = rule.nodes @ z
    lhs = float(np.sum(rule.weights * (np.abs(zs.real) ** p + np.abs(zs.imag) ** p)))
    q = q_constant(rule.dim, p, rule).value
    zp = float(np.linalg.norm(z.real) ** p + np.linalg.norm(z.imag) ** p)
    denom = p * q * zp
    return abs(lhs - denom) / denom
