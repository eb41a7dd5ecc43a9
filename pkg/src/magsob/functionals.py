"""Energy functionals: local magnetic p-energy, mollified nonlocal energy,
thresholded functionals, pointwise densities, maximal operators.

The nonlocal double integrals are evaluated in polar form y = x + h sigma
with the Jacobian h^{N-1}.  The mollified energy integrates

    |Psi_u(x, x+h sigma) - u(x)|_p^p / h^p * rho(h)

over the log-radial grid and adds the closed-form sub-grid radial term:
below ``h_min`` the difference quotient equals its h -> 0 limit
|(grad u - i A u)(x) . sigma|_p^p to within O(h_min) (and evaluating it by
differences there would only amplify rounding), so that region
contributes ``rho.mass(0, h_min)`` times the limit value.  Concentrating
kernels (s -> 1) place almost all of their radial mass in that regime,
which is exactly how the nonlocal-to-local limit emerges.

The thresholded functional integrates the indicator of
|Psi_diff|_p > delta against delta^p h^{-p-1} by dense log-radial
sampling; the indicator region stays clear of h = 0, so no sub-grid term
arises.  Level sets are sampled, never root-found: Psi-differences need
not be monotone in h.

Outer x loops run in fixed-size chunks (optionally across threads capped
by ``MAGSOB_THREADS``); per-x partials are combined by the pairwise-tree
reduction, so results are byte-identical for any worker count.
"""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import NumericDomainError, UsageError
from .fields import (
    F_TRUNCATED,
    A_ZERO,
    ScalarField,
    lp_pow_rows,
    magnetic_gradient,
    magnetic_gradient_many,
    psi,
)
from .kernels import Mollifier
from .quadrature import (
    BoxGrid,
    McSampler,
    MC_CHUNK,
    RadialGrid,
    SphereRule,
    pairwise_sum,
    sphere_area,
)

__all__ = [
    "EnergyValue",
    "local_energy",
    "field_mass",
    "bbm_energy",
    "jdelta_energy",
    "jdelta_ray",
    "jdelta_ray_oracle",
    "pointwise_bbm_density",
    "pointwise_jdelta",
    "directional_maximal",
    "hl_maximal",
    "truncate_field",
    "segment_bound_residual",
]

X_CHUNK = 64  # fixed outer chunk; part of the determinism contract


@dataclass(frozen=True)
class EnergyValue:
    """A computed functional value with an order-of-magnitude error tag."""

    value: float
    estimated_error: float
    config_digest: str

    def __post_init__(self):
        if not math.isfinite(self.value) or self.value < 0:
            raise NumericDomainError(f"energy value {self.value} is not finite >= 0")


def _digest(*parts) -> str:
    text = "|".join(repr(p) for p in parts)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def _check_pair(u: ScalarField, A, grid=None, sphere=None):
    if u.dim != A.dim:
        raise UsageError(f"field dim {u.dim} != potential dim {A.dim}")
    if grid is not None and grid.dim != u.dim:
        raise UsageError(f"grid dim {grid.dim} != field dim {u.dim}")
    if sphere is not None and sphere.dim != u.dim:
        raise UsageError(f"sphere rule dim {sphere.dim} != field dim {u.dim}")


def _check_p(p: float):
    if not (p > 1.0 and math.isfinite(p)):
        raise UsageError(f"p must be finite and > 1, got {p}")


def _workers() -> int:
    raw = os.environ.get("MAGSOB_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"MAGSOB_THREADS must be an integer, got {raw!r}")
    if n < 0:
        raise UsageError("MAGSOB_THREADS must be >= 0")
    if n == 0:
        n = min(os.cpu_count() or 1, 8)
    return n


def _run_partials(n: int, worker):
    """Run ``worker(i0, i1)`` over fixed chunks, possibly threaded.

    Chunk boundaries depend only on ``n``; workers write disjoint output
    slices, so the result is independent of the thread count.
    """
    spans = [(a, min(a + X_CHUNK, n)) for a in range(0, n, X_CHUNK)]
    workers = _workers()
    if workers <= 1 or len(spans) <= 1:
        for a, b in spans:
            worker(a, b)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(lambda ab: worker(*ab), spans))


def _is_zero_field(u: ScalarField) -> bool:
    return u.sup_abs is not None and u.sup_abs == 0.0


def _engine_args(u: ScalarField, A):
    """(kind, args...) for the selected backend."""
    kind = backend.select(u, A)
    if kind == "cython":
        fcode, fpar = u.core
        acode, apar = A.core
        return (
            "cython",
            fcode,
            np.asarray(fpar, dtype=float),
            acode,
            np.asarray(apar, dtype=float),
        )
    a_many = None if (A.core is not None and A.core[0] == A_ZERO) else A.eval_many
    return ("python", u.eval_many, a_many)


def _bbm_partials(u, A, p, X, ux, h, wq, S, WS):
    out = np.empty(len(X))
    eng = _engine_args(u, A)
    if eng[0] == "cython":
        core = backend.compiled()
        _, fc, fp, ac, ap = eng
        uxre = np.ascontiguousarray(ux.real)
        uxim = np.ascontiguousarray(ux.imag)

        def worker(a, b):
            core.bbm_partials(fc, fp, ac, ap, p, X, uxre, uxim, h, wq, S, WS, out, a, b)

        _run_partials(len(X), worker)
    else:
        _, u_many, a_many = eng
        py = backend.fallback()

        def worker(a, b):
            py.bbm_partials(u_many, a_many, p, X, ux, h, wq, S, WS, out, a, b)

        _run_partials(len(X), worker)
    return out


def _jdelta_partials(u, A, p, deltap, X, ux, h, wj, S, WS):
    out = np.empty(len(X))
    eng = _engine_args(u, A)
    if eng[0] == "cython":
        core = backend.compiled()
        _, fc, fp, ac, ap = eng
        uxre = np.ascontiguousarray(ux.real)
        uxim = np.ascontiguousarray(ux.imag)

        def worker(a, b):
            core.jdelta_partials(fc, fp, ac, ap, p, deltap, X, uxre, uxim, h, wj, S, WS, out, a, b)

        _run_partials(len(X), worker)
    else:
        _, u_many, a_many = eng
        py = backend.fallback()

        def worker(a, b):
            py.jdelta_partials(u_many, a_many, p, deltap, X, ux, h, wj, S, WS, out, a, b)

        _run_partials(len(X), worker)
    return out


def _finite_partials(partials, X, what):
    bad = np.flatnonzero(~np.isfinite(partials))
    if bad.size:
        i = int(bad[0])
        raise NumericDomainError(
            f"non-finite {what} partial at x-node {i}: x = {X[i]}",
            node_index=i,
            node=X[i],
        )


def local_energy(u: ScalarField, A, p: float, grid: BoxGrid) -> EnergyValue:
    """int |grad u - i A u|_p^p dx over the truncated box."""
    _check_pair(u, A, grid)
    _check_p(p)
    digest = _digest("local", u.label, A.label, p, grid)
    if _is_zero_field(u):
        return EnergyValue(0.0, 0.0, digest)
    X, WX = grid.nodes()
    V = magnetic_gradient_many(u, A, X)
    vals = lp_pow_rows(V, p)
    _finite_partials(vals, X, "local energy")
    value = pairwise_sum(WX * vals)
    return EnergyValue(max(value, 0.0), abs(value) * 1e-12, digest)


def field_mass(u: ScalarField, p: float, grid: BoxGrid) -> float:
    """int |u|_p^p dx over the box (the |u|^2 mass at p = 2)."""
    _check_p(p)
    if grid.dim != u.dim:
        raise UsageError(f"grid dim {grid.dim} != field dim {u.dim}")
    if _is_zero_field(u):
        return 0.0
    X, WX = grid.nodes()
    vals = lp_pow_rows(u.eval_many(X), p)
    return pairwise_sum(WX * vals)


def _completion_rows(u, A, p, X, S, WS):
    """Per-x angular average of |(grad u - i A u) . sigma|_p^p."""
    V = magnetic_gradient_many(u, A, X)
    VS = V @ S.T
    if p == 2.0:
        q = VS.real**2 + VS.imag**2
    else:
        q = np.abs(VS.real) ** p + np.abs(VS.imag) ** p
    return q @ WS


def bbm_energy(
    u: ScalarField,
    A,
    rho: Mollifier,
    p: float,
    grid: BoxGrid,
    radial: RadialGrid,
    sphere: SphereRule,
    sampler: McSampler | None = None,
) -> EnergyValue:
    """Mollified nonlocal energy iint |Psi_diff|_p^p / |x-y|^p rho(|x-y|).

    ``sampler`` switches to Monte Carlo over (x, h, sigma); the
    deterministic tensor path is the default and the sensible choice for
    N <= 2.
    """
    _check_pair(u, A, grid, sphere)
    _check_p(p)
    if rho.dim != u.dim:
        raise UsageError(f"mollifier dim {rho.dim} != field dim {u.dim}")
    digest = _digest("bbm", u.label, A.label, rho.label, p, grid, radial, sphere.dim, len(sphere), sampler)
    if _is_zero_field(u):
        return EnergyValue(0.0, 0.0, digest)
    if sampler is not None:
        value, err = _mc_energy(u, A, p, "bbm", None, rho, grid.radius, radial, sampler)
        return EnergyValue(value, err, digest)
    X, WX = grid.nodes()
    h, wh = radial.nodes()
    rv = np.asarray(rho.eval_many(h), dtype=float)
    wq = wh * h ** (u.dim - 1) * rv / h**p
    mass0 = rho.mass(0.0, radial.h_min)
    S, WS = sphere.nodes, sphere.weights
    ux = np.asarray(u.eval_many(X), dtype=complex)
    partials = _bbm_partials(u, A, p, X, ux, h, wq, S, WS)
    _finite_partials(partials, X, "bbm")
    comp = _completion_rows(u, A, p, X, S, WS)
    value = pairwise_sum(WX * (partials + mass0 * comp))
    # sub-grid term is exact to O(h_min); box truncation error is tail-sized
    est = mass0 * radial.h_min * (1.0 + float(np.max(comp, initial=0.0))) + abs(value) * 1e-10
    return EnergyValue(max(value, 0.0), est, digest)


def jdelta_energy(
    u: ScalarField,
    A,
    delta: float,
    p: float,
    grid: BoxGrid,
    radial: RadialGrid,
    sphere: SphereRule,
    sampler: McSampler | None = None,
) -> EnergyValue:
    """Thresholded energy iint_{|Psi_diff|_p > delta} delta^p/|x-y|^{N+p}."""
    _check_pair(u, A, grid, sphere)
    _check_p(p)
    if delta <= 0:
        raise UsageError(f"delta must be positive, got {delta}")
    digest = _digest("jdelta", u.label, A.label, delta, p, grid, radial, sphere.dim, len(sphere), sampler)
    if _is_zero_field(u):
        return EnergyValue(0.0, 0.0, digest)
    if u.sup_abs is not None and delta >= 2.0 * u.sup_abs:
        # |Psi_diff| <= |u(x)| + |u(y)|: the indicator set is empty
        return EnergyValue(0.0, 0.0, digest)
    if sampler is not None:
        value, err = _mc_energy(u, A, p, "jdelta", delta, None, grid.radius, radial, sampler)
        return EnergyValue(value, err, digest)
    X, WX = grid.nodes()
    h, wh = radial.nodes()
    wj = wh * float(delta) ** p * h ** (-p - 1.0)
    deltap = float(delta) ** p
    S, WS = sphere.nodes, sphere.weights
    ux = np.asarray(u.eval_many(X), dtype=complex)
    partials = _jdelta_partials(u, A, p, deltap, X, ux, h, wj, S, WS)
    _finite_partials(partials, X, "jdelta")
    value = pairwise_sum(WX * partials)
    return EnergyValue(max(value, 0.0), abs(value) * 1e-10, digest)


def jdelta_ray(
    u: ScalarField, A, x, sigma, delta: float, p: float, radial: RadialGrid
) -> float:
    """Inner radial integral of the thresholded energy along one ray."""
    _check_pair(u, A)
    _check_p(p)
    x = np.asarray(x, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    h, wh = radial.nodes()
    wj = wh * float(delta) ** p * h ** (-p - 1.0)
    a_many = None if (A.core is not None and A.core[0] == A_ZERO) else A.eval_many
    ind = backend.fallback().jdelta_ray_values(
        u.eval_many, a_many, p, float(delta) ** p, x, u.eval_one(x), h, sigma
    )
    return float(np.dot(wj, ind))


def jdelta_ray_oracle(u: ScalarField, A, x, sigma, p: float) -> float:
    """Analytic delta -> 0 limit of the per-ray radial integral:
    (1/p) |(grad u - i A u)(x) . sigma|_p^p."""
    _check_p(p)
    V = magnetic_gradient(u, A, x)
    z = complex(np.dot(V, np.asarray(sigma, dtype=float)))
    return (abs(z.real) ** p + abs(z.imag) ** p) / p


def _check_kernel_tail(rho: Mollifier):
    t = np.geomspace(1.0, 1e6, 48)
    vals = np.asarray(rho.eval_many(t), dtype=float) / t**2
    if not np.all(np.isfinite(vals)):
        raise NumericDomainError("kernel tail t^{-2} rho(t) is non-finite")
    if vals[-1] > 10.0 * (vals[0] + 1e-300) and vals[-1] > vals[-8]:
        raise NumericDomainError("kernel tail t^{-2} rho(t) appears unbounded")


def pointwise_bbm_density(
    u: ScalarField, A, rho: Mollifier, x, radial: RadialGrid, sphere: SphereRule
) -> float:
    """int |Psi_diff(x, y)|^2/|x-y|^2 rho(|x-y|) dy around one point (p = 2)."""
    _check_pair(u, A, None, sphere)
    _check_kernel_tail(rho)
    X = np.asarray(x, dtype=float).reshape(1, u.dim)
    h, wh = radial.nodes()
    rv = np.asarray(rho.eval_many(h), dtype=float)
    wq = wh * h ** (u.dim - 1) * rv / h**2
    S, WS = sphere.nodes, sphere.weights
    ux = np.asarray(u.eval_many(X), dtype=complex)
    partials = _bbm_partials(u, A, 2.0, X, ux, h, wq, S, WS)
    _finite_partials(partials, X, "pointwise density")
    comp = _completion_rows(u, A, 2.0, X, S, WS)
    return float(partials[0] + rho.mass(0.0, radial.h_min) * comp[0])


def pointwise_jdelta(
    u: ScalarField, A, delta: float, x, radial: RadialGrid, sphere: SphereRule
) -> float:
    """int_{|Psi_diff| > delta} delta^2/|x-y|^{N+2} dy around one point."""
    _check_pair(u, A, None, sphere)
    if delta <= 0:
        raise UsageError(f"delta must be positive, got {delta}")
    X = np.asarray(x, dtype=float).reshape(1, u.dim)
    h, wh = radial.nodes()
    wj = wh * float(delta) ** 2 * h**-3.0
    S, WS = sphere.nodes, sphere.weights
    ux = np.asarray(u.eval_many(X), dtype=complex)
    partials = _jdelta_partials(u, A, 2.0, float(delta) ** 2, X, ux, h, wj, S, WS)
    _finite_partials(partials, X, "pointwise jdelta")
    return float(partials[0])


def _eval_along(f, pts):
    try:
        vals = np.asarray(f(pts), dtype=float)
        if vals.shape == (len(pts),):
            return vals
    except Exception:
        pass
    return np.array([float(f(p)) for p in pts])


def directional_maximal(f, x, sigma, t_max: float, count: int = 64) -> float:
    """max over a log grid of t in (0, t_max] of (1/t) int_0^t f(x + s sigma) ds.

    Each segment average uses composite Simpson with >= 64 panels; the
    grid includes t_max itself.
    """
    if t_max <= 0:
        raise UsageError("t_max must be positive")
    x = np.asarray(x, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    ts = np.geomspace(t_max * 1e-3, t_max, max(2, count))
    panels = 64
    s01 = np.linspace(0.0, 1.0, 2 * panels + 1)
    w = np.ones(2 * panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w /= 3.0 * 2 * panels  # Simpson weights for the unit interval, averaged
    best = 0.0
    for t in ts:
        pts = x[None, :] + (t * s01)[:, None] * sigma[None, :]
        avg = float(np.dot(w, _eval_along(f, pts)))
        if avg > best:
            best = avg
    return best


def hl_maximal(f, x, radii, resolution: int = 32) -> float:
    """max over the given radii of the ball average of f around x."""
    radii = [float(r) for r in radii]
    if not radii or min(radii) <= 0:
        raise UsageError("radii must be a nonempty list of positive reals")
    x = np.asarray(x, dtype=float)
    N = x.size
    best = 0.0
    if N == 1:
        t, w = np.polynomial.legendre.leggauss(resolution)
        for r in radii:
            pts = (x[0] + r * t)[:, None]
            avg = float(np.dot(w * 0.5, _eval_along(f, pts)))
            best = max(best, avg)
        return best
    from .quadrature import build_sphere_rule

    rule = build_sphere_rule(N, resolution)
    t, w = np.polynomial.legendre.leggauss(resolution)
    s01 = 0.5 * (t + 1.0)
    ws = 0.5 * w
    for r in radii:
        s = r * s01
        pts = (s[:, None, None] * rule.nodes[None, :, :] + x[None, None, :]).reshape(-1, N)
        vals = _eval_along(f, pts).reshape(len(s), len(rule))
        integral = float(np.einsum("ij,i,j->", vals, ws * r * s ** (N - 1), rule.weights))
        ball = sphere_area(N) * r**N / N
        best = max(best, integral / ball)
    return best


def truncate_field(u: ScalarField, M: float) -> ScalarField:
    """Radial clipping of field values to modulus M (1-Lipschitz on C).

    The result carries no analytic gradient; derivative paths fall back
    to finite differences.
    """
    if M <= 0:
        raise UsageError(f"M must be positive, got {M}")

    def ev(P):
        vals = np.asarray(u.eval_many(P), dtype=complex)
        mod = np.abs(vals)
        scale = np.where(mod > M, M / np.where(mod == 0, 1.0, mod), 1.0)
        return vals * scale

    core = None
    if u.core is not None:
        icode, ipar = u.core
        core = (F_TRUNCATED, (float(M), float(icode), *ipar))
    sup = None if u.sup_abs is None else min(u.sup_abs, M)
    return ScalarField(
        dim=u.dim,
        eval_many=ev,
        grad_many=None,
        support_radius=u.support_radius,
        label=f"truncate({u.label},M={M:g})",
        sup_abs=sup,
        core=core,
    )


def segment_bound_residual(u: ScalarField, A, x, h: float, sigma) -> float:
    """|Psi_diff(x, x+h sigma)| minus the maximal-function majorant
    h M_sigma(|grad u - i A u|, x) + h^2 |grad A| M_sigma(|u|, x);
    nonpositive (up to quadrature slack) certifies the segment bound."""
    if not 0.0 < h < 1.0:
        raise UsageError(f"h must lie in (0, 1), got {h}")
    x = np.asarray(x, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    lhs = abs(psi(u, A, x, x + h * sigma) - u.eval_one(x))

    def grad_mod(pts):
        return np.linalg.norm(magnetic_gradient_many(u, A, pts), axis=1)

    def field_mod(pts):
        return np.abs(u.eval_many(pts))

    m1 = directional_maximal(grad_mod, x, sigma, t_max=h)
    m2 = directional_maximal(field_mod, x, sigma, t_max=h)
    return lhs - (h * m1 + h * h * A.lipschitz_bound * m2)


def _mc_energy(u, A, p, mode, delta, rho, box_radius, radial, sampler: McSampler):
    """Monte Carlo estimate over (x, h, sigma); counter-based and chunked."""
    N = u.dim
    R = float(box_radius)
    hmin, hmax = radial.h_min, radial.h_max
    if rho is not None and rho.support_cutoff is not None:
        hmax = min(hmax, rho.support_cutoff)
    L = math.log(hmax / hmin)
    vol = (2.0 * R) ** N * sphere_area(N) * L
    draws = N + 2 + (1 if N == 3 else 0)
    deltap = float(delta) ** p if delta is not None else 0.0
    mass0 = rho.mass(0.0, hmin) if rho is not None else 0.0
    a_many = None if (A.core is not None and A.core[0] == A_ZERO) else A.eval_many
    py = backend.fallback()
    sums, sqs = [], []
    n = sampler.count
    for a in range(0, n, MC_CHUNK):
        b = min(a + MC_CHUNK, n)
        U = sampler.uniforms(a, b, draws)
        X = (2.0 * U[:, :N] - 1.0) * R
        hvals = hmin * np.exp(L * U[:, N])
        if N == 1:
            sig = np.where(U[:, N + 1] < 0.5, -1.0, 1.0)[:, None]
        elif N == 2:
            th = 2.0 * math.pi * U[:, N + 1]
            sig = np.stack([np.cos(th), np.sin(th)], axis=1)
        else:
            z = 2.0 * U[:, N + 1] - 1.0
            phi = 2.0 * math.pi * U[:, N + 2]
            st = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
            sig = np.stack([st * np.cos(phi), st * np.sin(phi), z], axis=1)
        Y = X + hvals[:, None] * sig
        uy = np.asarray(u.eval_many(Y), dtype=complex)
        ux = np.asarray(u.eval_many(X), dtype=complex)
        if a_many is None:
            diff = uy - ux
        else:
            Mid = X + 0.5 * hvals[:, None] * sig
            AM = np.asarray(a_many(Mid), dtype=float)
            phase = -hvals * np.einsum("id,id->i", sig, AM)
            diff = np.exp(1j * phase) * uy - ux
        if p == 2.0:
            q = diff.real**2 + diff.imag**2
        else:
            q = np.abs(diff.real) ** p + np.abs(diff.imag) ** p
        if mode == "bbm":
            rv = np.asarray(rho.eval_many(hvals), dtype=float)
            term = q / hvals**p * rv * hvals ** (N - 1) * hvals * vol
            if mass0 != 0.0:
                V = magnetic_gradient_many(u, A, X)
                vs = np.einsum("id,id->i", V, sig.astype(complex))
                if p == 2.0:
                    qc = vs.real**2 + vs.imag**2
                else:
                    qc = np.abs(vs.real) ** p + np.abs(vs.imag) ** p
                term = term + mass0 * (2.0 * R) ** N * sphere_area(N) * qc
        else:
            term = (q > deltap) * deltap * hvals**-p * vol
        sums.append(float(np.sum(term)))
        sqs.append(float(np.sum(term * term)))
    total = pairwise_sum(sums)
    mean = total / n
    var = max(pairwise_sum(sqs) / n - mean * mean, 0.0)
    return max(mean, 0.0), math.sqrt(var / n)
