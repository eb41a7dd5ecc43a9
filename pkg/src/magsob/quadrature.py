"""Integration primitives: box grids, log-radial grids, sphere rules, MC.

All deterministic rules share one reduction contract: node contributions
are summed by a fixed pairwise tree keyed by node index, so results do
not depend on evaluation order or worker count.  The sphere rules are

* ``N=1``: the two points ``{-1, +1}`` with unit weights,
* ``N=2``: ``order`` equally spaced angles, weight ``2*pi/order``,
* ``N=3``: product of per-hemisphere Gauss-Legendre nodes in the polar
  cosine (split at the equator, where ridge integrands kink) and a
  uniform azimuth with ``3*order`` angles; total weight ``4*pi``.

Monte Carlo sampling is counter-based: chunk ``c`` of a stream draws
from ``Philox(key=(seed, stream_id, c))``, so any partition of the index
range over workers reproduces the same numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import NumericDomainError, UsageError

__all__ = [
    "BoxGrid",
    "RadialGrid",
    "SphereRule",
    "McSampler",
    "build_sphere_rule",
    "integrate_box",
    "integrate_polar",
    "pairwise_sum",
    "sphere_area",
    "MC_CHUNK",
]

#: fixed MC chunk length; part of the reproducibility contract
MC_CHUNK = 65536


def sphere_area(n: int) -> float:
    """|S^{n-1}|, the surface measure of the unit sphere in R^n."""
    if n < 1:
        raise UsageError(f"dimension must be >= 1, got {n}")
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def pairwise_sum(values) -> float:
    """Sum by a fixed pairwise tree keyed by index.

    The array is zero-padded to the next power of two and adjacent pairs
    are combined level by level.  The result is independent of chunking
    and worker count, and reproducible bit-for-bit.
    """
    a = np.asarray(values, dtype=float).ravel()
    n = a.size
    if n == 0:
        return 0.0
    m = 1 << (n - 1).bit_length()
    if m != n:
        a = np.concatenate([a, np.zeros(m - n)])
    else:
        a = a.copy()
    while a.size > 1:
        a = a[0::2] + a[1::2]
    return float(a[0])


@dataclass(frozen=True)
class BoxGrid:
    """Tensor quadrature over the cube [-radius, radius]^dim."""

    dim: int
    radius: float
    nodes_per_dim: int
    rule: str = "gauss_legendre"

    def __post_init__(self):
        if self.dim < 1:
            raise UsageError(f"dim must be positive, got {self.dim}")
        if self.radius <= 0:
            raise UsageError(f"radius must be positive, got {self.radius}")
        if self.nodes_per_dim < 1:
            raise UsageError("nodes_per_dim must be positive")
        if self.rule not in ("gauss_legendre", "trapezoid"):
            raise UsageError(f"unknown box rule {self.rule!r}")

    def axis(self):
        """1D nodes and weights on [-radius, radius]."""
        n, r = self.nodes_per_dim, self.radius
        if self.rule == "gauss_legendre":
            t, w = leggauss(n)
            return t * r, w * r
        t = np.linspace(-r, r, n)
        if n == 1:
            return t, np.array([2.0 * r])
        w = np.full(n, 2.0 * r / (n - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
        return t, w

    def nodes(self):
        """Full tensor nodes ``(n, dim)`` and weights ``(n,)`` in lexicographic order."""
        t, w = self.axis()
        if self.dim == 1:
            return t[:, None].copy(), w.copy()
        axes = np.meshgrid(*([t] * self.dim), indexing="ij")
        pts = np.stack([a.ravel() for a in axes], axis=-1)
        ws = np.ones(1)
        for _ in range(self.dim):
            ws = np.multiply.outer(ws, w).ravel()
        return pts, ws


@dataclass(frozen=True)
class RadialGrid:
    """Logarithmic grid on [h_min, h_max] with trapezoid weights in log h."""

    h_min: float
    h_max: float
    count: int
    spacing: str = "log"

    def __post_init__(self):
        if not (0 < self.h_min < self.h_max):
            raise UsageError(
                f"need 0 < h_min < h_max, got ({self.h_min}, {self.h_max})"
            )
        if self.count < 2:
            raise UsageError("radial count must be >= 2")
        if self.spacing != "log":
            raise UsageError(f"unknown radial spacing {self.spacing!r}")

    def nodes(self):
        """Nodes ``h`` (strictly increasing) and weights for ``dh`` integration."""
        t = np.linspace(math.log(self.h_min), math.log(self.h_max), self.count)
        h = np.exp(t)
        dt = t[1] - t[0]
        w = np.full(self.count, dt)
        w[0] *= 0.5
        w[-1] *= 0.5
        return h, w * h


@dataclass(frozen=True)
class SphereRule:
    """Nodes on S^{N-1} with positive weights summing to |S^{N-1}|."""

    dim: int
    nodes: np.ndarray = field(repr=False)  # (n, dim), unit rows
    weights: np.ndarray = field(repr=False)  # (n,)

    def __len__(self):
        return len(self.weights)


def build_sphere_rule(N: int, order: int) -> SphereRule:
    """Quadrature on the unit sphere in R^N; see the module docstring."""
    if order < 1:
        raise UsageError(f"order must be >= 1, got {order}")
    if N == 1:
        nodes = np.array([[1.0], [-1.0]])
        weights = np.array([1.0, 1.0])
    elif N == 2:
        th = 2.0 * math.pi * np.arange(order) / order
        nodes = np.stack([np.cos(th), np.sin(th)], axis=1)
        weights = np.full(order, 2.0 * math.pi / order)
    elif N == 3:
        half = max(1, (order + 1) // 2)
        t, wt = leggauss(half)
        tp = 0.5 * (t + 1.0)  # per-hemisphere panel [0, 1]
        wp = 0.5 * wt
        tc = np.concatenate([-tp[::-1], tp])
        wc = np.concatenate([wp[::-1], wp])
        naz = 3 * order
        ph = 2.0 * math.pi * np.arange(naz) / naz
        st = np.sqrt(np.clip(1.0 - tc**2, 0.0, None))
        nodes = np.empty((tc.size * naz, 3))
        weights = np.empty(tc.size * naz)
        cph, sph = np.cos(ph), np.sin(ph)
        for i in range(tc.size):
            k = i * naz
            nodes[k : k + naz, 0] = st[i] * cph
            nodes[k : k + naz, 1] = st[i] * sph
            nodes[k : k + naz, 2] = tc[i]
            weights[k : k + naz] = wc[i] * 2.0 * math.pi / naz
    else:
        raise UsageError(f"sphere rule supports N in {{1,2,3}}, got {N}")
    return SphereRule(dim=N, nodes=nodes, weights=weights)


@dataclass(frozen=True)
class McSampler:
    """Counter-based Monte Carlo stream; identical (seed, count, stream_id)
    reproduce the identical sample sequence for any worker partition."""

    seed: int
    count: int
    stream_id: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise UsageError("mc count must be positive")

    def uniforms(self, start: int, stop: int, draws: int) -> np.ndarray:
        """Uniform (stop-start, draws) block for global sample indices [start, stop).

        Chunk ``c`` (fixed length ``MC_CHUNK``) is generated from a fresh
        ``Philox`` keyed by (seed, stream_id, c); requesting any index
        range yields the same numbers.
        """
        out = np.empty((stop - start, draws))
        c0, c1 = start // MC_CHUNK, (stop - 1) // MC_CHUNK
        for c in range(c0, c1 + 1):
            bit = np.random.Generator(
                np.random.Philox(key=[self.seed, self.stream_id, c, 0])
            )
            block = bit.random((MC_CHUNK, draws))
            lo = max(start, c * MC_CHUNK)
            hi = min(stop, (c + 1) * MC_CHUNK)
            out[lo - start : hi - start] = block[lo - c * MC_CHUNK : hi - c * MC_CHUNK]
        return out


def _check_finite(vals, nodes, what):
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        i = int(bad[0])
        raise NumericDomainError(
            f"non-finite {what} at node {i}: x = {np.asarray(nodes)[i]}",
            node_index=i,
            node=np.asarray(nodes)[i],
        )


def _apply(f, pts):
    """Evaluate a scalar integrand on (n, dim) points, vectorized if possible."""
    try:
        vals = np.asarray(f(pts), dtype=float)
        if vals.shape == (len(pts),):
            return vals
    except Exception:
        pass
    return np.array([float(f(p)) for p in pts])


def integrate_box(f, grid: BoxGrid) -> float:
    """Integral of ``f`` over the box, pairwise-tree reduced."""
    pts, w = grid.nodes()
    vals = _apply(f, pts)
    _check_finite(vals, pts, "integrand value")
    return pairwise_sum(w * vals)


def integrate_polar(g, grid: BoxGrid, radial: RadialGrid, sphere: SphereRule) -> float:
    """Integral of ``g(x, h, sigma)`` with the polar Jacobian ``h^{N-1}`` applied.

    Approximates the 2N-dimensional integral over (x, y = x + h sigma);
    callers supply the integrand without the Jacobian.
    """
    if grid.dim != sphere.dim:
        raise UsageError("box grid and sphere rule dimensions differ")
    X, WX = grid.nodes()
    h, wh = radial.nodes()
    S, WS = sphere.nodes, sphere.weights
    N = grid.dim
    whj = wh * h ** (N - 1)
    partials = np.empty(len(X))
    for i, x in enumerate(X):
        Y = x[None, None, :] + h[:, None, None] * S[None, :, :]
        try:
            vals = np.asarray(
                g(
                    np.broadcast_to(x, Y.shape[:2] + (N,)),
                    np.broadcast_to(h[:, None], Y.shape[:2]),
                    np.broadcast_to(S[None, :, :], Y.shape),
                ),
                dtype=float,
            )
            if vals.shape != Y.shape[:2]:
                raise ValueError
        except Exception:
            vals = np.array([[float(g(x, hj, s)) for s in S] for hj in h])
        _check_finite(vals.ravel(), Y.reshape(-1, N), "polar integrand value")
        partials[i] = float(np.einsum("js,j,s->", vals, whj, WS))
    return pairwise_sum(WX * partials)
