"""NumPy engine for the hot (x, h, sigma) loops.

This is the fallback selected at import when the compiled extension is
missing, and the only path for fields without a catalog descriptor.  Both
engines implement the same node semantics: for each outer node x_i the
inner (h, sigma) contributions are reduced into one partial value, and
the caller combines partials under the pairwise-tree contract.

``wq`` is the fully combined radial weight ``w_h * h^{N-1} * rho(h) / h^p``
for mollified energies; ``wj = w_h * delta^p * h^{-p-1}`` for thresholded
ones, with the indicator tested against the precomputed ``delta^p``.
"""

from __future__ import annotations

import numpy as np

IS_COMPILED = False


def _psi_diff(u_many, a_many, X, ux, h, sig):
    """|Psi_u(x, x+h sigma) - u(x)| pieces, shape (nx, nh, ns), complex."""
    nx, N = X.shape
    nh, ns = h.size, sig.shape[0]
    Y = X[:, None, None, :] + h[None, :, None, None] * sig[None, None, :, :]
    uy = np.asarray(u_many(Y.reshape(-1, N)), dtype=complex).reshape(nx, nh, ns)
    if a_many is None:
        return uy - ux[:, None, None]
    M = X[:, None, None, :] + 0.5 * h[None, :, None, None] * sig[None, None, :, :]
    AM = np.asarray(a_many(M.reshape(-1, N)), dtype=float).reshape(nx, nh, ns, N)
    phase = -h[None, :, None] * np.einsum("kd,ijkd->ijk", sig, AM)
    return np.exp(1j * phase) * uy - ux[:, None, None]


def _ppow(diff, p):
    re = np.abs(diff.real)
    im = np.abs(diff.imag)
    if p == 2.0:
        return re * re + im * im
    return re**p + im**p


def bbm_partials(u_many, a_many, p, X, ux, h, wq, sig, ws, out, i0, i1, chunk=32):
    """out[i] = sum_{j,k} |Psi_diff(x_i, h_j, sig_k)|_p^p wq_j ws_k for i in [i0, i1)."""
    for a in range(i0, i1, chunk):
        b = min(a + chunk, i1)
        diff = _psi_diff(u_many, a_many, X[a:b], ux[a:b], h, sig)
        out[a:b] = np.einsum("ijk,j,k->i", _ppow(diff, p), wq, ws)


def jdelta_partials(
    u_many, a_many, p, deltap, X, ux, h, wj, sig, ws, out, i0, i1, chunk=32
):
    """out[i] = sum_{j,k} 1{|Psi_diff|_p^p > deltap} wj_j ws_k for i in [i0, i1)."""
    for a in range(i0, i1, chunk):
        b = min(a + chunk, i1)
        diff = _psi_diff(u_many, a_many, X[a:b], ux[a:b], h, sig)
        ind = (_ppow(diff, p) > deltap).astype(float)
        out[a:b] = np.einsum("ijk,j,k->i", ind, wj, ws)


def jdelta_ray_values(u_many, a_many, p, deltap, x, ux, h, sig_row):
    """Indicator values 1{|Psi_diff(x, x+h sigma)|_p^p > deltap} along one ray."""
    X = np.asarray(x, float).reshape(1, -1)
    uxa = np.asarray([ux], dtype=complex)
    diff = _psi_diff(u_many, a_many, X, uxa, h, sig_row.reshape(1, -1))
    return (_ppow(diff, p)[0, :, 0] > deltap).astype(float)
