"""Parameter sweeps, limit extrapolation, and inequality audits.

A study evaluates a functional along a parameter list, extrapolates to
the limit (linear in ``1 - s`` for mollifier sweeps, linear in ``delta``
for threshold sweeps; the limits are proved, the rates are an
implementation ansatz reported alongside the raw values), compares
against the local-energy reference ``p Q_{N,p} E`` (or ``Q_{N,p} E``),
and records named pass/fail verdicts.  Reports serialize to JSON and CSV
and are byte-identical for identical configurations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .fields import ScalarField, lp_pow_rows, magnetic_gradient_many
from .functionals import (
    EnergyValue,
    bbm_energy,
    field_mass,
    jdelta_energy,
    local_energy,
    pointwise_bbm_density,
    pointwise_jdelta,
    segment_bound_residual,
    truncate_field,
)
from .kernels import (
    Mollifier,
    fractional_mollifier,
    q_constant,
    truncated_fractional_mollifier,
)
from .quadrature import BoxGrid, RadialGrid, SphereRule, sphere_area

__all__ = [
    "Verdict",
    "StudyReport",
    "bbm_convergence_study",
    "jdelta_convergence_study",
    "pointwise_convergence_study",
    "bound_audit",
    "make_kernel",
]

_TINY = 1e-300


@dataclass(frozen=True)
class Verdict:
    name: str
    passed: bool
    margin: float


@dataclass(frozen=True)
class StudyReport:
    study_kind: str
    parameters: tuple[tuple[float, EnergyValue], ...]
    reference: float
    extrapolated: float
    relative_residual: float
    verdicts: tuple[Verdict, ...]

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def to_dict(self) -> dict:
        return {
            "study_kind": self.study_kind,
            "params": [p for p, _ in self.parameters],
            "values": [
                {
                    "value": ev.value,
                    "est_error": ev.estimated_error,
                    "config_digest": ev.config_digest,
                }
                for _, ev in self.parameters
            ],
            "reference": self.reference,
            "extrapolated": self.extrapolated,
            "residual": self.relative_residual,
            "verdicts": [
                {"name": v.name, "passed": v.passed, "margin": v.margin}
                for v in self.verdicts
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        def g(x):
            return format(float(x), ".17g")

        lines = ["param,value,est_error,reference,residual"]
        for p, ev in self.parameters:
            resid = abs(ev.value - self.reference) / max(self.reference, _TINY)
            lines.append(
                ",".join([g(p), g(ev.value), g(ev.estimated_error), g(self.reference), g(resid)])
            )
        return "\n".join(lines) + "\n"


def _report(kind, params, reference, extrapolated, verdicts) -> StudyReport:
    if not verdicts:
        raise UsageError("a study must produce at least one verdict")
    residual = abs(extrapolated - reference) / max(reference, _TINY)
    return StudyReport(
        study_kind=kind,
        parameters=tuple(params),
        reference=float(reference),
        extrapolated=float(extrapolated),
        relative_residual=float(residual),
        verdicts=tuple(verdicts),
    )


def make_kernel(family: str, s: float, N: int, R: float | None) -> Mollifier:
    if family == "truncated":
        if R is None:
            raise UsageError("truncated kernel family needs a cutoff R")
        return truncated_fractional_mollifier(s, R, N)
    if family == "fractional":
        return fractional_mollifier(s, N)
    raise UsageError(f"unknown kernel family {family!r}")


def bbm_convergence_study(
    u: ScalarField,
    A,
    p: float,
    s_list,
    kernel_family: str,
    grid: BoxGrid,
    radial: RadialGrid,
    sphere: SphereRule,
    kernel_R: float | None = None,
    tol: float = 0.05,
) -> StudyReport:
    """Mollified energy along s, extrapolated to s = 1 by F = F_lim + c(1-s)."""
    s_list = [float(s) for s in s_list]
    if len(s_list) < 2 or any(not 0 < s < 1 for s in s_list):
        raise UsageError("s_list must hold at least two values in (0, 1)")
    if sorted(s_list) != s_list:
        raise UsageError("s_list must be increasing")
    if kernel_R is None:
        kernel_R = 2.0 * grid.radius
    energy = local_energy(u, A, p, grid)
    q = q_constant(u.dim, p, sphere)
    reference = p * q.value * energy.value
    params = []
    for s in s_list:
        rho = make_kernel(kernel_family, s, u.dim, kernel_R)
        params.append((s, bbm_energy(u, A, rho, p, grid, radial, sphere)))
    e1, e2 = 1.0 - s_list[-2], 1.0 - s_list[-1]
    f1, f2 = params[-2][1].value, params[-1][1].value
    extrapolated = (f2 * e1 - f1 * e2) / (e1 - e2)
    errs = [abs(ev.value - reference) for _, ev in params]
    jitter = 0.01 * max(reference, _TINY)
    mono_margin = min(
        (errs[i] + jitter - errs[i + 1]) / max(reference, _TINY)
        for i in range(len(errs) - 1)
    )
    residual = abs(extrapolated - reference) / max(reference, _TINY)
    verdicts = [
        Verdict("monotone_improvement", mono_margin >= 0.0, mono_margin),
        Verdict("extrapolation_residual", residual <= tol, tol - residual),
    ]
    return _report("bbm_sweep", params, reference, extrapolated, verdicts)


def jdelta_convergence_study(
    u: ScalarField,
    A,
    p: float,
    delta_list,
    grid: BoxGrid,
    radial: RadialGrid,
    sphere: SphereRule,
    tol: float = 0.05,
) -> StudyReport:
    """Thresholded energy along decreasing delta with Richardson in delta."""
    deltas = [float(d) for d in delta_list]
    if not deltas or any(d <= 0 for d in deltas):
        raise UsageError("delta_list must hold positive values")
    if sorted(deltas, reverse=True) != deltas:
        raise UsageError("delta_list must be decreasing")
    energy = local_energy(u, A, p, grid)
    q = q_constant(u.dim, p, sphere)
    reference = q.value * energy.value
    params = [(d, jdelta_energy(u, A, d, p, grid, radial, sphere)) for d in deltas]
    if len(deltas) >= 3:
        d1, d2 = deltas[-2], deltas[-1]
        j1, j2 = params[-2][1].value, params[-1][1].value
        extrapolated = j2 + (j2 - j1) * d2 / (d1 - d2)
    else:
        extrapolated = params[-1][1].value
    if len(deltas) >= 2:
        j_prev, j_last = params[-2][1].value, params[-1][1].value
        change = abs(j_last - j_prev) / max(j_last, _TINY) if j_last > 0 else 0.0
    else:
        change = 0.0
    residual = abs(extrapolated - reference) / max(reference, _TINY)
    verdicts = [
        Verdict("stabilization", change < 0.10, 0.10 - change),
        Verdict("extrapolation_residual", residual <= tol, tol - residual),
    ]
    return _report("jdelta_sweep", params, reference, extrapolated, verdicts)


def pointwise_convergence_study(
    u: ScalarField,
    A,
    x_grid: BoxGrid,
    params,
    mode: str,
    radial: RadialGrid,
    sphere: SphereRule,
    kernel_family: str = "truncated",
    kernel_R: float | None = None,
    tol: float = 0.05,
) -> StudyReport:
    """Pointwise densities against their local limits on an x grid (p = 2).

    Values are discrete L^1 masses of the computed density under the
    box-grid weights; the L^1 error and the worst pointwise residual at
    the tightest parameter go into the verdicts.
    """
    if mode not in ("bbm", "jdelta"):
        raise UsageError(f"mode must be 'bbm' or 'jdelta', got {mode!r}")
    params = [float(v) for v in params]
    if not params:
        raise UsageError("parameter list must be nonempty")
    if kernel_R is None:
        kernel_R = 2.0 * x_grid.radius
    X, WX = x_grid.nodes()
    q = q_constant(u.dim, 2.0, sphere)
    V = magnetic_gradient_many(u, A, X)
    local_density = lp_pow_rows(V, 2.0)
    factor = 2.0 * q.value if mode == "bbm" else q.value
    limit = factor * local_density
    reference = float(np.dot(WX, limit))
    rows = []
    digests = []
    for v in params:
        if mode == "bbm":
            rho = make_kernel(kernel_family, v, u.dim, kernel_R)
            dens = np.array(
                [pointwise_bbm_density(u, A, rho, x, radial, sphere) for x in X]
            )
        else:
            dens = np.array([pointwise_jdelta(u, A, v, x, radial, sphere) for x in X])
        mass = float(np.dot(WX, dens))
        l1_err = float(np.dot(WX, np.abs(dens - limit)))
        digests.append((dens, l1_err))
        rows.append((v, EnergyValue(mass, l1_err, "pointwise")))
    dens_last, l1_last = digests[-1]
    sup_limit = float(np.max(limit, initial=0.0))
    max_resid = float(np.max(np.abs(dens_last - limit), initial=0.0)) / max(sup_limit, _TINY)
    l1_margin = tol - l1_last / max(reference, _TINY)
    verdicts = [
        Verdict("l1_error", l1_margin >= 0.0, l1_margin),
        Verdict("max_pointwise_residual", max_resid <= 4.0 * tol, 4.0 * tol - max_resid),
    ]
    extrapolated = rows[-1][1].value
    return _report("pointwise_sweep", rows, reference, extrapolated, verdicts)


def bound_audit(
    u: ScalarField,
    A,
    p: float,
    kernels,
    delta_list,
    grid: BoxGrid,
    radial: RadialGrid,
    sphere: SphereRule,
) -> StudyReport:
    """Numerical audit of the explicit inequalities (p = 2).

    Checks, in order: the explicit mollified-energy upper bound per
    full-regime kernel, threshold-energy monotonicity under radial
    truncation of the field, the per-segment maximal-function bound on a
    3 x 3 x 3 sample, and boundedness/stabilization of the thresholded
    energy along delta.
    """
    if p != 2.0:
        raise UsageError("bound_audit implements the p = 2 inequalities")
    kernels = list(kernels)
    deltas = [float(d) for d in delta_list]
    if not kernels or not deltas:
        raise UsageError("bound_audit needs nonempty kernel and delta lists")
    energy = local_energy(u, A, p, grid)
    mass = field_mass(u, p, grid)
    area = sphere_area(u.dim)
    grad_a = A.lipschitz_bound
    rhs = 2.0 * area * energy.value + 2.0 * area * (2.0 + grad_a**2) * mass
    verdicts = []
    params = []
    worst = 0.0
    for rho in kernels:
        if rho.regime != "full":
            continue
        ev = bbm_energy(u, A, rho, p, grid, radial, sphere)
        params.append((rho.concentration, ev))
        worst = max(worst, ev.value)
        margin = (rhs - ev.value) / max(rhs, _TINY)
        verdicts.append(Verdict(f"main_bbm3[{rho.label}]", ev.value <= rhs, margin))
    if not params:
        raise UsageError("bound_audit needs at least one full-regime kernel")

    sup = u.sup_abs
    if sup is None:
        sup = float(np.max(np.abs(u.eval_many(grid.nodes()[0])), initial=0.0))
    d_small = deltas[-1]
    j_full = jdelta_energy(u, A, d_small, p, grid, radial, sphere)
    for frac in (0.25, 0.5, 1.0):
        m = frac * sup
        if m <= 0:
            continue
        j_m = jdelta_energy(truncate_field(u, m), A, d_small, p, grid, radial, sphere)
        ok = j_m.value <= j_full.value + 1e-12
        verdicts.append(
            Verdict(
                f"truncation_monotone[M={frac:g}*sup]",
                ok,
                (j_full.value + 1e-12 - j_m.value) / max(j_full.value, _TINY),
            )
        )

    r = grid.radius
    xs = [np.full(u.dim, f * r) for f in (-0.45, 0.1, 0.55)]
    hs = (0.15, 0.4, 0.85)
    sig_rows = [sphere.nodes[i % len(sphere)] for i in range(3)]
    worst_seg = -math.inf
    for x in xs:
        for h in hs:
            for sg in sig_rows:
                worst_seg = max(worst_seg, segment_bound_residual(u, A, x, h, sg))
    verdicts.append(Verdict("segment_bound", worst_seg <= 1e-3, 1e-3 - worst_seg))

    jvals = [jdelta_energy(u, A, d, p, grid, radial, sphere).value for d in deltas]
    finite = all(math.isfinite(v) for v in jvals)
    if len(jvals) >= 2 and max(jvals[-2:]) > 0:
        change = abs(jvals[-1] - jvals[-2]) / max(jvals[-1], _TINY)
    else:
        change = 0.0
    verdicts.append(Verdict("jdelta_bounded", finite and change < 0.10, 0.10 - change))
    denom = energy.value + (grad_a**2 + 1.0) * mass
    ratio = max(jvals) / max(denom, _TINY)
    verdicts.append(Verdict("jdelta_to_energy_ratio", True, ratio))

    return _report("bound_audit", params, rhs, worst, verdicts)
