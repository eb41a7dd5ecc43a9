"""Command-line front end.

Subcommands: ``energy``, ``bbm``, ``jdelta``, ``qnp``, ``pointwise``,
``study``, ``audit``.  Configuration comes from an INI-style file
(``key = value`` lines under bracketed sections) with command-line flags
taking precedence.  Reports are emitted as CSV
(``param,value,est_error,reference,residual`` with 17 significant
digits, LF line endings) or JSON.

Exit codes: 0 success, 1 failed study/audit verdict, 2 usage error,
3 numeric-domain error.  ``MAGSOB_THREADS`` caps the worker count
(0 = auto); results are byte-identical for any setting.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from dataclasses import dataclass, fields as dc_fields, replace

import numpy as np

from .errors import NumericDomainError, UsageError
from .fields import catalog
from .functionals import (
    bbm_energy,
    jdelta_energy,
    local_energy,
    magnetic_gradient,
    pointwise_bbm_density,
    pointwise_jdelta,
)
from .kernels import q_constant, q_constant_exact
from .quadrature import BoxGrid, McSampler, RadialGrid, build_sphere_rule
from .studies import (
    bbm_convergence_study,
    bound_audit,
    jdelta_convergence_study,
    make_kernel,
    pointwise_convergence_study,
)

__all__ = ["RunConfig", "parse_config", "run", "main"]

_DEFAULT_NODES = {1: 256, 2: 96, 3: 32}
_DEFAULT_SPHERE = {1: 1, 2: 16, 3: 8}


@dataclass(frozen=True)
class RunConfig:
    """Flat, serializable run configuration; see ``to_text`` for the layout."""

    dim: int = 1
    p: float = 2.0
    field: str = "gaussian"
    potential: str = "zero"
    kernel: str = "truncated:s=0.999"
    s_list: tuple = (0.9, 0.99, 0.999)
    delta_list: tuple = (1e-2, 1e-3, 1e-4)
    delta: float = 1e-3
    x: tuple = (1.0,)
    mode: str = "bbm"
    kind: str = "bbm"
    tol: float = 0.05
    radius: float = 8.0
    nodes_per_dim: int = 0  # 0 = per-dim default
    box_rule: str = "gauss_legendre"
    h_min: float = 1e-6
    h_max: float = 0.0  # 0 = 2 * radius
    count: int = 160
    sphere_order: int = 0  # 0 = per-dim default
    mc_seed: int = 42
    mc_count: int = 2_000_000
    use_mc: int = -1  # -1 = auto (dim 3 only)
    fmt: str = "csv"
    out: str = ""

    def to_text(self) -> str:
        return (
            "[run]\n"
            f"dim = {self.dim}\n"
            f"p = {self.p:.17g}\n"
            f"field = {self.field}\n"
            f"potential = {self.potential}\n"
            f"kernel = {self.kernel}\n"
            f"s_list = {','.join(format(v, '.17g') for v in self.s_list)}\n"
            f"delta_list = {','.join(format(v, '.17g') for v in self.delta_list)}\n"
            f"delta = {self.delta:.17g}\n"
            f"x = {','.join(format(v, '.17g') for v in self.x)}\n"
            f"mode = {self.mode}\n"
            f"kind = {self.kind}\n"
            f"tol = {self.tol:.17g}\n"
            "[quadrature]\n"
            f"radius = {self.radius:.17g}\n"
            f"nodes_per_dim = {self.nodes_per_dim}\n"
            f"rule = {self.box_rule}\n"
            "[radial]\n"
            f"h_min = {self.h_min:.17g}\n"
            f"h_max = {self.h_max:.17g}\n"
            f"count = {self.count}\n"
            "[sphere]\n"
            f"order = {self.sphere_order}\n"
            "[mc]\n"
            f"seed = {self.mc_seed}\n"
            f"count = {self.mc_count}\n"
            f"use_mc = {self.use_mc}\n"
            "[output]\n"
            f"format = {self.fmt}\n"
            f"path = {self.out}\n"
        )


_CONFIG_KEYS = {
    ("run", "dim"): ("dim", int),
    ("run", "p"): ("p", float),
    ("run", "field"): ("field", str),
    ("run", "potential"): ("potential", str),
    ("run", "kernel"): ("kernel", str),
    ("run", "s_list"): ("s_list", "floats"),
    ("run", "delta_list"): ("delta_list", "floats"),
    ("run", "delta"): ("delta", float),
    ("run", "x"): ("x", "floats"),
    ("run", "mode"): ("mode", str),
    ("run", "kind"): ("kind", str),
    ("run", "tol"): ("tol", float),
    ("quadrature", "radius"): ("radius", float),
    ("quadrature", "nodes_per_dim"): ("nodes_per_dim", int),
    ("quadrature", "rule"): ("box_rule", str),
    ("radial", "h_min"): ("h_min", float),
    ("radial", "h_max"): ("h_max", float),
    ("radial", "count"): ("count", int),
    ("sphere", "order"): ("sphere_order", int),
    ("mc", "seed"): ("mc_seed", int),
    ("mc", "count"): ("mc_count", int),
    ("mc", "use_mc"): ("use_mc", int),
    ("output", "format"): ("fmt", str),
    ("output", "path"): ("out", str),
}


def _parse_floats(text):
    vals = [v for v in (s.strip() for s in text.split(",")) if v]
    try:
        return tuple(float(v) for v in vals)
    except ValueError:
        raise UsageError(f"cannot parse float list {text!r}")


def _validate(cfg: RunConfig) -> RunConfig:
    if cfg.dim not in (1, 2, 3):
        raise UsageError(f"dim must be 1, 2, or 3, got `dim` = {cfg.dim}")
    if not cfg.p > 1.0:
        raise UsageError(f"out-of-range value for key `p`: {cfg.p}")
    if cfg.radius <= 0:
        raise UsageError(f"out-of-range value for key `radius`: {cfg.radius}")
    if cfg.nodes_per_dim < 0:
        raise UsageError(f"out-of-range value for key `nodes_per_dim`: {cfg.nodes_per_dim}")
    if cfg.h_min <= 0:
        raise UsageError(f"out-of-range value for key `h_min`: {cfg.h_min}")
    if cfg.h_max < 0:
        raise UsageError(f"out-of-range value for key `h_max`: {cfg.h_max}")
    if cfg.count < 2:
        raise UsageError(f"out-of-range value for key `count`: {cfg.count}")
    if cfg.sphere_order < 0:
        raise UsageError(f"out-of-range value for key `order`: {cfg.sphere_order}")
    if cfg.mc_count < 1:
        raise UsageError(f"out-of-range value for key `mc.count`: {cfg.mc_count}")
    if cfg.delta <= 0:
        raise UsageError(f"out-of-range value for key `delta`: {cfg.delta}")
    if cfg.fmt not in ("csv", "json"):
        raise UsageError(f"output format must be csv or json, got {cfg.fmt!r}")
    return cfg


def parse_config(path: str) -> RunConfig:
    """Read an INI-style config file into a validated RunConfig."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            cp.read_file(fh, source=path)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}")
    except configparser.Error as exc:
        raise UsageError(f"malformed config: {exc}")
    values = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            spec = _CONFIG_KEYS.get((section, key))
            if spec is None:
                raise UsageError(f"unknown config key [{section}] {key}")
            name, typ = spec
            try:
                if typ == "floats":
                    values[name] = _parse_floats(raw)
                else:
                    values[name] = typ(raw)
            except (ValueError, UsageError):
                raise UsageError(f"cannot parse config key [{section}] {key} = {raw!r}")
    return _validate(replace(RunConfig(), **values))


def _parse_spec(spec: str):
    """'name' or 'name:k=v,k=v' or 'name:v1,v2' -> (name, {keys}, [positional])."""
    if ":" in spec:
        name, rest = spec.split(":", 1)
    else:
        name, rest = spec, ""
    named, positional = {}, []
    for item in (s.strip() for s in rest.split(",") if s.strip()):
        if "=" in item:
            k, v = item.split("=", 1)
            named[k.strip()] = float(v)
        else:
            positional.append(float(item))
    return name.strip(), named, positional


_FIELD_KEYS = {"gaussian": ("a",), "modulated_gaussian": None, "bump": ("r",)}
_POT_ALIASES = {
    "zero": "zero_potential",
    "constant": "constant_potential",
    "rotational": "rotational_potential",
    "gradient": "gradient_potential",
}
_POT_KEYS = {
    "zero_potential": (),
    "constant_potential": None,
    "rotational_potential": ("b",),
    "gradient_potential": ("a",),
}


def _build_field(spec: str, dim: int):
    name, named, pos = _parse_spec(spec)
    if name not in _FIELD_KEYS:
        raise UsageError(f"unknown field {name!r}")
    if name == "modulated_gaussian":
        params = pos or [named[k] for k in sorted(named)]
    else:
        keys = _FIELD_KEYS[name]
        params = pos or [named[k] for k in keys if k in named]
    return catalog(name, params, dim=dim)


def _build_potential(spec: str, dim: int):
    name, named, pos = _parse_spec(spec)
    name = _POT_ALIASES.get(name, name)
    if name not in _POT_KEYS:
        raise UsageError(f"unknown potential {name!r}")
    if name == "constant_potential":
        params = pos or [named[k] for k in sorted(named)]
    else:
        keys = _POT_KEYS[name]
        params = pos or [named[k] for k in keys if k in named]
    return catalog(name, params, dim=dim)


def _build_kernel(spec: str, dim: int, default_R: float):
    name, named, pos = _parse_spec(spec)
    if name not in ("truncated", "fractional"):
        raise UsageError(f"unknown kernel family {name!r}")
    s = named.get("s", pos[0] if pos else 0.999)
    R = named.get("R", pos[1] if len(pos) > 1 else default_R)
    return make_kernel(name, s, dim, R)


def _quad(cfg: RunConfig):
    nodes = cfg.nodes_per_dim or _DEFAULT_NODES[cfg.dim]
    order = cfg.sphere_order or _DEFAULT_SPHERE[cfg.dim]
    h_max = cfg.h_max or 2.0 * cfg.radius
    grid = BoxGrid(cfg.dim, cfg.radius, nodes, cfg.box_rule)
    radial = RadialGrid(cfg.h_min, h_max, cfg.count)
    sphere = build_sphere_rule(cfg.dim, order)
    return grid, radial, sphere


def _sampler(cfg: RunConfig):
    use = cfg.use_mc if cfg.use_mc >= 0 else (1 if cfg.dim == 3 else 0)
    return McSampler(cfg.mc_seed, cfg.mc_count) if use else None


def _g(v) -> str:
    return "" if v is None else format(float(v), ".17g")


def _emit_rows(rows, fmt, kind):
    """rows: list of (param, value, est_error, reference)."""
    if fmt == "csv":
        lines = ["param,value,est_error,reference,residual"]
        for p, v, e, ref in rows:
            resid = None if ref is None else abs(v - ref) / max(ref, 1e-300)
            lines.append(",".join([_g(p), _g(v), _g(e), _g(ref), _g(resid)]))
        return "\n".join(lines) + "\n"
    payload = {
        "kind": kind,
        "rows": [
            {
                "param": p,
                "value": v,
                "est_error": e,
                "reference": ref,
                "residual": None if ref is None else abs(v - ref) / max(ref, 1e-300),
            }
            for p, v, e, ref in rows
        ],
    }
    return json.dumps(payload, indent=2) + "\n"


def _write(text: str, cfg: RunConfig):
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _add_common(sp):
    sp.add_argument("--config", default=None, help="INI config file; flags override")
    sp.add_argument("--dim", type=int, default=None)
    sp.add_argument("--p", type=float, default=None)
    sp.add_argument("--field", default=None)
    sp.add_argument("--potential", default=None)
    sp.add_argument("--kernel", default=None)
    sp.add_argument("--s-list", dest="s_list", default=None)
    sp.add_argument("--delta-list", dest="delta_list", default=None)
    sp.add_argument("--delta", type=float, default=None)
    sp.add_argument("--x", default=None, help="comma-separated coordinates")
    sp.add_argument("--mode", choices=("bbm", "jdelta"), default=None)
    sp.add_argument("--kind", choices=("bbm", "jdelta", "pointwise"), default=None)
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--radius", type=float, default=None)
    sp.add_argument("--nodes-per-dim", dest="nodes_per_dim", type=int, default=None)
    sp.add_argument("--box-rule", dest="box_rule", default=None)
    sp.add_argument("--radial-h-min", dest="h_min", type=float, default=None)
    sp.add_argument("--radial-h-max", dest="h_max", type=float, default=None)
    sp.add_argument("--radial-count", dest="count", type=int, default=None)
    sp.add_argument("--sphere-order", dest="sphere_order", type=int, default=None)
    sp.add_argument("--mc-seed", dest="mc_seed", type=int, default=None)
    sp.add_argument("--mc-count", dest="mc_count", type=int, default=None)
    sp.add_argument("--mc", dest="use_mc", action="store_const", const=1, default=None)
    sp.add_argument("--no-mc", dest="use_mc", action="store_const", const=0)
    sp.add_argument("--format", dest="fmt", choices=("csv", "json"), default=None)
    sp.add_argument("--out", default=None)


def _merge(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else RunConfig()
    updates = {}
    for f in dc_fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is None:
            continue
        if f.name in ("s_list", "delta_list", "x") and isinstance(v, str):
            v = _parse_floats(v)
        updates[f.name] = v
    return _validate(replace(cfg, **updates))


def _cmd_energy(cfg):
    grid, _, _ = _quad(cfg)
    u = _build_field(cfg.field, cfg.dim)
    A = _build_potential(cfg.potential, cfg.dim)
    ev = local_energy(u, A, cfg.p, grid)
    _write(_emit_rows([(cfg.p, ev.value, ev.estimated_error, None)], cfg.fmt, "energy"), cfg)
    return 0


def _cmd_bbm(cfg):
    grid, radial, sphere = _quad(cfg)
    u = _build_field(cfg.field, cfg.dim)
    A = _build_potential(cfg.potential, cfg.dim)
    rho = _build_kernel(cfg.kernel, cfg.dim, 2.0 * cfg.radius)
    ev = bbm_energy(u, A, rho, cfg.p, grid, radial, sphere, sampler=_sampler(cfg))
    ref = cfg.p * q_constant(cfg.dim, cfg.p, sphere).value * local_energy(u, A, cfg.p, grid).value
    _write(
        _emit_rows([(rho.concentration, ev.value, ev.estimated_error, ref)], cfg.fmt, "bbm"),
        cfg,
    )
    return 0


def _cmd_jdelta(cfg):
    grid, radial, sphere = _quad(cfg)
    u = _build_field(cfg.field, cfg.dim)
    A = _build_potential(cfg.potential, cfg.dim)
    ev = jdelta_energy(u, A, cfg.delta, cfg.p, grid, radial, sphere, sampler=_sampler(cfg))
    ref = q_constant(cfg.dim, cfg.p, sphere).value * local_energy(u, A, cfg.p, grid).value
    _write(_emit_rows([(cfg.delta, ev.value, ev.estimated_error, ref)], cfg.fmt, "jdelta"), cfg)
    return 0


def _cmd_qnp(cfg):
    _, _, sphere = _quad(cfg)
    q = q_constant(cfg.dim, cfg.p, sphere)
    exact = q_constant_exact(cfg.dim, cfg.p)
    _write(_emit_rows([(cfg.p, q.value, abs(q.quadrature_value - exact), exact)], cfg.fmt, "qnp"), cfg)
    return 0


def _cmd_pointwise(cfg):
    _, radial, sphere = _quad(cfg)
    u = _build_field(cfg.field, cfg.dim)
    A = _build_potential(cfg.potential, cfg.dim)
    x = np.asarray(cfg.x, dtype=float)
    if x.size == 1 and cfg.dim > 1:
        x = np.full(cfg.dim, float(x[0]))
    if x.size != cfg.dim:
        raise UsageError(f"--x needs {cfg.dim} coordinates, got {x.size}")
    v2 = float(np.sum(np.abs(magnetic_gradient(u, A, x)) ** 2))
    q = q_constant(cfg.dim, 2.0, sphere).value
    if cfg.mode == "bbm":
        rho = _build_kernel(cfg.kernel, cfg.dim, 2.0 * cfg.radius)
        val = pointwise_bbm_density(u, A, rho, x, radial, sphere)
        param, ref = rho.concentration, 2.0 * q * v2
    else:
        val = pointwise_jdelta(u, A, cfg.delta, x, radial, sphere)
        param, ref = cfg.delta, q * v2
    _write(_emit_rows([(param, val, 0.0, ref)], cfg.fmt, "pointwise"), cfg)
    return 0


def _cmd_study(cfg):
    grid, radial, sphere = _quad(cfg)
    u = _build_field(cfg.field, cfg.dim)
    A = _build_potential(cfg.potential, cfg.dim)
    family = _parse_spec(cfg.kernel)[0]
    kernel_R = 2.0 * cfg.radius
    named = _parse_spec(cfg.kernel)[1]
    if "R" in named:
        kernel_R = named["R"]
    if cfg.kind == "bbm":
        report = bbm_convergence_study(
            u, A, cfg.p, cfg.s_list, family, grid, radial, sphere, kernel_R, cfg.tol
        )
    elif cfg.kind == "jdelta":
        report = jdelta_convergence_study(
            u, A, cfg.p, cfg.delta_list, grid, radial, sphere, cfg.tol
        )
    else:
        params = cfg.s_list if cfg.mode == "bbm" else cfg.delta_list
        report = pointwise_convergence_study(
            u, A, grid, params, cfg.mode, radial, sphere, family, kernel_R, cfg.tol
        )
    _write(report.to_csv() if cfg.fmt == "csv" else report.to_json(), cfg)
    return 0 if report.passed else 1


def _cmd_audit(cfg):
    grid, radial, sphere = _quad(cfg)
    u = _build_field(cfg.field, cfg.dim)
    A = _build_potential(cfg.potential, cfg.dim)
    kernel_R = _parse_spec(cfg.kernel)[1].get("R", 2.0 * cfg.radius)
    kernels = [make_kernel("truncated", s, cfg.dim, kernel_R) for s in cfg.s_list]
    report = bound_audit(u, A, cfg.p, kernels, cfg.delta_list, grid, radial, sphere)
    _write(report.to_csv() if cfg.fmt == "csv" else report.to_json(), cfg)
    return 0 if report.passed else 1


_COMMANDS = {
    "energy": _cmd_energy,
    "bbm": _cmd_bbm,
    "jdelta": _cmd_jdelta,
    "qnp": _cmd_qnp,
    "pointwise": _cmd_pointwise,
    "study": _cmd_study,
    "audit": _cmd_audit,
}


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="magsob",
        description="Nonlocal magnetic Sobolev energies and convergence studies",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        _add_common(sub.add_parser(name))
    return ap


def run(argv) -> int:
    """Execute one CLI invocation; returns the process exit status."""
    try:
        args = _build_parser().parse_args(list(argv))
        cfg = _merge(args)
        return _COMMANDS[args.command](cfg)
    except SystemExit as exc:  # argparse usage failure
        code = exc.code if isinstance(exc.code, int) else 2
        return 2 if code != 0 else 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except NumericDomainError as exc:
        print(f"numeric-domain error: {exc}", file=sys.stderr)
        return 3


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
