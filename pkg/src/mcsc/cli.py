"""Command-line interface: ``mcsc <command> --config job.json [--out DIR] ...``.

Commands
--------
check      identity suite (and mapping residuals when a mapping is given)
gamma      solve and store the gamma set of a domain
map        images of a list of points
trace      traced boundary polygons as CSV plus residuals
solve-m0   classical parameter problem for a simply connected target
render     SVG of the image of a polar grid and of the traced boundaries

Exit status is 0 when every requested tolerance is met, 1 when a tolerance
check fails, 2 for configuration errors and 3 for numerical failures.
Errors are printed to stderr as ``{"error": ..., "context": {...}}``.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .domain import CircularDomain, DomainError, validate_domain
from .identities import DEFAULT_TOLERANCES, format_rows, identity_suite
from .paths import default_clearance
from .prefactor import GammaRootError, find_gamma
from .prime import PrimeEvaluator
from .scmap import (
    MappingSpec,
    QuadratureError,
    SpecError,
    map_along,
    map_points,
    residuals_from_traces,
    solve_m0,
    trace_all,
    traces_to_csv,
)
from .slitmaps import SlitMapKind

COMMANDS = ("check", "gamma", "map", "trace", "solve-m0", "render")

EXIT_OK, EXIT_TOLERANCE, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULTS = {
    "prime": {"level": 6, "tolerance": 1e-8},
    "seed": 0,
    "samples": None,
    "grid": {"radial": 8, "angular": 16, "resolution": 48},
    "tolerances": {**DEFAULT_TOLERANCES, "closure": 1e-6, "turning": 1e-4, "solve_m0": 1e-6},
}

_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_KIND = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["half-plane-radial", "circular-slit-disc", "unbounded-radial"]},
        "zero": _POINT,
        "pole": _POINT,
    },
}
_DOMAIN = {
    "type": "object",
    "additionalProperties": False,
    "required": ["circles"],
    "properties": {
        "circles": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["center", "radius"],
                "properties": {
                    "center": _POINT,
                    "radius": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                },
            },
        }
    },
}
_GAMMAS = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "roots"],
    "properties": {
        "kind": _KIND,
        "roots": {
            "type": "object",
            "additionalProperties": {"type": "array", "items": _POINT, "minItems": 2, "maxItems": 2},
        },
        "residual": {"type": "number"},
    },
}
_VERTEX = {
    "type": "object",
    "additionalProperties": False,
    "required": ["beta"],
    "properties": {
        "angle": {"type": "number"},
        "point": _POINT,
        "beta": {"type": "number", "exclusiveMinimum": -1, "maximum": 1},
    },
    "oneOf": [{"required": ["angle"]}, {"required": ["point"]}],
}
_MAPPING = {
    "type": "object",
    "additionalProperties": False,
    "required": ["domain", "prevertices"],
    "properties": {
        "domain": _DOMAIN,
        "prevertices": {"type": "array", "items": {"type": "array", "items": _VERTEX}},
        "gammas": {"oneOf": [_GAMMAS, {"type": "string"}]},
        "kind": _KIND,
        "bounded": {"type": "boolean"},
        "zeta_inf": {"oneOf": [_POINT, {"type": "null"}]},
        "A": _POINT,
        "B": _POINT,
        "base_point": {"oneOf": [_POINT, {"type": "null"}]},
    },
}
SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "domain": _DOMAIN,
        "prime": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "level": {"type": "integer", "minimum": 0, "maximum": 16},
                "tolerance": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "kind": _KIND,
        "mapping": {"oneOf": [_MAPPING, {"type": "string"}]},
        "target": {"type": "array", "items": _POINT, "minItems": 3, "maxItems": 12},
        "points": {"type": "array", "items": _POINT},
        "samples": {"oneOf": [{"type": "integer", "minimum": 3}, {"type": "null"}]},
        "seed": {"type": "integer", "minimum": 0},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "radial": {"type": "integer", "minimum": 1, "maximum": 100},
                "angular": {"type": "integer", "minimum": 3, "maximum": 360},
                "resolution": {"type": "integer", "minimum": 4, "maximum": 1000},
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: {"type": "number", "exclusiveMinimum": 0} for k in DEFAULTS["tolerances"]},
        },
    },
}


class ConfigError(ValueError):
    def __init__(self, message, context=None):
        super().__init__(message)
        self.context = context or {}


# -- configuration ------------------------------------------------------------------


def load_config(path) -> dict:
    """Parse and validate a job file; files it references are inlined."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}", {"path": str(path)})
    text = path.read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"invalid JSON: {exc.msg}", {"path": str(path), "line": exc.lineno, "column": exc.colno}
        ) from exc
    validate_config(cfg)
    return resolve_references(cfg, path.parent)


def validate_config(cfg: dict) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        field = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(
            f"config field {field}: {err.message}",
            {"field": field, "problems": len(errors)},
        )


def _read_json(base: Path, name: str, what: str):
    p = (base / name).resolve()
    if not p.is_file():
        raise ConfigError(f"{what} file not found: {p}", {"field": what, "path": str(p)})
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"invalid JSON in {p}: {exc.msg}", {"path": str(p), "line": exc.lineno, "column": exc.colno}
        ) from exc


def resolve_references(cfg: dict, base: Path) -> dict:
    cfg = copy.deepcopy(cfg)
    if isinstance(cfg.get("mapping"), str):
        cfg["mapping"] = _read_json(base, cfg["mapping"], "mapping")
        jsonschema.validate(cfg["mapping"], _MAPPING)
    mapping = cfg.get("mapping")
    if mapping is not None and isinstance(mapping.get("gammas"), str):
        mapping["gammas"] = _read_json(base, mapping["gammas"], "mapping/gammas")
    return cfg


def normalize_config(cfg: dict) -> dict:
    """Config with defaults filled in; applying it twice changes nothing."""
    out = copy.deepcopy(cfg)
    out.setdefault("prime", {})
    for k, v in DEFAULTS["prime"].items():
        out["prime"].setdefault(k, v)
    out.setdefault("seed", DEFAULTS["seed"])
    out.setdefault("samples", DEFAULTS["samples"])
    out.setdefault("grid", {})
    for k, v in DEFAULTS["grid"].items():
        out["grid"].setdefault(k, v)
    out.setdefault("tolerances", {})
    for k, v in DEFAULTS["tolerances"].items():
        out["tolerances"].setdefault(k, v)
    return out


def dump_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


# -- helpers ---------------------------------------------------------------------------


def _domain(cfg) -> CircularDomain:
    if "domain" in cfg:
        data = cfg["domain"]
    elif "mapping" in cfg:
        data = cfg["mapping"]["domain"]
    else:
        raise ConfigError("a domain (or a mapping) is required", {"field": "domain"})
    d = CircularDomain.from_json(data)
    report = validate_domain(d, warn=False)
    if not report.ok:
        raise ConfigError("; ".join(report.violations), {"field": "domain"})
    return d


def _evaluator(cfg, domain) -> PrimeEvaluator:
    return PrimeEvaluator(domain, cfg["prime"]["level"], cfg["prime"]["tolerance"])


def _mapping(cfg, p: PrimeEvaluator) -> MappingSpec:
    data = cfg.get("mapping")
    if data is None:
        raise ConfigError("this command needs a mapping", {"field": "mapping"})
    gammas = None
    if "gammas" not in data:
        kind = SlitMapKind.from_json(data.get("kind", {"kind": "half-plane-radial"}))
        gammas = find_gamma(p, kind)
    try:
        return MappingSpec.from_json(data, gammas)
    except SpecError as exc:
        raise ConfigError(str(exc), {"field": "mapping", "problems": exc.problems}) from exc


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    return path


def _pair(z) -> list[float]:
    return [float(z.real), float(z.imag)]


# -- commands ------------------------------------------------------------------------


def cmd_check(cfg, out: Path) -> int:
    domain = _domain(cfg)
    p = _evaluator(cfg, domain)
    tol = cfg["tolerances"]
    rows = identity_suite(p, seed=cfg["seed"], tolerances={k: tol[k] for k in DEFAULT_TOLERANCES})
    table = [r.to_json() for r in rows]
    if "mapping" in cfg:
        spec = _mapping(cfg, p)
        res = residuals_from_traces(spec, trace_all(spec, p, cfg["samples"]))
        extra = [
            {"name": "closure", "worst": res.max_closure, "tolerance": tol["closure"]},
            {"name": "turning", "worst": res.max_turning_defect, "tolerance": tol["turning"]},
        ]
        for e in extra:
            e["passed"] = bool(e["worst"] <= e["tolerance"])
        table += extra
    print(format_rows(rows))
    for e in table[len(rows):]:
        print(f"{e['name']:<24}{e['worst']:>12.3e}{e['tolerance']:>12.1e}  {'PASS' if e['passed'] else 'FAIL'}")
    passed = all(r["passed"] for r in table)
    meta = {"seed": cfg["seed"], "level": p.level, "words": len(p.words), "rows": table, "passed": passed}
    _write(out, "check.json", dump_json(meta))
    return EXIT_OK if passed else EXIT_TOLERANCE


def cmd_gamma(cfg, out: Path) -> int:
    domain = _domain(cfg)
    p = _evaluator(cfg, domain)
    kind = SlitMapKind.from_json(cfg.get("kind", {"kind": "half-plane-radial"}))
    g = find_gamma(p, kind)
    path = _write(out, "gammas.json", dump_json(g.to_json()))
    print(f"wrote {path} (residual {g.residual:.3e})")
    return EXIT_OK


def cmd_map(cfg, out: Path) -> int:
    domain = _domain(cfg)
    p = _evaluator(cfg, domain)
    spec = _mapping(cfg, p)
    pts = np.array([complex(x, y) for x, y in cfg.get("points", [])])
    if not len(pts):
        raise ConfigError("map needs a non-empty points list", {"field": "points"})
    zs = map_points(spec, p, pts)
    lines = ["re_zeta,im_zeta,re_z,im_z"]
    lines += [f"{a.real:.17g},{a.imag:.17g},{b.real:.17g},{b.imag:.17g}" for a, b in zip(pts, zs)]
    path = _write(out, "map.csv", "\n".join(lines) + "\n")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_trace(cfg, out: Path) -> int:
    domain = _domain(cfg)
    p = _evaluator(cfg, domain)
    spec = _mapping(cfg, p)
    traces = trace_all(spec, p, cfg["samples"])
    res = residuals_from_traces(spec, traces)
    _write(out, "trace.csv", traces_to_csv(traces))
    _write(out, "residuals.json", dump_json(res.to_json()))
    tol = cfg["tolerances"]
    ok = res.max_closure <= tol["closure"] and res.max_turning_defect <= tol["turning"]
    print(f"closure {res.max_closure:.3e}, turning defect {res.max_turning_defect:.3e}")
    return EXIT_OK if ok else EXIT_TOLERANCE


def cmd_solve_m0(cfg, out: Path) -> int:
    if "target" not in cfg:
        raise ConfigError("solve-m0 needs a target polygon", {"field": "target"})
    target = [complex(x, y) for x, y in cfg["target"]]
    try:
        sol = solve_m0(target)
    except ValueError as exc:
        raise ConfigError(str(exc), {"field": "target"}) from exc
    _write(out, "spec.json", dump_json(sol.spec.to_json()))
    _write(out, "solve.json", dump_json({"residual": sol.residual, "iterations": sol.iterations}))
    print(f"residual {sol.residual:.3e}")
    return EXIT_OK if sol.residual <= cfg["tolerances"]["solve_m0"] else EXIT_TOLERANCE


def grid_lines(domain: CircularDomain, radial: int, angular: int, resolution: int, avoid=()):
    """Runs of consecutive polar-grid points that lie inside the domain.

    Circles ``|zeta| = r`` and rays ``arg zeta = const``; points closer than
    the routing clearance to a boundary circle or a point in ``avoid`` are
    dropped, which splits lines into runs.
    """
    c = default_clearance(domain)
    rmax = 1.0 - 2 * c
    lines = []
    for i in range(1, radial + 1):
        r = rmax * i / radial
        t = np.linspace(0.0, 2 * np.pi, resolution + 1)
        lines.append(r * np.exp(1j * t))
    for m in range(angular):
        r = np.linspace(rmax / radial, rmax, resolution)
        lines.append(r * np.exp(2j * np.pi * m / angular))
    runs = []
    for pts in lines:
        ok = domain.contains(pts, 2 * c)
        for a in avoid:
            ok &= np.abs(pts - a) > 4 * c
        start = None
        for k, flag in enumerate(list(ok) + [False]):
            if flag and start is None:
                start = k
            elif not flag and start is not None:
                if k - start >= 2:
                    runs.append(pts[start:k])
                start = None
    return runs


def render_svg(traces, grid_images, seed: int, size: int = 800) -> str:
    """SVG in mathematical orientation: ``x = Re z`` to the right, ``y = Im z`` up."""
    boundary = np.concatenate([t.z for t in traces])
    lo_x, hi_x = boundary.real.min(), boundary.real.max()
    lo_y, hi_y = boundary.imag.min(), boundary.imag.max()
    span = max(hi_x - lo_x, hi_y - lo_y)
    pad = 0.05 * span
    lo_x, hi_x, lo_y, hi_y = lo_x - pad, hi_x + pad, lo_y - pad, hi_y + pad
    scale = size / max(hi_x - lo_x, hi_y - lo_y)

    def coords(zs):
        # the SVG y axis points down, so y is flipped here
        xs = (zs.real - lo_x) * scale
        ys = (hi_y - zs.imag) * scale
        return " ".join(f"{x:.3f},{y:.3f}" for x, y in zip(xs, ys))

    w = int(math.ceil((hi_x - lo_x) * scale))
    h = int(math.ceil((hi_y - lo_y) * scale))
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f"<!-- mcsc render; mathematical orientation (y axis up): svg_x = (Re z - {lo_x:.17g}) * {scale:.17g},"
        f" svg_y = ({hi_y:.17g} - Im z) * {scale:.17g}; seed {seed} -->",
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
        '<g fill="none" stroke="#8aa1c1" stroke-width="0.6">',
    ]
    margin = 2 * span
    for zs in grid_images:
        zs = zs[np.isfinite(zs)]
        keep = (np.abs(zs.real - 0.5 * (lo_x + hi_x)) < margin) & (np.abs(zs.imag - 0.5 * (lo_y + hi_y)) < margin)
        if keep.sum() >= 2:
            out.append(f'<polyline points="{coords(zs[keep])}"/>')
    out.append("</g>")
    out.append('<g fill="none" stroke="#000000" stroke-width="1.5">')
    for t in traces:
        out.append(f'<polygon points="{coords(t.z)}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_render(cfg, out: Path) -> int:
    if "mapping" not in cfg and "target" in cfg:
        sol = solve_m0([complex(x, y) for x, y in cfg["target"]])
        spec = sol.spec
        p = PrimeEvaluator(spec.domain, 0)
    else:
        domain = _domain(cfg)
        p = _evaluator(cfg, domain)
        spec = _mapping(cfg, p)
    traces = trace_all(spec, p, cfg["samples"])
    g = cfg["grid"]
    avoid = [] if spec.bounded else [spec.zeta_inf]
    runs = grid_lines(spec.domain, g["radial"], g["angular"], g["resolution"], avoid)
    images = [map_along(spec, p, run) for run in runs]
    path = _write(out, "render.svg", render_svg(traces, images, cfg["seed"]))
    print(f"wrote {path}")
    return EXIT_OK


HANDLERS = {
    "check": cmd_check,
    "gamma": cmd_gamma,
    "map": cmd_map,
    "trace": cmd_trace,
    "solve-m0": cmd_solve_m0,
    "render": cmd_render,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mcsc", description=__doc__.split("\n")[0])
    ap.add_argument("command", nargs="?", choices=COMMANDS, help="overrides the config's command")
    ap.add_argument("--config", required=True, help="JSON job description")
    ap.add_argument("--out", default=".", help="output directory (default: current)")
    ap.add_argument("--level", type=int, help="truncation level of the prime function")
    ap.add_argument("--seed", type=int, help="seed for sampled checks")
    ap.add_argument("--tolerance", type=float, help="prime-function tolerance")
    return ap


def _error(message, context, code) -> int:
    print(json.dumps({"error": message, "context": context}, sort_keys=True), file=sys.stderr)
    return code


def run(args) -> int:
    try:
        cfg = load_config(args.config)
        command = args.command or cfg.get("command")
        if command is None:
            raise ConfigError("no command given on the command line or in the config", {"field": "command"})
        cfg = normalize_config(cfg)
        if args.level is not None:
            if not 0 <= args.level <= 16:
                raise ConfigError("--level must be in 0..16", {"field": "prime/level"})
            cfg["prime"]["level"] = args.level
        if args.tolerance is not None:
            cfg["prime"]["tolerance"] = args.tolerance
        if args.seed is not None:
            cfg["seed"] = args.seed
        return HANDLERS[command](cfg, Path(args.out))
    except ConfigError as exc:
        return _error(str(exc), exc.context, EXIT_CONFIG)
    except jsonschema.ValidationError as exc:
        field = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        return _error(f"config field {field}: {exc.message}", {"field": field}, EXIT_CONFIG)
    except (GammaRootError, QuadratureError, ArithmeticError, DomainError) as exc:
        context = {"type": type(exc).__name__}
        if getattr(exc, "circle", None) is not None:
            context["circle"] = exc.circle
        if getattr(exc, "estimate", None) is not None:
            context["estimate"] = exc.estimate
        return _error(str(exc), context, EXIT_NUMERIC)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
