"""Command-line entry point: ``hlab {apply,witness,norm,embed,duality,profile}``.

Settings come from command-line flags, then a flat ``key=value`` config file
(``--config``), then built-in defaults, in that order of precedence. The
``HLAB_THREADS`` environment variable overrides a config-file thread count
and is overridden by ``--threads``. Every CSV starts with ``# config-hash=<hex>``, a digest of the resolved
settings (output paths and thread count excluded, since neither changes the
numbers).

Exit codes: 0 success, 1 a configured check failed, 2 invalid input,
3 quadrature did not converge, 4 the requested j range exceeds the grid budget.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import re
import sys
import warnings
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from . import __version__
from .descriptors import parse_descriptor
from .embeddings import GENERATORS, Corpus, check_lp_lower_bound, check_mollified_embedding
from .grid import DEFAULT_BUDGET, BoxGrid, GridBudgetError, sample, write_csv
from .hausdorff import (Symbol, apply, dual_profile, duality_check, lebesgue_report, read_profile_csv,
                        reduce_to_profile)
from .quadrature import QuadratureError
from .spaces import SpaceSpec, space_norm
from .witness import WitnessParams, growth_experiment, unboundedness_verdict

EXIT_OK, EXIT_CHECK, EXIT_INVALID, EXIT_QUADRATURE, EXIT_BUDGET = 0, 1, 2, 3, 4

# keys that never enter the config hash
_UNHASHED = {"output", "figure", "config", "threads"}


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    val = str(text).strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _float(text) -> float:
    val = str(text).strip().lower()
    return math.inf if val in ("inf", "infinity") else float(val)


def _j_range(text) -> tuple:
    lo, sep, hi = str(text).partition(":")
    if not sep:
        raise ValueError(f"j range must look like 8:16, got {text!r}")
    return int(lo), int(hi)


def _positive_int(text) -> int:
    val = int(text)
    if val < 1:
        raise ValueError(f"expected a positive integer, got {text!r}")
    return val


@dataclass(frozen=True)
class Option:
    key: str
    convert: Callable
    default: object
    help: str
    flag: bool = False


_COMMON = [
    Option("output", str, None, "CSV destination (default: standard output)"),
    Option("figure", str, None, "also render a PNG figure to this path"),
    Option("threads", _positive_int, 1, "worker threads for quadrature"),
]

_SYMBOL = Option("symbol", str, "box", "builtin symbol name or a tabulated profile CSV")

COMMANDS: Dict[str, List[Option]] = {
    "apply": [
        _SYMBOL,
        Option("f", str, "indicator:0,1", "input function descriptor"),
        Option("grid", str, "-1:3:1/1000", "input grid, e.g. -1:3:0.001"),
        Option("out_grid", str, None, "output grid (default: the input grid)"),
    ],
    "witness": [
        _SYMBOL,
        Option("p", _float, 0.5, "exponent 0 < p < 1"),
        Option("j", _j_range, (8, 16), "level range j_min:j_max"),
        Option("mollified", _bool, False, "convolve with the bump and integrate over Xi_j", flag=True),
        Option("h", _float, 0.125, "grid spacing in x"),
        Option("padding", _float, 4.0, "padding around E_j"),
        Option("budget", int, DEFAULT_BUDGET, "maximum grid points"),
        Option("normalize_at_1", _bool, False, "divide phi by phi(1) before the experiment", flag=True),
        Option("slope_fraction", _float, 0.5, "verdict needs slope >= this fraction of the target"),
        Option("min_growth", _float, None, "verdict needs last/first >= this (default: implied by the slope)"),
        Option("expect", str, None, "fail unless the verdict starts with this text"),
    ],
    "norm": [
        Option("space", str, "Lp:p=0.5", "space spec, e.g. B:p=0.5,q=0.5,s=0"),
        Option("f", str, "indicator:0,4", "input function descriptor"),
        Option("grid", str, "-8:8:1/64", "sampling grid"),
    ],
    "embed": [
        Option("space", str, "B:p=0.5,q=0.5,s=0", "space spec"),
        Option("mode", str, "auto", "lower-bound, mollified, or auto"),
        Option("generator", str, "bandlimited", f"corpus family: {', '.join(GENERATORS)}"),
        Option("count", _positive_int, 20, "corpus size"),
        Option("seed", int, 0, "corpus seed"),
        Option("grid", str, "-16:16:1/16", "corpus grid"),
        Option("band", _float, 4.0, "frequency band of band-limited samples"),
        Option("bound", _float, None, "ratio bound (default depends on the check)"),
    ],
    "duality": [
        _SYMBOL,
        Option("f", str, "gaussian", "input function descriptor"),
        Option("grid", str, "-16:16:1/32", "sampling grid"),
        Option("refine", _positive_int, 16, "refinement of the grid used for the transform of H f"),
        Option("tol", _float, 1e-3, "maximum relative L2 discrepancy"),
    ],
    "profile": [
        _SYMBOL,
        Option("n", _positive_int, 1, "dimension"),
        Option("r_min", _float, 2.0**-6, "smallest r"),
        Option("r_max", _float, 2.0**6, "largest r"),
        Option("count", _positive_int, 1201, "number of log-spaced r samples"),
        Option("r0", _float, 1.0, "point for the Lebesgue report"),
    ],
}

_HELP = {
    "apply": "sample H f on a grid",
    "witness": "growth experiment with translated bumps",
    "norm": "quasi-norm of a sampled function",
    "embed": "embedding ratios on a random corpus",
    "duality": "compare F(H f) with the dual operator applied to F f",
    "profile": "radial profile, dual profile and Lebesgue report",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hlab", description="Hausdorff operator laboratory")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, options in COMMANDS.items():
        p = sub.add_parser(name, help=_HELP[name], argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="flat key=value settings file")
        for opt in options + _COMMON:
            flag = "--" + opt.key.replace("_", "-")
            extra = ["-o"] if opt.key == "output" else []
            if opt.flag:
                p.add_argument(flag, dest=opt.key, action="store_true", help=opt.help)
            else:
                p.add_argument(*([flag] + extra), dest=opt.key, help=f"{opt.help} (default: {opt.default})")
    return parser


def read_config(path: str) -> Dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for num, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{num}: expected key=value")
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def resolve(command: str, given: Dict[str, object], environ=None) -> Dict[str, object]:
    """Merge flags, config file, environment and defaults into converted settings."""
    environ = os.environ if environ is None else environ
    options = {o.key: o for o in COMMANDS[command] + _COMMON}
    merged = {k: o.default for k, o in options.items()}
    layers = []
    if given.get("config"):
        layers.append(("config file", read_config(given["config"])))
    if environ.get("HLAB_THREADS"):
        layers.append(("HLAB_THREADS", {"threads": environ["HLAB_THREADS"]}))
    layers.append(("command line", {k: v for k, v in given.items() if k != "config"}))
    for origin, layer in layers:
        for key, raw in layer.items():
            if key not in options:
                raise ValueError(f"unknown setting {key!r} in {origin} for '{command}'")
            try:
                merged[key] = options[key].convert(raw)
            except (TypeError, ValueError) as exc:
                raise ValueError(f"bad value for {key!r} in {origin}: {exc}") from exc
    return merged


def config_hash(command: str, cfg: Dict[str, object]) -> str:
    payload = {"command": command, "version": __version__}
    payload.update({k: v for k, v in cfg.items() if k not in _UNHASHED})
    text = json.dumps(payload, sort_keys=True, default=repr)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def load_symbol(spec: str, n: int = 1) -> Symbol:
    """Builtin name, or path to a ``# profile n=<n>`` CSV."""
    if os.path.isfile(spec):
        return Symbol.from_profile(read_profile_csv(spec))
    return Symbol.builtin(spec, n)


@dataclass
class Result:
    csv: str
    summary: List[str]
    figure: Optional[Callable[[str], None]] = None
    failed: Optional[str] = None


def _header(command: str, cfg) -> List[str]:
    return [f"# config-hash={config_hash(command, cfg)}", f"# hlab {command}"]


def cmd_apply(cfg) -> Result:
    grid = BoxGrid.parse(cfg["grid"])
    out_grid = BoxGrid.parse(cfg["out_grid"]) if cfg["out_grid"] else grid
    if out_grid.n != grid.n:
        raise ValueError("output grid and input grid have different dimensions")
    sym = load_symbol(cfg["symbol"], grid.n)
    desc = parse_descriptor(cfg["f"])
    if desc.n != grid.n:
        raise ValueError(f"descriptor dimension {desc.n} does not match the grid dimension {grid.n}")
    profile = reduce_to_profile(sym)
    f = sample(desc, grid)
    rep = lebesgue_report(profile, 1.0)
    out = apply(profile, f, out_grid, threads=cfg["threads"])
    meta = [f"# symbol={sym.name} f={cfg['f']} phi(1)={float(rep.value)!r} lebesgue={rep.verdict}"]
    csv = write_csv(out, extra_header=_header("apply", cfg) + meta)
    summary = [f"phi(1)={float(rep.value)!r} lebesgue={rep.verdict}"]

    def fig(path):
        from .plotting import plot_sampled
        plot_sampled(out, path, f"H f, symbol {sym.name}")

    return Result(csv, summary, fig)


def cmd_witness(cfg) -> Result:
    j_min, j_max = cfg["j"]
    params = WitnessParams(cfg["p"], j_min, j_max)
    if len(params.js) < 5:
        raise ValueError(f"a verdict needs at least 5 j-values, got {len(params.js)}")
    sym = load_symbol(cfg["symbol"], 1)
    profile = reduce_to_profile(sym)
    report = growth_experiment(profile, params, cfg["mollified"], h=cfg["h"], padding=cfg["padding"],
                               budget=cfg["budget"], normalize=cfg["normalize_at_1"], threads=cfg["threads"])
    verdict = unboundedness_verdict(report, slope_fraction=cfg["slope_fraction"], min_growth=cfg["min_growth"])
    csv = report.to_csv(_header("witness", cfg), verdict)
    summary = [f"slope={float(report.slope_main)!r} target={float(report.target_slope)!r} verdict={verdict.label}"]
    failed = None
    if cfg["expect"] and not verdict.label.startswith(cfg["expect"]):
        failed = f"verdict {verdict.label!r} does not match expected {cfg['expect']!r}"

    def fig(path):
        from .plotting import plot_growth
        plot_growth(report, path)

    return Result(csv, summary, fig, failed)


def cmd_norm(cfg) -> Result:
    spec = SpaceSpec.parse(cfg["space"])
    grid = BoxGrid.parse(cfg["grid"])
    desc = parse_descriptor(cfg["f"])
    if desc.n != grid.n:
        raise ValueError(f"descriptor dimension {desc.n} does not match the grid dimension {grid.n}")
    f = sample(desc, grid)
    value = space_norm(f, spec)
    csv = "\n".join(_header("norm", cfg) + ["space,f,norm", f"{spec},{cfg['f']},{float(value)!r}"]) + "\n"

    def fig(path):
        from .plotting import plot_sampled
        plot_sampled(f, path, f"{cfg['f']}: {spec} norm {value:.6g}")

    return Result(csv, [f"norm={float(value)!r}"], fig)


def cmd_embed(cfg) -> Result:
    spec = SpaceSpec.parse(cfg["space"])
    mode = cfg["mode"]
    if mode not in ("auto", "lower-bound", "mollified"):
        raise ValueError(f"mode must be auto, lower-bound or mollified, got {mode!r}")
    if mode == "auto":
        eligible = spec.kind == "hp" or (spec.kind in ("B", "F", "M") and spec.q == spec.p and spec.s == 0)
        mode = "lower-bound" if eligible and 0 < spec.p <= 1 else "mollified"
    corpus = Corpus(cfg["generator"], cfg["seed"], cfg["count"], cfg["grid"], cfg["band"])
    if mode == "lower-bound":
        report = check_lp_lower_bound(spec, corpus, bound=cfg["bound"])
    else:
        kwargs = {} if cfg["bound"] is None else {"bound": cfg["bound"]}
        report = check_mollified_embedding(spec, corpus, **kwargs)
    failed = None if report.passed else f"max ratio {float(report.max_ratio)!r} exceeds bound {float(report.bound)!r}"

    def fig(path):
        from .plotting import plot_embedding
        plot_embedding(report, path)

    return Result(report.to_csv(_header("embed", cfg)), [report.summary()], fig, failed)


def cmd_duality(cfg) -> Result:
    grid = BoxGrid.parse(cfg["grid"])
    sym = load_symbol(cfg["symbol"], grid.n)
    desc = parse_descriptor(cfg["f"])
    if desc.n != grid.n:
        raise ValueError(f"descriptor dimension {desc.n} does not match the grid dimension {grid.n}")
    if grid.n != 1:
        raise ValueError("the duality command works on one-dimensional grids")
    report = duality_check(sym, sample(desc, grid), refine=cfg["refine"], threads=cfg["threads"])
    d = report.discrepancy
    lines = _header("duality", cfg) + [f"# discrepancy={float(d)!r} tol={float(cfg['tol'])!r}", "xi,lhs_re,lhs_im,rhs_re,rhs_im"]
    xi = report.lhs.grid.axes()[0]
    lhs = np.asarray(report.lhs.values, dtype=complex)
    rhs = np.asarray(report.rhs.values, dtype=complex)
    for x, a, b in zip(xi, lhs, rhs):
        lines.append(",".join(repr(float(v)) for v in (x, a.real, a.imag, b.real, b.imag)))
    failed = None if d < cfg["tol"] else f"discrepancy {float(d)!r} is not below {float(cfg['tol'])!r}"

    def fig(path):
        from .plotting import plot_duality
        plot_duality(report, path)

    return Result("\n".join(lines) + "\n", [f"discrepancy={float(d)!r}"], fig, failed)


def cmd_profile(cfg) -> Result:
    if not 0 < cfg["r_min"] < cfg["r_max"]:
        raise ValueError("need 0 < r_min < r_max")
    sym = load_symbol(cfg["symbol"], cfg["n"])
    profile = reduce_to_profile(sym)
    dual = dual_profile(sym)
    rep = lebesgue_report(profile, cfg["r0"])
    r = np.logspace(math.log2(cfg["r_min"]), math.log2(cfg["r_max"]), cfg["count"], base=2.0)
    phi, phid = profile(r), dual(r)
    lines = _header("profile", cfg) + [
        f"# profile n={profile.n}",
        f"# lebesgue r0={float(rep.r0)!r} value={float(rep.value)!r} verdict={rep.verdict}",
        "# eps=" + ",".join(repr(float(e)) for e in rep.eps),
        "r,phi,phi_dual",
    ]
    lines += [f"{float(a)!r},{float(b)!r},{float(c)!r}" for a, b, c in zip(r, phi, phid)]

    def fig(path):
        from .plotting import plot_profile
        plot_profile(r, phi, phid, path, f"symbol {sym.name}")

    return Result("\n".join(lines) + "\n", [f"phi(r0)={float(rep.value)!r} verdict={rep.verdict}"], fig)


HANDLERS = {
    "apply": cmd_apply,
    "witness": cmd_witness,
    "norm": cmd_norm,
    "embed": cmd_embed,
    "duality": cmd_duality,
    "profile": cmd_profile,
}


def _emit(result: Result, cfg, stdout, stderr) -> None:
    if cfg["output"]:
        tmp = cfg["output"] + ".part"
        with open(tmp, "w") as fh:
            fh.write(result.csv)
        os.replace(tmp, cfg["output"])
        notes = stdout
    else:
        stdout.write(result.csv)
        notes = stderr
    for line in result.summary:
        notes.write(line + "\n")
    if cfg["figure"] and result.figure is not None:
        result.figure(cfg["figure"])


def _attach_negative_values(argv: List[str]) -> List[str]:
    """Turn ``--grid -1:3:0.001`` into ``--grid=-1:3:0.001`` so argparse keeps the value."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else ""
        if tok.startswith("--") and "=" not in tok and re.match(r"-[\d.]", nxt):
            out.append(f"{tok}={nxt}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv: Optional[List[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    argv = _attach_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    given = vars(ns)
    command = given.pop("command")
    try:
        cfg = resolve(command, given)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            result = HANDLERS[command](cfg)
    except GridBudgetError as exc:
        stderr.write(f"hlab {command}: {exc}\n")
        return EXIT_BUDGET
    except QuadratureError as exc:
        stderr.write(f"hlab {command}: quadrature did not converge: {exc}\n")
        return EXIT_QUADRATURE
    except (ValueError, NotImplementedError, OSError) as exc:
        stderr.write(f"hlab {command}: {exc}\n")
        return EXIT_INVALID
    _emit(result, cfg, stdout, stderr)
    if result.failed:
        stderr.write(f"hlab {command}: check failed: {result.failed}\n")
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
