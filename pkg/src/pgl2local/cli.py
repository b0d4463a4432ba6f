"""The ``pgl2local`` command.

Each subcommand resolves its parameters (JSON config first, flags on top),
runs one job and writes a table.  CSV numbers carry 17 significant digits
and every row carries an error or tail column plus the hash of the
resolved configuration, so identical jobs give byte-identical files.

Exit status: 0 on success, 2 when a tolerance is not met (the table is
still written), 1 on a usage error (nothing is written).
"""

from __future__ import annotations

import csv
import io
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import arch_local as al
from . import global_demo as gd
from . import padic_local as pl

EXIT_OK, EXIT_USAGE, EXIT_TOLERANCE = 0, 1, 2

# a priori relative accuracy of the closed-form kernels in double precision
KERNEL_REL_ERR = {"double": 1e-12, "extended": 1e-15}

APPENDIX_SUPPORTS = {
    "unit-interval": (0.0, 1.0),
    "beyond-one": (1.5, 2.5),
    "negative": (-2.5, -1.5),
}


class ToleranceFailure(Exception):
    """Raised after writing output when a job misses its tolerance."""


# ---------------------------------------------------------------------------
# option parsing helpers


def parse_grid(text: str) -> np.ndarray:
    """'a:b:n' -> n equally spaced points from a to b."""
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError:
        raise click.BadParameter(f"expected lo:hi:count, got {text!r}") from None
    if n < 1:
        raise click.BadParameter("count must be positive")
    return np.linspace(a, b, n)


def parse_floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma separated numbers, got {text!r}") from None


def parse_interval(text) -> tuple[float, float]:
    vals = parse_floats(text)
    if len(vals) != 2:
        raise click.BadParameter(f"expected lo,hi, got {text!r}")
    return vals[0], vals[1]


def parse_points(text) -> list[tuple[float, float]]:
    """'y1,y2;y1,y2;...' -> list of pairs."""
    if isinstance(text, (list, tuple)):
        return [tuple(float(v) for v in pt) for pt in text]
    return [parse_interval(chunk) for chunk in str(text).split(";") if chunk.strip()]


def bump(text) -> al.TestFunction:
    lo, hi = parse_interval(text)
    try:
        return al.TestFunction.bump(lo, hi)
    except ValueError as err:
        raise click.BadParameter(str(err)) from None


# ---------------------------------------------------------------------------
# output


class Table:
    def __init__(self, columns: list[str], rows: list[list], config: dict):
        self.columns = columns
        self.rows = rows
        self.config = config
        self.hash = gd.config_hash(config)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(self.columns + ["config_hash"])
        for row in self.rows:
            w.writerow([_cell(v) for v in row] + [self.hash])
        return buf.getvalue()

    def to_json(self) -> str:
        rows = [dict(zip(self.columns, (_jcell(v) for v in row))) for row in self.rows]
        return json.dumps({"config": self.config, "config_hash": self.hash, "rows": rows},
                          indent=1, sort_keys=True) + "\n"


def _cell(v) -> str:
    if v is None:
        return "nan"
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return gd.fmt(v)


def _jcell(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _emit(ctx: click.Context, table: Table) -> None:
    opts = ctx.obj
    text = table.to_json() if opts["format"] == "json" else table.to_csv()
    if opts["out"]:
        Path(opts["out"]).write_text(text, newline="")
    else:
        click.echo(text, nl=False)


def _resolve(ctx: click.Context, command: str, flags: dict, defaults: dict) -> dict:
    """Merge defaults, the JSON config and explicitly given flags."""
    cfg = dict(defaults)
    file_cfg = ctx.obj["config"]
    if file_cfg:
        section = file_cfg.get(command, file_cfg)
        unknown = set(section) - set(defaults) - {"command"}
        if unknown:
            raise click.UsageError(f"unknown config keys for {command}: {sorted(unknown)}")
        cfg.update({k: v for k, v in section.items() if k in defaults})
    for k, v in flags.items():
        source = ctx.get_parameter_source(k)
        if source is not None and source.name != "DEFAULT":
            cfg[k] = v
    if ctx.obj["precision"] == "extended" and command != "kernel":
        raise click.UsageError("--precision extended is only available for the kernel command")
    cfg = {"command": command, "precision": ctx.obj["precision"], **cfg}
    return cfg


# ---------------------------------------------------------------------------
# commands


def _load_config(path: str) -> dict:
    try:
        config = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise click.UsageError(f"{path}: line {err.lineno}: {err.msg}") from None
    if not isinstance(config, dict):
        raise click.UsageError(f"{path}: top level must be an object")
    return config


_COMMON = [
    click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
                 help="JSON file with parameters (flat, or keyed by command)."),
    click.option("--out", type=click.Path(dir_okay=False), default=None,
                 help="Write the table here instead of stdout."),
    click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None, help="csv (default) or json."),
    click.option("--threads", type=click.IntRange(min=1), default=None,
                 help="Worker threads; jobs run on one thread and results do not depend on it."),
    click.option("--precision", type=click.Choice(["double", "extended"]), default=None,
                 help="double (default) or extended."),
]


def common_options(f):
    """The shared flags, accepted before or after the subcommand name."""
    for opt in reversed(_COMMON):
        f = opt(f)
    return f


def _apply_common(ctx: click.Context, config_path=None, out=None, fmt=None, threads=None, precision=None) -> None:
    obj = ctx.ensure_object(dict)
    obj.setdefault("config", None)
    obj.setdefault("out", None)
    obj.setdefault("format", "csv")
    obj.setdefault("threads", 1)
    obj.setdefault("precision", "double")
    if config_path:
        obj["config"] = _load_config(config_path)
    for key, val in (("out", out), ("format", fmt), ("threads", threads), ("precision", precision)):
        if val is not None:
            obj[key] = val


@click.group()
@common_options
@click.pass_context
def cli(ctx, **common):
    """Local transforms for PGL(2) and the shifted-sum harness."""
    _apply_common(ctx, **common)


@cli.command()
@common_options
@click.option("--t", "t", type=float, default=1.0, show_default=True, help="Spectral variable.")
@click.option("--y-grid", default="0.1:10:50", show_default=True, help="lo:hi:count.")
@click.pass_context
def kernel(ctx, t, y_grid, **common):
    """Values of the hypergeometric kernel K(t, y) on a grid of y."""
    _apply_common(ctx, **common)
    cfg = _resolve(ctx, "kernel", {"t": t, "y_grid": y_grid}, {"t": 1.0, "y_grid": "0.1:10:50"})
    ys = parse_grid(cfg["y_grid"])
    if np.any(ys <= 0):
        raise click.BadParameter("y must be positive")
    vals = al.kernel_K(cfg["t"], ys, precision=cfg["precision"])
    rel = KERNEL_REL_ERR[cfg["precision"]]
    rows = [[y, v.real, v.imag, rel * max(1.0, abs(v))] for y, v in zip(ys, vals)]
    _emit(ctx, Table(["y", "K_re", "K_im", "error_estimate"], rows, cfg))


def _weight(cfg) -> al.BivariateWeight:
    return al.BivariateWeight(bump(cfg["f1"]), bump(cfg["f2"]))


@cli.command()
@common_options
@click.option("--kind", type=click.Choice(["vee", "sharp"]), default="vee", show_default=True)
@click.option("--r", "r", default="1.0", show_default=True, help="Comma separated spectral parameters.")
@click.option("--parity", type=click.IntRange(0, 1), default=0, show_default=True)
@click.option("--y", "y", type=float, default=1.0, show_default=True, help="Argument of h_vee.")
@click.option("--f1", default="0.5,2", show_default=True, help="Support of the first bump factor.")
@click.option("--f2", default="0.5,2", show_default=True, help="Support of the second bump factor.")
@click.option("--sigma", type=float, default=0.25, show_default=True)
@click.pass_context
def transform(ctx, kind, r, parity, y, f1, f2, sigma, **common):
    """Forward transforms h_vee(pi_r, y) or h_sharp(pi_r, trivial)."""
    _apply_common(ctx, **common)
    defaults = {"kind": "vee", "r": "1.0", "parity": 0, "y": 1.0, "f1": "0.5,2", "f2": "0.5,2", "sigma": 0.25}
    cfg = _resolve(ctx, "transform", dict(kind=kind, r=r, parity=parity, y=y, f1=f1, f2=f2, sigma=sigma), defaults)
    h = _weight(cfg)
    p0 = al.ArchRep.principal(0.0)
    contour = al.ContourSpec(sigma=cfg["sigma"])
    if cfg["kind"] == "vee":
        data = al.hvee_integral(cfg["y"], h, p0, p0, contour)
    else:
        data = al.hsharp_integral(al.ArchCharacter.trivial(), h, p0, p0, contour)
    rows = []
    for rv in parse_floats(cfg["r"]):
        v = data.value(al.ArchRep.principal(rv, cfg["parity"]))
        rows.append([rv, v.real, v.imag, v.tail, v.cutoff])
    _emit(ctx, Table(["r", "value_re", "value_im", "tail_estimate", "im_cutoff"], rows, cfg))


@cli.command()
@common_options
@click.option("--points", default="1.5,0.5;2,1;1.2,0.7", show_default=True, help="y1,y2 pairs separated by ';'.")
@click.option("--f1", default="0.1,3", show_default=True)
@click.option("--f2", default="0.1,3", show_default=True)
@click.option("--R-cut", "R_cut", type=float, default=40.0, show_default=True)
@click.option("--K-cut", "K_cut", type=int, default=40, show_default=True)
@click.option("--tol", type=float, default=1e-3, show_default=True, help="Relative tolerance against h.")
@click.pass_context
def invert(ctx, points, f1, f2, R_cut, K_cut, tol, **common):
    """Reconstruct h(y1, y2) from its spectral transform."""
    _apply_common(ctx, **common)
    defaults = {"points": "1.5,0.5;2,1;1.2,0.7", "f1": "0.1,3", "f2": "0.1,3", "R_cut": 40.0, "K_cut": 40,
                "tol": 1e-3}
    cfg = _resolve(ctx, "invert", dict(points=points, f1=f1, f2=f2, R_cut=R_cut, K_cut=K_cut, tol=tol), defaults)
    h = _weight(cfg)
    p0 = al.ArchRep.principal(0.0)
    grid = al.spectral_grid(cfg["R_cut"], cfg["K_cut"])
    pts = parse_points(cfg["points"])
    peak = max(abs(complex(h(*pt))) for pt in pts) or 1.0
    tables, rows, failed = {}, [], False
    for y1, y2 in pts:
        if y1 == y2:
            raise click.BadParameter("points need y1 != y2")
        z = y1 - y2
        if z not in tables:
            tables[z] = al.hvee_table(z, h, p0, p0, grid)
        v = al.invert_h(y1, y2, tables[z], p0, p0)
        exact = complex(h(y1, y2))
        err = abs(v - exact) / (abs(exact) if abs(exact) > 1e-3 * peak else peak)
        failed |= err > cfg["tol"]
        rows.append([y1, y2, v.real, v.imag, exact.real, err, v.tail])
    _emit(ctx, Table(["y1", "y2", "value_re", "value_im", "exact", "relative_error", "tail_estimate"], rows, cfg))
    if failed:
        raise ToleranceFailure(f"reconstruction error above {cfg['tol']}")


@cli.command()
@common_options
@click.option("--support", type=click.Choice(sorted(APPENDIX_SUPPORTS)), default="unit-interval",
              show_default=True)
@click.option("--r", "r", default="1.0", show_default=True, help="Comma separated spectral parameters.")
@click.option("--tol", type=float, default=1e-6, show_default=True)
@click.pass_context
def appendix(ctx, support, r, tol, **common):
    """Compare the classical single-integral transform with pi h_sharp."""
    _apply_common(ctx, **common)
    cfg = _resolve(ctx, "appendix", {"support": support, "r": r, "tol": tol},
                   {"support": "unit-interval", "r": "1.0", "tol": 1e-6})
    phi = al.TestFunction.bump(*APPENDIX_SUPPORTS[cfg["support"]])
    rows, failed = [], False
    for rv in parse_floats(cfg["r"]):
        lhs, rhs, resid = al.appendix_check(phi, rv)
        failed |= resid > cfg["tol"]
        rows.append([rv, lhs.real, lhs.imag, rhs.real, rhs.imag, resid])
    _emit(ctx, Table(["r", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "residual"], rows, cfg))
    if failed:
        raise ToleranceFailure(f"appendix residual above {cfg['tol']}")


@cli.command()
@common_options
@click.option("--kind", type=click.Choice(["vee", "sharp"]), default="vee", show_default=True)
@click.option("--p", "p", type=int, default=3, show_default=True)
@click.option("--alpha", type=float, default=1.0, show_default=True, help="Satake parameter of pi.")
@click.option("--alpha1", type=float, default=1.0, show_default=True, help="Satake parameter of pi1.")
@click.option("--y", "y", default="1", show_default=True, help="Rational argument of h_vee.")
@click.option("--sigma", type=float, default=None, help="Contour abscissa (default: middle of the strip).")
@click.option("--tol", type=float, default=1e-12, show_default=True)
@click.pass_context
def padic(ctx, kind, p, alpha, alpha1, y, sigma, tol, **common):
    """p-adic h_vee or h_sharp for indicator weights, residues against the trapezoid rule."""
    _apply_common(ctx, **common)
    defaults = {"kind": "vee", "p": 3, "alpha": 1.0, "alpha1": 1.0, "y": "1", "sigma": None, "tol": 1e-12}
    cfg = _resolve(ctx, "padic", dict(kind=kind, p=p, alpha=alpha, alpha1=alpha1, y=y, sigma=sigma, tol=tol),
                   defaults)
    from fractions import Fraction

    try:
        pi, pi1 = pl.PadicRep(cfg["p"], cfg["alpha"]), pl.PadicRep(cfg["p"], cfg["alpha1"])
        yv = Fraction(str(cfg["y"]))
    except ValueError as err:
        raise click.BadParameter(str(err)) from None
    sig = cfg["sigma"]
    if sig is None:
        lo, hi = (pi1.theta, 0.5 - pi.theta)
        sig = 0.5 * (lo + hi)
    p = cfg["p"]
    h = (pl.StepFunction.units(p), pl.StepFunction.units(p, 1.0, 1))
    chi2 = pl.PadicCharacter.unramified(p)
    if cfg["kind"] == "vee":
        run = lambda m: pl.h_vee_padic(pi, yv, h, pi1, chi2, sigma=sig, method=m)  # noqa: E731
    else:
        run = lambda m: pl.h_sharp_padic(pi, pl.PadicCharacter.unramified(p), h, pi1, chi2,  # noqa: E731
                                         sigma=sig, method=m)
    try:
        exact, trap = run("residue"), run("trapezoid")
    except ValueError as err:
        raise click.BadParameter(str(err)) from None
    diff = abs(exact - trap)
    rows = [[p, cfg["alpha"], sig, exact.real, exact.imag, trap.real, trap.imag, diff]]
    _emit(ctx, Table(["p", "alpha", "sigma", "residue_re", "residue_im", "trapezoid_re", "trapezoid_im",
                      "difference"], rows, cfg))
    if diff > cfg["tol"] * max(1.0, abs(exact)):
        raise ToleranceFailure(f"residue and trapezoid differ by {diff:.3g}")


@cli.command("global")
@common_options
@click.option("--data", "data", type=click.Path(exists=True, dir_okay=False), required=False,
              help="JSON array of spectral records.")
@click.option("--b", "b", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--cutoffs", default="10,20,30,40", show_default=True)
@click.option("--f1", default="0.5,2", show_default=True)
@click.option("--f2", default="0.5,2", show_default=True)
@click.pass_context
def global_(ctx, data, b, cutoffs, f1, f2, **common):
    """Truncated spectral side of a shifted convolution sum from ingested data."""
    _apply_common(ctx, **common)
    defaults = {"data": None, "b": 1, "cutoffs": "10,20,30,40", "f1": "0.5,2", "f2": "0.5,2"}
    cfg = _resolve(ctx, "global", dict(data=data, b=b, cutoffs=cutoffs, f1=f1, f2=f2), defaults)
    records = gd.ingest_spectral_data(cfg["data"]) if cfg["data"] else []
    try:
        rep = gd.spectral_rhs_truncated(_weight(cfg), cfg["b"], records, parse_floats(cfg["cutoffs"]))
    except gd.MissingData as err:
        raise click.UsageError(str(err)) from None
    rows = []
    for c, s, m, t in zip(rep.cutoffs, rep.partial, rep.majorant, rep.tail):
        rows.append([c, None if s is None else s.real, None if s is None else s.imag, m, t])
    cfg = {**cfg, "not_computed": list(gd.NOT_COMPUTED)}
    _emit(ctx, Table(["cutoff", "partial_sum_re", "partial_sum_im", "majorant", "tail_estimate"], rows, cfg))


@cli.command()
@common_options
@click.option("--X", "X", default="10000,100000", show_default=True)
@click.option("--b", "b", default="1,16", show_default=True)
@click.option("--Y-exponent", "Y_exponent", type=float, default=0.75, show_default=True)
@click.option("--samples", type=click.IntRange(min=1), default=64, show_default=True)
@click.option("--theta", type=float, default=gd.THETA, show_default=True)
@click.option("--eps", type=float, default=0.05, show_default=True)
@click.option("--subtract-main/--raw", "subtract_main", default=True, show_default=True)
@click.pass_context
def scaling(ctx, X, b, Y_exponent, samples, theta, eps, subtract_main, **common):
    """Short-window divisor sums against the two bounds."""
    _apply_common(ctx, **common)
    defaults = {"X": "10000,100000", "b": "1,16", "Y_exponent": 0.75, "samples": 64, "theta": gd.THETA,
                "eps": 0.05, "subtract_main": True}
    cfg = _resolve(ctx, "scaling", dict(X=X, b=b, Y_exponent=Y_exponent, samples=samples, theta=theta, eps=eps,
                                        subtract_main=subtract_main), defaults)
    grid = [(x, x ** cfg["Y_exponent"], int(bv)) for x in parse_floats(cfg["X"]) for bv in parse_floats(cfg["b"])]
    rep = gd.scaling_experiment(grid, theta=cfg["theta"], eps=cfg["eps"], samples=cfg["samples"],
                                subtract_main=cfg["subtract_main"])
    cols = rep.header()
    rows = [[getattr(r, c) for c in cols] for r in rep.rows]
    _emit(ctx, Table(cols, rows, cfg))


def main(argv: list[str] | None = None) -> int:
    """Entry point with the documented exit codes."""
    try:
        cli.main(args=argv, prog_name="pgl2local", standalone_mode=False)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except ToleranceFailure as e:
        click.echo(f"tolerance not met: {e}", err=True)
        return EXIT_TOLERANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
