"""Command-line front end.

    gwwalks oracle ruin --p 0.5 --n 4
    gwwalks simulate --config run.toml --trials 100000 --out result.csv
    gwwalks sweep --config run.toml --parameter lambda --grid 0.5:1.5:3

Exit codes: 0 success, 1 usage error, 2 invalid configuration or domain
error, 3 degenerate result (every trial censored, or every sweep row failed).
"""

from __future__ import annotations

import sys
import time
from pathlib import Path
from typing import Any, Callable

import click

from . import __version__, oracle
from .errors import DegenerateEstimateError, DomainError, GWWalksError
from .gwtree import OffspringDistribution
from .mc import QUANTITIES, SWEEP_PARAMETERS, Caps, TrialSpec, estimate, sweep
from .records import SIMULATE_COLUMNS, SWEEP_COLUMNS, dumps, to_csv, to_jsonl

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXIT_USAGE, EXIT_CONFIG, EXIT_DEGENERATE = 1, 2, 3


class ConfigError(DomainError):
    pass


# -- run configuration -------------------------------------------------------------

DEFAULTS: dict[str, Any] = {
    "process": None,
    "lambda": None,
    "delta": None,
    "offspring.kind": None,
    "offspring.params": [],
    "allow-subcritical": False,
    "quantity": "escape",
    "level": None,
    "n": 1,
    "trials": 10_000,
    "seed": 0,
    "max-steps": 10**6,
    "max-time": None,
    "max-jumps": 10**6,
    "max-level": None,
    "format": "csv",
    "out": None,
}
CONFIG_KEYS = tuple(DEFAULTS)


def _flatten(table: dict, prefix: str = "") -> dict[str, Any]:
    out = {}
    for key, val in table.items():
        name = f"{prefix}{key}"
        if isinstance(val, dict) and name != "offspring.params":
            out.update(_flatten(val, name + "."))
        else:
            out[name] = val
    return out


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Read a TOML run configuration; dotted keys and tables are equivalent."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc
    flat = {k.replace("_", "-"): v for k, v in _flatten(raw).items()}
    unknown = sorted(set(flat) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}; allowed: {list(CONFIG_KEYS)}")
    return flat


def _number(text: str) -> int | float:
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        return float(text)


def parse_offspring_params(text: str) -> list:
    """``"2"``, ``"4,0.5"`` or, for custom laws, ``"0:0.25,2:0.75"``."""
    text = text.strip()
    if not text:
        return []
    try:
        if ":" in text:
            return [[int(k), float(p)] for k, p in (item.split(":") for item in text.split(","))]
        return [_number(item) for item in text.split(",")]
    except ValueError as exc:
        raise click.BadParameter(f"cannot parse offspring parameters {text!r}") from exc


def resolve_config(file_values: dict[str, Any], flag_values: dict[str, Any]) -> dict[str, Any]:
    """Defaults, then file values, then explicitly given flags."""
    cfg = dict(DEFAULTS)
    cfg.update(file_values)
    cfg.update({k: v for k, v in flag_values.items() if v is not None})
    params = cfg["offspring.params"]
    if isinstance(params, dict):
        cfg["offspring.params"] = dict(sorted(params.items()))
    elif not isinstance(params, list):
        cfg["offspring.params"] = [params]
    return cfg


def build_spec(cfg: dict[str, Any]) -> TrialSpec:
    if cfg["process"] is None:
        raise ConfigError("process is required (biased, orrw or vrjp)")
    if cfg["offspring.kind"] is None:
        raise ConfigError("offspring.kind is required")
    if cfg["quantity"] not in QUANTITIES:
        raise ConfigError(f"quantity must be one of {QUANTITIES}, got {cfg['quantity']!r}")
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {cfg['format']!r}")
    params = cfg["offspring.params"]
    if cfg["offspring.kind"] == "custom" and isinstance(params, dict):
        params = {int(k): v for k, v in params.items()}
    offspring = OffspringDistribution.from_config(
        cfg["offspring.kind"], params, allow_subcritical=bool(cfg["allow-subcritical"])
    )
    caps = Caps(
        max_steps=int(cfg["max-steps"]),
        max_jumps=int(cfg["max-jumps"]),
        max_time=None if cfg["max-time"] is None else float(cfg["max-time"]),
        max_level=None if cfg["max-level"] is None else int(cfg["max-level"]),
    )
    lam = cfg["lambda"]
    delta = cfg["delta"]
    return TrialSpec(
        process=cfg["process"],
        offspring=offspring,
        seed=int(cfg["seed"]),
        trials=int(cfg["trials"]),
        lam=None if lam is None else float(lam),
        delta=None if delta is None else float(delta),
        caps=caps,
    )


def _record_config(cfg: dict[str, Any]) -> dict[str, Any]:
    """Resolved config as embedded in output records (output path excluded)."""
    return {k: v for k, v in cfg.items() if k != "out"}


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="")


def _render(rows: list[dict], columns, cfg: dict[str, Any]) -> str:
    meta = {"version": __version__, "config": _record_config(cfg)}
    if cfg["format"] == "json":
        return to_jsonl(rows, columns, meta)
    return to_csv(rows, columns, header_comment=f"gwwalks {__version__} config={dumps(meta['config'])}")


def parse_grid(text: str) -> list[float]:
    """``"start:stop:steps"`` (inclusive, evenly spaced) or a comma-separated list."""
    text = text.strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ValueError
            start, stop, steps = float(parts[0]), float(parts[1]), int(parts[2])
            if steps < 1:
                raise ValueError
            if steps == 1:
                return [start]
            return [start + (stop - start) * k / (steps - 1) for k in range(steps)]
        values = [float(x) for x in text.split(",") if x.strip()]
        if not values:
            raise ValueError
        return values
    except ValueError:
        raise click.BadParameter(f"malformed grid {text!r}; use start:stop:steps or a comma list", param_hint="--grid")


# -- commands ------------------------------------------------------------------------


@click.group()
@click.version_option(__version__, prog_name="gwwalks")
def cli():
    """Walks on Galton-Watson trees: oracles, simulations and sweeps."""


def run_options(fn: Callable) -> Callable:
    opts = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="TOML run configuration."),
        click.option("--process", type=click.Choice(["biased", "orrw", "vrjp"])),
        click.option("--lambda", "lam", type=float, help="Bias toward the parent (biased walk)."),
        click.option("--delta", type=float, help="Weight of traversed edges (ORRW)."),
        click.option("--offspring-kind", type=click.Choice(["deterministic", "poisson", "geometric", "binomial", "custom"])),
        click.option("--offspring-params", help='e.g. "2", "4,0.5" or "0:0.25,2:0.75".'),
        click.option("--allow-subcritical/--no-allow-subcritical", default=None),
        click.option("--quantity", type=click.Choice(list(QUANTITIES))),
        click.option("--level", type=int, help="Target level (escape) or base level (embedded)."),
        click.option("--n", "gap", type=int, help="Level gap for the embedded estimate."),
        click.option("--trials", type=int),
        click.option("--seed", type=int),
        click.option("--max-steps", type=int),
        click.option("--max-time", type=float),
        click.option("--max-jumps", type=int),
        click.option("--max-level", type=int),
        click.option("--format", "fmt", type=click.Choice(["csv", "json"])),
        click.option("--out", type=click.Path(dir_okay=False), help="Output file (default stdout)."),
        click.option("--workers", type=int, help="Parallel workers (default $GWWALKS_WORKERS or 1)."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _gather(kw: dict[str, Any]) -> tuple[dict[str, Any], int | None]:
    file_values = load_config_file(kw["config_path"]) if kw["config_path"] else {}
    flags = {
        "process": kw["process"],
        "lambda": kw["lam"],
        "delta": kw["delta"],
        "offspring.kind": kw["offspring_kind"],
        "offspring.params": None if kw["offspring_params"] is None else parse_offspring_params(kw["offspring_params"]),
        "allow-subcritical": kw["allow_subcritical"],
        "quantity": kw["quantity"],
        "level": kw["level"],
        "n": kw["gap"],
        "trials": kw["trials"],
        "seed": kw["seed"],
        "max-steps": kw["max_steps"],
        "max-time": kw["max_time"],
        "max-jumps": kw["max_jumps"],
        "max-level": kw["max_level"],
        "format": kw["fmt"],
        "out": kw["out"],
    }
    return resolve_config(file_values, flags), kw["workers"]


@cli.command()
@run_options
def simulate(**kw):
    """Run one Monte Carlo estimate and write a result record."""
    cfg, workers = _gather(kw)
    spec = build_spec(cfg)
    t0 = time.perf_counter()
    est = estimate(spec, cfg["quantity"], cfg["level"], int(cfg["n"]), workers)
    elapsed = time.perf_counter() - t0
    row = {
        "quantity": cfg["quantity"],
        "estimate": est.mean,
        "stderr": est.stderr,
        "ci_low": est.ci95[0],
        "ci_high": est.ci95[1],
        "trials": est.trials,
        "samples": est.samples,
        "censored_fraction": est.censored_fraction,
        "seed": est.seed,
    }
    _emit(_render([row], SIMULATE_COLUMNS, cfg), cfg["out"])
    click.echo(
        f"{cfg['quantity']}: {est.mean:.6g} +/- {est.stderr:.3g} "
        f"(censored {est.censored_fraction:.2%}, {est.trials} trials, seed {est.seed}) "
        f"in {elapsed:.2f}s",
        err=True,
    )
    if est.censored_fraction >= 1.0:
        click.echo("error: every trial was censored by a cap", err=True)
        return EXIT_DEGENERATE
    return 0


@cli.command(name="sweep")
@run_options
@click.option("--parameter", type=click.Choice(list(SWEEP_PARAMETERS)), required=True)
@click.option("--grid", "grid_text", required=True, help='"start:stop:steps" or "v1,v2,...".')
def sweep_cmd(parameter: str, grid_text: str, **kw):
    """Estimate across a grid of one parameter; one row per grid value."""
    grid = parse_grid(grid_text)
    cfg, workers = _gather(kw)
    spec = build_spec(cfg)
    level = cfg["level"]
    points = sweep(spec, parameter, grid, quantity=cfg["quantity"], level=level, n=int(cfg["n"]), workers=workers)
    rows = []
    for pt in points:
        est = pt.estimate
        rows.append(
            {
                "parameter": pt.parameter,
                "value": float(pt.value),
                "estimate": None if est is None else est.mean,
                "stderr": None if est is None else est.stderr,
                "ci_low": None if est is None else est.ci95[0],
                "ci_high": None if est is None else est.ci95[1],
                "trials": spec.trials,
                "censored_fraction": None if est is None else est.censored_fraction,
                "seed": pt.seed,
                "error": pt.error,
            }
        )
    _emit(_render(rows, SWEEP_COLUMNS, cfg), cfg["out"])
    failed = sum(1 for pt in points if pt.error)
    click.echo(f"sweep over {parameter}: {len(points)} rows, {failed} failed", err=True)
    return EXIT_DEGENERATE if failed == len(points) else 0


# -- oracle ---------------------------------------------------------------------------


@cli.group(name="oracle")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text", show_default=True)
@click.pass_context
def oracle_group(ctx, fmt):
    """Closed-form predictions."""
    ctx.obj = {"format": fmt}


def _report(ctx, name: str, inputs: dict, value: Any, formula: str) -> int:
    fmt = ctx.obj["format"]
    if fmt == "json":
        click.echo(dumps({"operation": name, "inputs": inputs, "value": value, "formula": formula}))
    else:
        shown = repr(value) if isinstance(value, float) else str(value)
        click.echo(shown)
        click.echo(f"formula: {formula}")
    return 0


def _format_option(fn):
    # allow --format after the subcommand as well
    return click.option("--format", "fmt", type=click.Choice(["text", "json"]), default=None)(fn)


def _apply_format(ctx, fmt):
    if fmt is not None:
        ctx.obj["format"] = fmt


@oracle_group.command()
@click.option("--p", type=float, required=True)
@click.option("--n", type=int, required=True)
@_format_option
@click.pass_context
def ruin(ctx, p, n, fmt):
    """P(hit n+1 before 0) from 1 with up-probability p."""
    _apply_format(ctx, fmt)
    value = oracle.ruin_probability(p, n)
    return _report(ctx, "ruin", {"p": p, "n": n}, value, "((q/p) - 1) / ((q/p)^(n+1) - 1), or 1/(n+1) at p = 1/2")


@oracle_group.command(name="biased-threshold")
@click.option("--m", type=float, required=True)
@click.option("--lambda", "lam", type=float, required=True)
@_format_option
@click.pass_context
def biased_threshold(ctx, m, lam, fmt):
    """Smallest n with m^n (lambda-1)/(lambda^(n+1)-1) > 1."""
    _apply_format(ctx, fmt)
    value = oracle.biased_threshold_n(m, lam)
    return _report(ctx, "biased-threshold", {"m": m, "lambda": lam}, value, "min n: m^n (lambda - 1) / (lambda^(n+1) - 1) > 1")


@oracle_group.command(name="orrw-product")
@click.option("--delta", type=float, required=True)
@click.option("--n", type=int, required=True)
@_format_option
@click.pass_context
def orrw_product(ctx, delta, n, fmt):
    """prod_{j<=n} j/(j+delta)."""
    _apply_format(ctx, fmt)
    value = oracle.orrw_escape_product(n, delta)
    return _report(ctx, "orrw-product", {"delta": delta, "n": n}, value, "prod_{j=1}^{n} j / (j + delta)")


@oracle_group.command(name="orrw-threshold")
@click.option("--m", type=float, required=True)
@click.option("--delta", type=float, required=True)
@_format_option
@click.pass_context
def orrw_threshold(ctx, m, delta, fmt):
    """Smallest n with m^n prod_{j<=n} j/(j+delta) > 1."""
    _apply_format(ctx, fmt)
    value = oracle.orrw_threshold_n(m, delta)
    return _report(ctx, "orrw-threshold", {"m": m, "delta": delta}, value, "min n: m^n prod_{j=1}^{n} j / (j + delta) > 1")


@oracle_group.command(name="vrjp-constant")
@click.option("--tol", type=float, default=1e-10, show_default=True)
@_format_option
@click.pass_context
def vrjp_constant(ctx, tol, fmt):
    """Integral of e^-z/(2+z) over [0, inf)."""
    _apply_format(ctx, fmt)
    value = oracle.vrjp_constant(tol)
    return _report(ctx, "vrjp-constant", {"tol": tol}, value, "int_0^inf exp(-z) / (2 + z) dz")


@oracle_group.command()
@click.option("--m", type=float, required=True)
@click.option("--lambda", "lam", type=float, required=True)
@_format_option
@click.pass_context
def classify(ctx, m, lam, fmt):
    """Transient / recurrent verdict for the biased walk."""
    _apply_format(ctx, fmt)
    c = oracle.classify_biased(m, lam)
    return _report(ctx, "classify", {"m": m, "lambda": lam}, c.verdict.value, c.justification)


@oracle_group.command(name="return-bound")
@click.option("--m", type=float, required=True)
@click.option("--lambda", "lam", type=float, required=True)
@click.option("--tol", type=float, default=1e-12, show_default=True)
@_format_option
@click.pass_context
def return_bound(ctx, m, lam, tol, fmt):
    """1 + sum_n m^n (lambda-1)/(lambda^n-1), for lambda > m."""
    _apply_format(ctx, fmt)
    value = oracle.mean_return_time_bound(m, lam, tol)
    return _report(ctx, "return-bound", {"m": m, "lambda": lam, "tol": tol}, value, "1 + sum_{n>=1} m^n (lambda - 1) / (lambda^n - 1)")


@oracle_group.command(name="embedded-mean")
@click.option("--m", type=float, required=True)
@click.option("--lambda", "lam", type=float, required=True)
@click.option("--n", type=int, required=True)
@_format_option
@click.pass_context
def embedded_mean(ctx, m, lam, n, fmt):
    """m^n (lambda-1)/(lambda^(n+1)-1)."""
    _apply_format(ctx, fmt)
    value = oracle.biased_embedded_mean(m, lam, n)
    return _report(ctx, "embedded-mean", {"m": m, "lambda": lam, "n": n}, value, "m^n (lambda - 1) / (lambda^(n+1) - 1)")


def main(argv: list[str] | None = None) -> int:
    try:
        rv = cli.main(args=argv, prog_name="gwwalks", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except DegenerateEstimateError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DEGENERATE
    except (DomainError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_CONFIG
    except GWWalksError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_CONFIG
    return rv if isinstance(rv, int) else 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
