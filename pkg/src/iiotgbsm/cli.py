"""Command-line campaign runner.

Every output is delimited text whose ``#`` header lines carry the command,
seed, realization count and the fully resolved scenario.
"""

from __future__ import annotations

import argparse
import csv
import io
import re
import sys
from pathlib import Path

import numpy as np

from . import campaigns
from .config import (ConfigError, ScenarioParams, ValidationError, apply_overrides, dumps, ensure_valid,
                     load_scenario, preset)
from .statistics import CdfCurve, empirical_cdf, max_vertical_distance, mmse_fit

EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_RUNTIME = 4

_PRESET = re.compile(r"^(SA|SB)-(LOS|NLOS)(-alt)?$")


class RuntimeFailure(RuntimeError):
    pass


# --- inputs ---------------------------------------------------------------------

def resolve_scenario(spec: str, overrides=()) -> ScenarioParams:
    """Scenario file path, or a preset name such as ``SA-NLOS`` / ``SB-LOS-alt``."""
    path = Path(spec)
    if path.is_file():
        params = load_scenario(path)
    else:
        m = _PRESET.match(spec)
        if not m:
            raise ConfigError(f"no scenario file or preset named {spec!r}")
        params = preset(m.group(1), m.group(2), alternate=bool(m.group(3)))
    return apply_overrides(params, list(overrides))


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


def _parse_free(items) -> dict[str, tuple[float, float]]:
    space = {}
    for item in items:
        m = re.match(r"^([\w.\[\]]+)=([^:]+):(.+)$", item)
        if not m:
            raise ConfigError(f"--free expects name=lo:hi, got {item!r}")
        try:
            lo, hi = float(m.group(2)), float(m.group(3))
        except ValueError as exc:
            raise ConfigError(f"bad bounds in {item!r}") from exc
        if hi < lo:
            raise ConfigError(f"empty interval in {item!r}")
        space[m.group(1)] = (lo, hi)
    if not space:
        raise ConfigError("fit needs at least one --free parameter")
    return space


def read_cdf(path) -> CdfCurve:
    values, probs = [], []
    try:
        with open(path, newline="") as fh:
            rows = csv.reader(line for line in fh if not line.startswith("#"))
            next(rows, None)  # column names
            for row in rows:
                if row:
                    values.append(float(row[0]))
                    probs.append(float(row[1]))
    except (OSError, ValueError, IndexError) as exc:
        raise ConfigError(f"cannot read CDF file {path}: {exc}") from exc
    if not values:
        raise ConfigError(f"CDF file {path} has no rows")
    values, probs = np.array(values), np.array(probs)
    if np.any(np.diff(values) <= 0) or np.any(np.diff(probs) < 0) or not np.isclose(probs[-1], 1.0):
        raise ConfigError(f"{path} is not a valid step CDF")
    return CdfCurve(values, probs)


# --- outputs --------------------------------------------------------------------

def header(command: str, seed, realizations, params: ScenarioParams | None, extra=()) -> list[str]:
    lines = [f"iiotgbsm {command}"]
    if seed is not None:
        lines.append(f"seed: {seed}")
    if realizations is not None:
        lines.append(f"realizations: {realizations}")
    lines.extend(extra)
    if params is not None:
        lines.append("params:")
        lines.extend("  " + line for line in dumps(params).splitlines())
    return lines


def write_table(path: Path, header_lines, columns, rows):
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    path.write_text(buf.getvalue())


def write_cdf(path: Path, header_lines, curve: CdfCurve):
    write_table(path, header_lines, ["delay_spread_s", "cdf"], zip(curve.values, curve.probabilities))


def _slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9.+-]+", "_", label).strip("_")


# --- commands ---------------------------------------------------------------------

def cmd_realize(args, params):
    times = _floats(args.times)
    if not times or min(times) < 0:
        raise ConfigError("--times needs nonnegative values")
    seeds = campaigns.realization_seeds(args.seed, args.realizations)
    for i, s in enumerate(seeds):
        scene = campaigns.draw_scenes(params, [s])[0]
        real = scene.realize(times)
        extra = [f"realization: {i}", f"sigma_tau_s: {scene.env.sigma_tau!r}"]
        real.write_csv(args.out / f"realization_{i:04d}.csv",
                       header("realize", args.seed, args.realizations, params, extra))
    return [f"realizations written: {args.realizations}"]


def cmd_acf(args, params):
    instants = _floats(args.instants)
    if not instants or min(instants) < 0:
        raise ConfigError("--instants needs nonnegative values")
    if args.max_lag <= 0 or args.lags < 2:
        raise ConfigError("--max-lag must be > 0 and --lags >= 2")
    lags = np.linspace(0.0, args.max_lag, args.lags)
    clusters = [None] + [int(c) for c in _floats(args.clusters)] if args.clusters else [None]
    methods = ["theoretical", "simulated"] if args.method == "both" else [args.method]
    summary = []
    for method in methods:
        curves = campaigns.acf_curves(params, args.seed, args.realizations, instants, lags, clusters,
                                      method=method, workers=args.workers)
        for (t, c), est in curves.items():
            label = f"{method}_t={t:g}s_" + ("total" if c is None else f"cluster_{c}")
            extra = [f"method: {method}", f"instant_s: {t!r}",
                     "paths: " + ("all" if c is None else f"cluster {c}"),
                     "normalization: unit at zero lag, per curve"]
            write_table(args.out / f"acf_{_slug(label)}.csv",
                        header("acf", args.seed, args.realizations, params, extra),
                        ["delta_t_s", "abs_acf"], zip(lags, np.abs(est.value)))
            summary.append(f"{label}: abs_acf(max lag)={float(abs(est.value[-1]))!r} max_se={float(np.max(est.standard_error()))!r}")
    return summary


def _ds_variant_set(args, params) -> dict:
    if args.variants == "base":
        return {"SMC+DMC": (params, False)}
    if args.variants == "dmc":
        return campaigns.dmc_variants(params)
    if args.variants == "fig4":
        return campaigns.fig4_variants(params)
    # fig6: presets with the SA/SB cluster counts, then the user's overrides
    return campaigns.fig6_variants(lambda p: ensure_valid(apply_overrides(p, args.set)))


def cmd_ds_cdf(args, params):
    variants = _ds_variant_set(args, params)
    samples = campaigns.ds_variants(variants, args.seed, args.realizations, t=args.time, workers=args.workers)
    summary = []
    for label, values in samples.items():
        p, smc_only = variants[label]
        curve = empirical_cdf(values)
        extra = [f"variant: {label}", f"paths: {'SMC only' if smc_only else 'SMC+DMC'}", f"time_s: {args.time!r}"]
        write_cdf(args.out / f"ds_cdf_{_slug(label)}.csv", header("ds-cdf", args.seed, args.realizations, p, extra),
                  curve)
        summary.append(f"{label}: median_ds_s={curve.median!r} mean_ds_s={float(np.mean(values))!r}")
    return summary


def cmd_fit(args, params):
    if not args.reference:
        raise ConfigError("fit needs --reference")
    reference = read_cdf(args.reference)
    space = _parse_free(args.free)

    def simulate(cand):
        return campaigns.ds_samples(cand, args.seed, args.realizations, t=args.time, workers=args.workers)

    try:
        result = mmse_fit(reference, params, space, simulate, budget=args.budget)
    except RuntimeError as exc:
        raise RuntimeFailure(str(exc)) from exc
    extra = [f"reference: {Path(args.reference).name}", f"budget: {args.budget}",
             "free: " + ", ".join(f"{k}=[{lo!r}, {hi!r}]" for k, (lo, hi) in space.items())]
    names = list(space)
    rows = [[i] + [pt[k] for k in names] + [res, best] for i, (pt, res, best) in enumerate(result.trace)]
    write_table(args.out / "fit_trace.csv", header("fit", args.seed, args.realizations, params, extra),
                ["evaluation"] + names + ["residual", "best_residual"], rows)
    (args.out / "fit_params.yaml").write_text(
        "".join(f"# {line}\n" for line in header("fit", args.seed, args.realizations, None, extra))
        + dumps(result.params))
    return [f"{k}={v!r}" for k, v in result.point.items()] + [f"residual={result.residual!r}",
                                                               f"evaluations={result.evaluations}"]


def cmd_compare(args, params):
    a, b = read_cdf(args.cdf_a), read_cdf(args.cdf_b)
    d = max_vertical_distance(a, b)
    return [f"max_vertical_distance={d!r}", f"median_a_s={a.median!r}", f"median_b_s={b.median!r}"]


COMMANDS = {"realize": cmd_realize, "acf": cmd_acf, "ds-cdf": cmd_ds_cdf, "fit": cmd_fit, "compare": cmd_compare}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iiotgbsm", description="Industrial MIMO channel campaigns.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, stochastic=True):
        p.add_argument("--out", type=Path, required=True, help="output directory")
        if stochastic:
            p.add_argument("--scenario", required=True, help="scenario YAML file or preset (SA-NLOS, SB-LOS-alt, ...)")
            p.add_argument("--seed", type=int, required=True)
            p.add_argument("--realizations", type=int, default=100)
            p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
            p.add_argument("--workers", type=int, default=None, help="worker processes (default: all CPUs)")

    p = sub.add_parser("realize", help="dump channel realizations")
    common(p)
    p.add_argument("--times", default="0", help="comma-separated instants in seconds")
    p.set_defaults(realizations=1)

    p = sub.add_parser("acf", help="temporal ACF curves")
    common(p)
    p.add_argument("--instants", default="0.001,0.005")
    p.add_argument("--max-lag", type=float, default=5e-3)
    p.add_argument("--lags", type=int, default=51)
    p.add_argument("--clusters", default="", help="comma-separated cluster indices (the total is always written)")
    p.add_argument("--method", choices=["theoretical", "simulated", "both"], default="both")

    p = sub.add_parser("ds-cdf", help="RMS delay-spread CDFs")
    common(p)
    p.add_argument("--variants", choices=["base", "dmc", "fig4", "fig6"], default="dmc")
    p.add_argument("--time", type=float, default=0.0)

    p = sub.add_parser("fit", help="MMSE fit against a reference CDF")
    common(p)
    p.add_argument("--reference", required=True)
    p.add_argument("--free", action="append", default=[], metavar="NAME=LO:HI")
    p.add_argument("--budget", type=int, default=60)
    p.add_argument("--time", type=float, default=0.0)

    p = sub.add_parser("compare", help="max vertical distance between two CDF files")
    common(p, stochastic=False)
    p.add_argument("cdf_a")
    p.add_argument("cdf_b")
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        params = None
        if args.command != "compare":
            if args.realizations < 1:
                raise ConfigError("--realizations must be >= 1")
            if args.seed < 0 or args.seed >= 2**64:
                raise ConfigError("--seed must be a 64-bit nonnegative integer")
            if args.workers is not None and args.workers < 1:
                raise ConfigError("--workers must be >= 1")
            params = ensure_valid(resolve_scenario(args.scenario, args.set))
        args.out.mkdir(parents=True, exist_ok=True)
        summary = COMMANDS[args.command](args, params)
        lines = header(args.command, getattr(args, "seed", None), getattr(args, "realizations", None), params)
        text = "".join(f"# {line}\n" for line in lines) + "".join(f"{line}\n" for line in summary)
        (args.out / "summary.txt").write_text(text)
        sys.stdout.write("".join(f"{line}\n" for line in summary))
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as exc:
        print(f"invalid parameters: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
