"""Command-line entry point: ``astbayes <subcommand> [options]``.

Every subcommand writes its outputs plus ``manifest.json`` into ``--out``.
``astbayes replay MANIFEST`` reruns a recorded command and reproduces its
numeric outputs byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .ast_core import ASTParams, Sample, ast_sample, descriptive_stats
from .diagnostics import (
    default_grid,
    gelman_rubin,
    posterior_predictive,
    predictive_moments,
    summarize,
    write_predictive,
    write_summary,
)
from .errors import (
    ChainError,
    DiagnosticsError,
    DomainError,
    InputError,
    NumericalError,
    ReplicationError,
)
from .nu_prior import DEFAULT_QUAD_TOL, build_prior_table
from .priors import JointPriorSpec
from .sampler import BLOCKS, SamplerConfig, Trace, chain_seeds, dispersed_inits, read_trace, run_chains, write_trace
from .sim_study import read_grid_config, run_grid, write_results

logger = logging.getLogger("astbayes")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NUMERICAL = 4
EXIT_DIAGNOSTIC = 5


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# ingestion
# --------------------------------------------------------------------------


def ingest(path, log_transform: bool = False, quiet: bool = False) -> Sample:
    """Read one value per line; a single non-numeric first line is a header.

    Blank lines are skipped.  With ``log_transform`` the natural log is
    taken and every value must be strictly positive.
    """
    values = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text:
                continue
            try:
                value = float(text)
            except ValueError:
                if lineno == 1:
                    continue
                raise InputError(f"not a number: {text!r}", lineno) from None
            if not math.isfinite(value):
                raise InputError(f"not a finite number: {text!r}", lineno)
            if log_transform:
                if value <= 0:
                    raise InputError(f"cannot take the log of {value!r}", lineno)
                value = math.log(value)
            values.append(value)
    if not values:
        raise InputError(f"{path}: no observations")
    sample = Sample(np.array(values), log_transformed=log_transform)
    if not quiet and sample.n >= 3:
        st = descriptive_stats(sample)
        print(f"n={sample.n} mean={st.mean:.4f} sd={st.std_dev:.4f} skewness={st.skewness:.4f}")
    return sample


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _write_manifest(out: Path, argv, extra: dict, started: float) -> None:
    manifest = {
        "tool": "astbayes",
        "version": __version__,
        "argv": list(argv),
        **extra,
        "wall_time_seconds": round(time.time() - started, 3),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _sampler_config(args, **defaults) -> SamplerConfig:
    values = dict(
        iterations=args.iterations, burn_in=args.burn_in, n_chains=args.chains,
        s_mu=args.s_mu, a_sigma=args.a_sigma, b_sigma=args.b_sigma,
        v_alpha=args.v_alpha, seed=args.seed, thin=args.thin,
    )
    values = {k: v for k, v in values.items() if v is not None}
    return SamplerConfig(**{**defaults, **values})


def _normalized_argv(args) -> list:
    """The command as an explicit argument list, used for replays."""
    argv = [args.command]
    for action in _SUBPARSERS[args.command]._actions:
        if not action.option_strings or action.dest in ("help", "out"):
            continue
        value = getattr(args, action.dest)
        flag = action.option_strings[-1]
        if isinstance(action, argparse._StoreTrueAction):
            if value:
                argv.append(flag)
        elif value is not None:
            if isinstance(value, list):
                for v in value:
                    argv += [flag, str(v)]
            else:
                argv += [flag, str(value)]
    return argv


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_fit(args) -> int:
    started = time.time()
    if not args.input:
        raise UsageError("fit requires --input")
    out = _prepare_out(args.out)
    sample = ingest(args.input, args.log_transform)
    cfg = _sampler_config(args, iterations=50_000, burn_in=10_000, n_chains=4).resolve(sample)
    inits = dispersed_inits(sample, cfg.n_chains, cfg.seed)
    traces = run_chains(sample, cfg, JointPriorSpec(), inits, n_jobs=args.jobs)
    for k, t in enumerate(traces):
        write_trace(t, out / f"trace_chain{k}.csv")
    pooled = Trace.pooled(traces)
    summary = summarize(pooled)
    write_summary(summary, out / "summary.csv")

    psrf = {}
    if len(traces) > 1:
        for name in BLOCKS:
            try:
                psrf[name] = gelman_rubin(traces, name)
            except DiagnosticsError:
                psrf[name] = float("nan")
    _write_rows(out / "diagnostics.csv", ["parameter", "psrf"], [(k, repr(v)) for k, v in psrf.items()])

    grid = default_grid(pooled, args.grid_points, seed=cfg.seed)
    pred = posterior_predictive(pooled, grid)
    write_predictive(pred, out / "predictive.csv")
    moments = predictive_moments(pooled, seed=cfg.seed)
    _write_moments(out / "predictive_moments.csv", moments)

    for name, mean, median, lo, hi in summary.rows():
        print(f"{name:>6} mean={mean:.4g} median={median:.4g} ci=({lo:.4g}, {hi:.4g})")
    _write_manifest(out, _normalized_argv(args), {
        "input_sha256": _sha256(args.input),
        "sampler": asdict(cfg),
        "chain_seeds": chain_seeds(cfg.seed, cfg.n_chains),
        "inits": [i.as_tuple() for i in inits],
        "acceptance_rates": [t.acceptance_rates for t in traces],
        "psrf": psrf,
        "predictive_mass": pred.mass,
    }, started)

    # nan marks a parameter that never moved in any chain; not a failure
    bad = {k: v for k, v in psrf.items() if v >= args.gr_threshold}
    if bad:
        logger.warning("Gelman-Rubin above %.3g for %s", args.gr_threshold, sorted(bad))
        return EXIT_DIAGNOSTIC
    return EXIT_OK


def cmd_simulate(args) -> int:
    started = time.time()
    out = _prepare_out(args.out)
    params = ASTParams(args.alpha, args.nu, args.mu, args.sigma)
    seed = args.seed
    sample = ast_sample(params, args.n, seed)
    with open(out / "data.txt", "w") as fh:
        for v in sample.values:
            fh.write(repr(float(v)) + "\n")
    _write_manifest(out, _normalized_argv(args), {"params": params.as_tuple(), "n": args.n, "seed": seed}, started)
    return EXIT_OK


def cmd_prior_table(args) -> int:
    started = time.time()
    out = _prepare_out(args.out)
    table = build_prior_table(args.quad_tol)
    rows = [
        (nu, repr(float(d)), repr(float(u)), repr(float(m)))
        for nu, (d, u, m) in enumerate(zip(table.kl_neighbors, table.unnormalized, table.masses), start=1)
    ]
    _write_rows(out / "prior_table.csv", ["nu", "kl_neighbor", "unnormalized_mass", "mass"], rows)
    _write_manifest(out, _normalized_argv(args), {"quad_tol": args.quad_tol}, started)
    return EXIT_OK


def cmd_sim_study(args) -> int:
    started = time.time()
    if not args.grid_config:
        raise UsageError("sim-study requires --grid-config")
    try:
        cells, config_seed = read_grid_config(args.grid_config)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    out = _prepare_out(args.out)
    master = config_seed if args.seed is None else args.seed
    results = run_grid(cells, master, n_jobs=args.jobs)
    write_results(results, out / "sim_study.csv")
    for r in results:
        print(",".join(str(v) for v in r.row()))
    _write_manifest(out, _normalized_argv(args), {
        "grid_config_sha256": _sha256(args.grid_config),
        "master_seed": master,
    }, started)
    return EXIT_OK


def cmd_predictive(args) -> int:
    started = time.time()
    if not args.input:
        raise UsageError("predictive requires --input")
    out = _prepare_out(args.out)
    paths = _trace_paths(args.input)
    trace = Trace.pooled([read_trace(p) for p in paths])
    seed = args.seed
    grid = default_grid(trace, args.grid_points, seed=seed)
    pred = posterior_predictive(trace, grid)
    write_predictive(pred, out / "predictive.csv")
    moments = predictive_moments(trace, seed=seed)
    _write_moments(out / "predictive_moments.csv", moments)
    print(f"predictive mean={moments.mean:.4f} sd={moments.std_dev:.4f} skewness={moments.skewness:.4f}")
    _write_manifest(out, _normalized_argv(args), {
        "traces": {str(p): _sha256(p) for p in paths},
        "predictive_mass": pred.mass,
    }, started)
    return EXIT_OK


def cmd_replay(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    argv = list(manifest["argv"])
    out = args.out if args.out else str(Path(args.manifest).parent)
    return main(argv + ["--out", out])


def _trace_paths(inputs):
    paths = []
    for item in inputs:
        p = Path(item)
        if p.is_dir():
            found = sorted(p.glob("trace_chain*.csv"))
            if not found:
                raise InputError(f"{p}: no trace_chain*.csv files")
            paths.extend(found)
        else:
            paths.append(p)
    return paths


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _write_moments(path, moments):
    _write_rows(path, ["statistic", "value"], [
        ("mean", repr(moments.mean)), ("std_dev", repr(moments.std_dev)), ("skewness", repr(moments.skewness)),
    ])


def _prepare_out(out) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

_SUBPARSERS: dict = {}


def _add_sampler_flags(p):
    p.add_argument("--iterations", type=int)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--s-mu", type=float)
    p.add_argument("--a-sigma", type=float)
    p.add_argument("--b-sigma", type=float)
    p.add_argument("--v-alpha", type=float)
    p.add_argument("--thin", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="astbayes", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the AST model to a data file")
    p.add_argument("--input")
    p.add_argument("--log-transform", action="store_true")
    _add_sampler_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--grid-points", type=int, default=512)
    p.add_argument("--gr-threshold", type=float, default=1.1)
    p.set_defaults(func=cmd_fit)
    _SUBPARSERS["fit"] = p

    p = sub.add_parser("simulate", help="draw an AST sample")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--nu", type=int, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)
    _SUBPARSERS["simulate"] = p

    p = sub.add_parser("prior-table", help="tabulate the prior on nu")
    p.add_argument("--quad-tol", type=float, default=DEFAULT_QUAD_TOL)
    p.set_defaults(func=cmd_prior_table)
    _SUBPARSERS["prior-table"] = p

    p = sub.add_parser("sim-study", help="repeated-sampling study over a grid of cells")
    p.add_argument("--grid-config")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sim_study)
    _SUBPARSERS["sim-study"] = p

    p = sub.add_parser("predictive", help="posterior predictive from trace files")
    p.add_argument("--input", action="append", help="trace CSV or fit output directory; repeatable")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-points", type=int, default=512)
    p.set_defaults(func=cmd_predictive)
    _SUBPARSERS["predictive"] = p

    p = sub.add_parser("replay", help="rerun the command recorded in a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    _SUBPARSERS["replay"] = p

    for name, p in _SUBPARSERS.items():
        p.add_argument("--out", default=None if name == "replay" else ".")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    # absolute paths keep manifests replayable from any directory
    for dest in ("input", "grid_config"):
        value = getattr(args, dest, None)
        if isinstance(value, list):
            setattr(args, dest, [str(Path(v).resolve()) for v in value])
        elif value:
            setattr(args, dest, str(Path(value).resolve()))
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"astbayes {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, OSError) as exc:
        print(f"astbayes {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, ChainError, ReplicationError) as exc:
        print(f"astbayes {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DomainError as exc:
        print(f"astbayes {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
