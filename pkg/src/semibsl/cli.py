"""Command-line batch runner.

Every subcommand takes ``--config`` (YAML, see ``schema/config.schema.json``)
plus optional ``--seed``, ``--workers`` and ``--out`` overrides, and writes
only inside the output directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import subprocess
import sys
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .config import (
    STREAM_BENCHMARK,
    STREAM_DIAG,
    STREAM_TUNE,
    ConfigError,
    build_estimator,
    build_model,
    build_prior,
    chain_settings,
    derived_seed,
    estimator_entries,
    load_config,
    load_or_build_whitening,
    observed_summaries,
    proposal_covariance,
    public_view,
)
from .corestats import DegenerateSampleError, KdeModel, NotPositiveDefiniteError
from .marginals import MarginalSpec
from .mcmc import Chain, ChainConfig, ChainInitError, run_chain, tune_n
from .metrics import (
    BENCHMARK_BANDWIDTH,
    BENCHMARK_DENSITIES,
    BENCHMARK_NS,
    Grid,
    parse_density,
    posterior_grid,
    posterior_tv,
    kde2_on_grid,
    density_benchmark,
    benchmark_estimators,
)
from .models import ParameterError
from .rng import SeedTree
from .whitening import WhiteningError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INTERRUPTED = 0, 2, 3, 130

log = logging.getLogger("semibsl")


# --- output helpers -------------------------------------------------------------


def fmt(value) -> str:
    """Round-trip exact text for numbers; 0/1 for booleans."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def git_describe() -> str | None:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=Path(__file__).parent,
                             capture_output=True, text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return None
    return (out.stdout.strip() or None) if out.returncode == 0 else None


def write_manifest(out: Path, command: str, cfg: dict, args, **extra) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "git_describe": git_describe(),
        "seed": cfg["seed"],
        "workers": args.workers,
        "config": public_view(cfg),
        **extra,
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return str(obj)


def _out_dir(cfg) -> Path:
    return Path(cfg["output"])


# --- subcommands --------------------------------------------------------------


def cmd_simulate(cfg, args) -> int:
    model = build_model(cfg)
    s_obs, raw = observed_summaries(cfg, model)
    out = _out_dir(cfg)
    if raw is not None:
        data = np.atleast_1d(raw)
        if data.ndim == 1:
            write_csv(out / "observed.csv", ["y"], ([v] for v in data))
        else:
            write_csv(out / "observed.csv", [f"c{j + 1}" for j in range(data.shape[1])], data.tolist())
    write_csv(out / "summary.csv", [f"s{j + 1}" for j in range(s_obs.size)], [s_obs.tolist()])
    write_manifest(out, "simulate", cfg, args, d=int(s_obs.size))
    log.info("wrote %s", out)
    return EXIT_OK


def _theta0(cfg, section: str):
    sec = cfg.get(section) or {}
    theta0 = sec.get("theta0", (cfg.get("observed") or {}).get("theta_true"))
    if theta0 is None:
        raise ConfigError(f"{section}.theta0 is required")
    return theta0


def cmd_tune(cfg, args) -> int:
    model = build_model(cfg)
    s_obs, _ = observed_summaries(cfg, model)
    theta0 = _theta0(cfg, "tune")
    tune = cfg.get("tune") or {}
    candidates = tune.get("candidate_ns", [100, 250, 500, 1000, 2000])
    reps = int(tune.get("reps", 50))
    rows, lines = [], []
    wcache = {}
    for k, (name, entry) in enumerate(estimator_entries(cfg).items()):
        est = build_estimator(cfg, entry, model, workers=args.workers, whitening_cache=wcache, theta_default=theta0)
        try:
            table = tune_n(est, model, s_obs, theta0, candidates, reps,
                           seed=derived_seed(cfg["seed"], STREAM_TUNE, k), workers=args.workers)
        except ParameterError as exc:
            raise ConfigError(str(exc)) from None
        for r in table:
            rows.append([name, est.label, r.n, r.std, r.failures, r.reps, r.in_band, r.viable, r.estimator_failure])
        in_band = [r.n for r in table if r.in_band]
        viable = [r.n for r in table if r.viable]
        if in_band:
            lines.append(f"{name}: n = {in_band[0]} puts the log-likelihood std in [1, 2]")
        elif viable:
            lines.append(f"{name}: std already below 2 at n = {viable[0]}; a smaller n may suffice")
        else:
            lines.append(f"{name}: no candidate n reached std <= 2")
    out = _out_dir(cfg)
    write_csv(out / "tune.csv", ["estimator", "label", "n", "std", "failures", "reps", "in_band", "viable",
                                 "estimator_failure"], rows)
    (out / "tune.txt").write_text("\n".join(lines) + "\n")
    write_manifest(out, "tune", cfg, args, candidate_ns=candidates, reps=reps)
    for line in lines:
        print(line)
    return EXIT_OK


def _chain_rows(thetas, logliks, accepted):
    for t in range(len(logliks)):
        yield [t, *thetas[t].tolist(), float(logliks[t]), bool(accepted[t])]


def _write_chain(path: Path, param_names, thetas, logliks, accepted) -> None:
    write_csv(path, ["iteration", *param_names, "loglik", "accepted"], _chain_rows(thetas, logliks, accepted))


def _write_posterior_grids(out: Path, chain: Chain, param_names, burn_in: float) -> None:
    draws = chain.post_burn_in(burn_in)
    for k, name in enumerate(param_names):
        x = draws[:, k]
        if np.ptp(x) == 0:
            continue
        kde = KdeModel.fit(x)
        grid = np.linspace(x.min() - 3 * kde.bandwidth, x.max() + 3 * kde.bandwidth, 256)
        write_csv(out / f"marginal_{name}.csv", [name, "density"], zip(grid, kde.pdf(grid)))
    for i in range(len(param_names)):
        for j in range(i + 1, len(param_names)):
            pair = draws[:, [i, j]]
            if np.ptp(pair[:, 0]) == 0 or np.ptp(pair[:, 1]) == 0:
                continue
            grid = posterior_grid(pair, pair, size=64)
            dens = kde2_on_grid(pair, grid)
            gx, gy = grid.axes
            rows = ((gx[a], gy[b], dens[a, b]) for a in range(gx.size) for b in range(gy.size))
            write_csv(out / f"pair_{param_names[i]}_{param_names[j]}.csv",
                      [param_names[i], param_names[j], "density"], rows)


def cmd_run(cfg, args) -> int:
    model = build_model(cfg)
    s_obs, _ = observed_summaries(cfg, model)
    prior = build_prior(cfg, model)
    init, iterations, seed = chain_settings(cfg, model)
    entries = estimator_entries(cfg)
    out = _out_dir(cfg)
    names = list(model.param_names)
    chains, summaries, wcache = {}, {}, {}
    for name, entry in entries.items():
        est = build_estimator(cfg, entry, model, workers=args.workers, whitening_cache=wcache, theta_default=init)
        sub = out if len(entries) == 1 else out / name
        try:
            cov = proposal_covariance(cfg, model, est, s_obs, prior, init, entries, workers=args.workers,
                                      log=log.info)
            ccfg = ChainConfig(iterations, cov, prior, seed, init)
        except ValueError as exc:
            raise ConfigError(f"chain: {exc}") from None
        log.info("%s: %d iterations with %s", name, iterations, est.label)
        progress = {}

        def keep(t, thetas, logliks, accepted, _p=progress):
            _p["state"] = (thetas, logliks, accepted)
            if t % 1000 == 0:
                log.info("  iteration %d, acceptance %.3f", t, float(accepted[1:].mean()))

        try:
            chain = run_chain(ccfg, est, model, s_obs, workers=args.workers, callback=keep)
        except KeyboardInterrupt:
            if "state" in progress:
                _write_chain(sub / "chain.partial.csv", names, *progress["state"])
            write_manifest(out, "run", cfg, args, interrupted=name)
            log.error("interrupted; partial chain written to %s", sub / "chain.partial.csv")
            return EXIT_INTERRUPTED
        _write_chain(sub / "chain.csv", names, chain.thetas, chain.logliks, chain.accepted)
        draws = chain.post_burn_in(cfg["burn_in"])
        summary = {
            "estimator": est.label,
            "acceptance_rate": chain.acceptance_rate,
            "estimator_failures": chain.failures,
            "init_attempts": chain.init_attempts,
            "posterior_mean": draws.mean(axis=0).tolist(),
            "posterior_sd": draws.std(axis=0, ddof=1).tolist(),
            "proposal_cov": cov.tolist(),
        }
        (sub / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
        _write_posterior_grids(sub, chain, names, cfg["burn_in"])
        chains[name], summaries[name] = chain, summary
        print(f"{name}: acceptance {chain.acceptance_rate:.3f}, posterior mean "
              + ", ".join(f"{p}={m:.4g}" for p, m in zip(names, summary["posterior_mean"])))
    ref = cfg.get("compare_to")
    if ref is not None:
        if ref not in chains:
            raise ConfigError(f"compare_to: unknown estimator {ref!r}")
        rows = []
        for name, chain in chains.items():
            if name == ref:
                continue
            for i in range(len(names)):
                for j in range(i + 1, len(names)):
                    tv = posterior_tv(chains[ref], chain, (i, j), cfg["burn_in"], bandwidth="ess")
                    rows.append([ref, name, names[i], names[j], tv])
                    print(f"tv({ref}, {name}) on ({names[i]}, {names[j]}) = {tv:.3f}")
        write_csv(out / "posterior_tv.csv", ["reference", "estimator", "param_a", "param_b", "tv"], rows)
    write_manifest(out, "run", cfg, args, chain_seed=seed, iterations=iterations,
                   summaries=summaries)
    return EXIT_OK


def cmd_benchmark_tv(cfg, args) -> int:
    bench = cfg.get("benchmark") or {}
    densities = [parse_density(d) for d in bench["densities"]] if "densities" in bench else list(BENCHMARK_DENSITIES)
    ns = bench.get("ns", list(BENCHMARK_NS))
    reps = int(bench.get("replicates", 200))
    rule = bench.get("bandwidth", BENCHMARK_BANDWIDTH)
    window = bench.get("window")
    rows = []
    for k, density in enumerate(densities):
        grid = None
        if window is not None:
            if not window["hi"] > window["lo"]:
                raise ConfigError("benchmark.window needs hi > lo")
            grid = Grid.uniform(window["lo"], window["hi"], int(window.get("size", 8192)))
        for n in ns:
            tree = SeedTree(cfg["seed"], (STREAM_BENCHMARK, k, int(n)))
            for est in benchmark_estimators(density, rule):
                r = density_benchmark(density, int(n), reps, est, tree, grid=grid, workers=args.workers,
                                     renormalize=window is None)
                rows.append([r.density, r.n, r.estimator, r.mean, r.std, r.replicates, r.failures,
                             r.reference_mass])
                print(f"{r.density:38s} n={r.n:5d} {r.estimator:6s} tv={r.mean:.4f} ({r.std:.4f})"
                      f" failures={r.failures}")
    out = _out_dir(cfg)
    write_csv(out / "benchmark_tv.csv", ["density", "n", "estimator", "mean_tv", "std_tv", "replicates",
                                         "failures", "reference_mass"], rows)
    write_manifest(out, "benchmark-tv", cfg, args)
    return EXIT_OK


def cmd_whiten_estimate(cfg, args) -> int:
    model = build_model(cfg)
    entries = [e for e in estimator_entries(cfg).values() if e["kind"] == "whitened"]
    if not entries:
        raise ConfigError("whiten-estimate needs a whitened estimator entry")
    entry = entries[0]
    spec = {k: v for k, v in entry.get("whitening", {}).items() if k != "file"}
    marginal = MarginalSpec.parse(entry.get("marginal", "kde"), per_side_nu=entry.get("per_side_nu", True),
                                  bandwidth_rule=entry.get("bandwidth", "robust"))
    theta0 = spec.get("theta0", (cfg.get("observed") or {}).get("theta_true"))
    ctx = load_or_build_whitening(cfg, spec, model, marginal, workers=args.workers, theta_default=theta0)
    out = _out_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    ctx.save(out / "whitening.json")
    write_manifest(out, "whiten-estimate", cfg, args, d=ctx.d, n_cov=ctx.n_cov)
    print(f"wrote {out / 'whitening.json'} (d = {ctx.d}, n_cov = {ctx.n_cov})")
    return EXIT_OK


def cmd_diag_marginals(cfg, args) -> int:
    """Per-summary shape statistics at theta0 to guide the log-variant choice."""
    from .synlik import simulate_summaries

    model = build_model(cfg)
    theta0 = _theta0(cfg, "diagnostics")
    n = int((cfg.get("diagnostics") or {}).get("n", 1000))
    try:
        theta0 = model.check(theta0)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None
    x = simulate_summaries(model, theta0, n, SeedTree(cfg["seed"], (STREAM_DIAG,)), args.workers)
    rows = []
    for j in range(x.shape[1]):
        col = x[:, j]
        rows.append([j + 1, col.mean(), col.std(ddof=1), float(stats.skew(col)), float(stats.kurtosis(col)),
                     col.min(), float(np.median(col)), col.max()])
    out = _out_dir(cfg)
    write_csv(out / "marginal_diagnostics.csv",
              ["summary", "mean", "sd", "skewness", "excess_kurtosis", "min", "median", "max"], rows)
    write_manifest(out, "diag-marginals", cfg, args, n=n)
    print(f"{'j':>3} {'skew':>9} {'ex.kurt':>9} {'min':>11} {'max':>11}")
    for r in rows:
        print(f"{r[0]:3d} {r[3]:9.3f} {r[4]:9.3f} {r[5]:11.4g} {r[7]:11.4g}")
    print("tkde1 suits positive skew with a lower bound, tkde2 negative skew, tkde3 heavy symmetric tails.")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "tune": cmd_tune,
    "run": cmd_run,
    "benchmark-tv": cmd_benchmark_tv,
    "whiten-estimate": cmd_whiten_estimate,
    "diag-marginals": cmd_diag_marginals,
}

HELP = {
    "simulate": "simulate an observed dataset and its summaries",
    "tune": "log-likelihood spread at theta0 across candidate n",
    "run": "run MCMC for each configured estimator",
    "benchmark-tv": "TV between KDE/TKDE fits and known test densities",
    "whiten-estimate": "estimate and save a whitening matrix",
    "diag-marginals": "skewness and kurtosis of each simulated summary",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semibsl", description="Semiparametric synthetic-likelihood experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--seed", type=int, help="root seed (overrides the config)")
        p.add_argument("--workers", type=int, default=1, help="threads for simulation and replicates")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


NUMERICAL_ERRORS = (ChainInitError, WhiteningError, DegenerateSampleError, NotPositiveDefiniteError,
                    FloatingPointError, np.linalg.LinAlgError)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr)
    if args.workers < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
