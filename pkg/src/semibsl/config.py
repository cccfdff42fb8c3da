"""Run configuration: YAML loading, schema validation and object assembly."""

from __future__ import annotations

import copy
import csv
import json
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from .marginals import MarginalSpec
from .mcmc import DEFAULT_PRIORS, ChainConfig, ChainInitError, Prior, run_chain
from .models import ParameterError, make_model
from .rng import SeedTree
from .synlik import EstimatorConfig, build_whitening
from .whitening import WhiteningContext

SCHEMA_VERSION = 1
DEFAULT_ITERATIONS = 100000
DEFAULT_N_COV = 5000

# fixed stream indices under the root seed
STREAM_OBSERVED, STREAM_CHAIN, STREAM_TUNE, STREAM_BENCHMARK, STREAM_WHITENING, STREAM_DIAG = range(6)


class ConfigError(ValueError):
    pass


def load_schema() -> dict:
    return json.loads(resources.files("semibsl").joinpath("schema/config.schema.json").read_text())


def validate(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None


def load_config(path, *, seed: int | None = None, out: str | None = None) -> dict:
    """Read, validate and resolve a config file; CLI overrides win."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    validate(raw)
    cfg = copy.deepcopy(raw)
    cfg["_base_dir"] = str(path.resolve().parent)
    if seed is not None:
        cfg["seed"] = int(seed)
    cfg.setdefault("seed", 0)
    if out is not None:
        cfg["output"] = out
    cfg.setdefault("output", "out")
    cfg.setdefault("burn_in", 0.2)
    return cfg


def resolve_path(cfg: dict, name: str) -> Path:
    p = Path(name)
    return p if p.is_absolute() else Path(cfg["_base_dir"]) / p


def public_view(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if not k.startswith("_")}


def derived_seed(root: int, *path: int) -> int:
    """A 63-bit integer seed that is a pure function of ``(root, path)``."""
    state = np.random.SeedSequence(int(root), spawn_key=tuple(path)).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def build_model(cfg: dict):
    if "model" not in cfg:
        raise ConfigError("this command needs a model section")
    try:
        return make_model(cfg["model"]["name"], **cfg["model"].get("options", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from None


def observed_summaries(cfg: dict, model) -> tuple[np.ndarray, np.ndarray | None]:
    """Observed summary vector, plus the raw dataset when it was simulated."""
    obs = cfg.get("observed") or {}
    if "summary_file" in obs:
        path = resolve_path(cfg, obs["summary_file"])
        if not path.exists():
            raise ConfigError(f"observed summary file not found: {path}")
        with path.open() as fh:
            rows = [r for r in csv.reader(fh)]
        try:
            s = np.array([float(v) for v in rows[1]])
        except (IndexError, ValueError):
            raise ConfigError(f"{path}: expected a header row and one row of numbers") from None
        if s.size != model.d:
            raise ConfigError(f"{path}: expected {model.d} summaries, found {s.size}")
        return s, None
    if "theta_true" not in obs:
        raise ConfigError("observed: give either summary_file or theta_true")
    try:
        theta = model.check(obs["theta_true"])
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None
    tree = SeedTree(int(obs["seed"])) if "seed" in obs else SeedTree(cfg["seed"], (STREAM_OBSERVED,))
    raw = model.simulate(theta, 1, tree.generator())
    return model.summarize(raw)[0], np.asarray(raw)[0]


def estimator_entries(cfg: dict) -> dict:
    if "estimators" in cfg:
        return dict(cfg["estimators"])
    if "estimator" in cfg:
        return {"main": cfg["estimator"]}
    raise ConfigError("config needs an estimator or an estimators mapping")


def build_estimator(cfg: dict, entry: dict, model, *, workers: int = 1, whitening_cache: dict | None = None,
                    theta_default=None) -> EstimatorConfig:
    marginal = MarginalSpec.parse(entry.get("marginal", "kde"),
                                  per_side_nu=entry.get("per_side_nu", True),
                                  bandwidth_rule=entry.get("bandwidth", "robust"))
    whitening = None
    if entry["kind"] == "whitened":
        whitening = load_or_build_whitening(cfg, entry.get("whitening", {}), model, marginal,
                                            workers=workers, cache=whitening_cache, theta_default=theta_default)
    try:
        return EstimatorConfig(kind=entry["kind"], marginal=marginal, n=int(entry.get("n", 500)),
                               gamma=float(entry.get("gamma", 1.0)), whitening=whitening,
                               dependence=entry.get("dependence", "grc"),
                               shrink_correlation=entry.get("shrink_correlation", "pearson"),
                               warm_start=entry.get("warm_start", True))
    except ValueError as exc:
        raise ConfigError(f"estimator: {exc}") from None


def load_or_build_whitening(cfg: dict, spec: dict, model, marginal: MarginalSpec, *, workers: int = 1,
                            cache: dict | None = None, theta_default=None) -> WhiteningContext:
    if "file" in spec:
        path = resolve_path(cfg, spec["file"])
        if not path.exists():
            raise ConfigError(f"whitening file not found: {path}")
        try:
            ctx = WhiteningContext.load(path)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if ctx.d != model.d:
            raise ConfigError(f"{path}: W is {ctx.d}x{ctx.d} but the model has {model.d} summaries")
        return ctx
    theta0 = spec.get("theta0", theta_default)
    if theta0 is None:
        raise ConfigError("whitening: theta0 is required to estimate W")
    n_cov = int(spec.get("n_cov", DEFAULT_N_COV))
    key = (tuple(theta0), n_cov, marginal.label, marginal.bandwidth_rule)
    if cache is not None and key in cache:
        return cache[key]
    try:
        ctx = build_whitening(model, theta0, marginal, n_cov, SeedTree(cfg["seed"], (STREAM_WHITENING,)), workers)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None
    if cache is not None:
        cache[key] = ctx
    return ctx


def build_prior(cfg: dict, model) -> Prior:
    spec = (cfg.get("chain") or {}).get("prior")
    if spec is None:
        if model.name not in DEFAULT_PRIORS:
            raise ConfigError(f"no default prior for model {model.name}")
        return DEFAULT_PRIORS[model.name]
    try:
        prior = Prior.from_dict(spec)
    except ValueError as exc:
        raise ConfigError(f"chain.prior: {exc}") from None
    if prior.p != model.p:
        raise ConfigError(f"chain.prior has {prior.p} dimensions, model has {model.p}")
    return prior


def chain_settings(cfg: dict, model):
    chain = cfg.get("chain") or {}
    obs = cfg.get("observed") or {}
    init = chain.get("init", obs.get("theta_true"))
    if init is None:
        raise ConfigError("chain.init is required when observed.theta_true is absent")
    iterations = int(chain.get("iterations", DEFAULT_ITERATIONS))
    seed = int(chain.get("seed", derived_seed(cfg["seed"], STREAM_CHAIN)))
    return init, iterations, seed


def proposal_covariance(cfg: dict, model, estimator: EstimatorConfig, s_obs, prior: Prior, init,
                        entries: dict, *, workers: int = 1, log=None) -> np.ndarray:
    """Fixed matrix from the config, or the covariance of a pilot chain."""
    chain = cfg.get("chain") or {}
    if "proposal_cov" in chain:
        cov = np.asarray(chain["proposal_cov"], dtype=float)
        if cov.shape != (model.p, model.p):
            raise ConfigError(f"chain.proposal_cov must be {model.p}x{model.p}")
        return cov
    pilot = chain.get("pilot", {})
    sd = np.asarray(pilot.get("initial_sd", 0.05 * np.maximum(np.abs(np.asarray(init, float)), 0.1)))
    if sd.shape != (model.p,):
        raise ConfigError("chain.pilot.initial_sd has the wrong length")
    which = pilot.get("estimator")
    if which is None:
        pilot_est = estimator
    elif which == "exact":
        pilot_est = EstimatorConfig("exact")
    elif which in entries:
        pilot_est = build_estimator(cfg, entries[which], model, workers=workers)
    else:
        raise ConfigError(f"chain.pilot.estimator: unknown estimator {which!r}")
    iters = int(pilot.get("iterations", 2000))
    pcfg = ChainConfig(iters, np.diag(sd ** 2), prior, derived_seed(cfg["seed"], STREAM_CHAIN, 1), init)
    if log:
        log(f"pilot chain: {iters} iterations with {pilot_est.label}")
    run = run_chain(pcfg, pilot_est, model, s_obs, workers=workers)
    cov = np.cov(run.post_burn_in(cfg["burn_in"]).T)
    cov = np.atleast_2d(cov)
    if np.linalg.eigvalsh(cov)[0] <= 0:
        raise ChainInitError("pilot chain did not move; set chain.proposal_cov explicitly")
    return cov
