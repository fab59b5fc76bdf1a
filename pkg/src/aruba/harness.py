"""Config-driven experiment runner with deterministic CSV and JSON output.

A config is a JSON object::

    {
      "experiment": "static",            # static | dynamic | geometry | batch | federated
      "id": "my-run",                    # optional, defaults to the experiment kind
      "seeds": [0, 1],
      "repetitions": 1,
      "output": "results/my-run",        # optional path prefix for .csv / .json
      "env": {...},                      # environment fields
      "meta": {...},                     # meta-learner fields
      "batch": {...},                    # transfer-risk fields (batch experiments)
      "federated": {...}                 # simulator fields (federated experiments)
    }

Every block is optional; missing fields take their defaults. Unknown keys,
wrong types and constraint violations are all reported together.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .core import ArubaError
from .engine import (
    SIM_STRATEGIES,
    UPDATE_VECTORS,
    MetaRunConfig,
    online_to_batch,
    run_meta_stream,
    transfer_risk_estimate,
)
from .environments import EnvSpec, generate
from .federated import FedConfig, run_fedavg
from .meta_init import STRATEGIES as DYN_STRATEGIES
from .within_task import FTRL, OMD

EXPERIMENTS = ("static", "dynamic", "geometry", "batch", "federated")
CSV_COLUMNS = ("experiment", "seed", "t", "metric", "value")

EXIT_OK, EXIT_RUN_FAILURE, EXIT_CONFIG_ERROR = 0, 1, 2


class ConfigError(ArubaError):
    def __init__(self, errors):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


# field -> (type tag, default); null is accepted only where the default is null
_NUM, _INT, _STR, _VEC, _MAT = "number", "integer", "string", "vector", "matrix"

TOP_SCHEMA = {
    "experiment": (_STR, None),
    "id": (_STR, None),
    "seeds": ("ints", [0]),
    "repetitions": (_INT, 1),
    "output": (_STR, None),
    "env": ("block", None),
    "meta": ("block", None),
    "batch": ("block", None),
    "federated": ("block", None),
}

ENV_SCHEMA = {
    "d": (_INT, 5), "m": (_INT, 50), "T": (_INT, 100),
    "family": (_STR, "quadratic"), "domain": (_STR, "ball"),
    "radius": (_NUM, 1.0), "lipschitz": (_NUM, 1.0), "noise": (_NUM, 0.5),
    "center": (_VEC, None), "V": (_NUM, 0.1),
    "drift": (_STR, "none"), "phases": (_MAT, None), "phase_V": (_VEC, None),
    "step": (_NUM, 0.0), "deviations": (_VEC, None), "rotation_deg": (_NUM, 0.0),
    "dispersion": (_NUM, 0.1),
}

META_SCHEMA = {
    "dyn": (_STR, "ftl_mean"), "sim": (_STR, "eps_ewoo"), "mode": (_STR, OMD),
    "update_vector": (_STR, "optimal_action"), "epsilon": (_NUM, None), "zeta": (_NUM, None),
    "p": (_NUM, None), "v": (_NUM, None), "D": (_NUM, None), "dyn_rate": (_NUM, 1.0),
}

BATCH_SCHEMA = {
    "horizons": ("ints", [10, 100, 1000]),
    "n_test_tasks": (_INT, 200),
    "n_risk_samples": (_INT, None),
}

FED_SCHEMA = {
    "n_clients": (_INT, 100), "d": (_INT, 10), "dispersion": (_NUM, 0.5), "noise": (_NUM, 1.0),
    "samples_min": (_INT, 20), "samples_max": (_INT, 60), "rounds": (_INT, 200),
    "clients_per_round": (_INT, 10), "local_steps": (_INT, None), "batch_size": (_INT, 10),
    "mode": (_STR, "diag"), "distance": (_STR, "server"), "eta": (_NUM, 1.0),
    "epsilon": (_NUM, 0.05), "zeta": (_NUM, 0.05), "p": (_NUM, 1.0),
    "train_frac": (_NUM, 0.8), "meta_train_frac": (_NUM, 0.8), "refine_steps": (_INT, 10),
}


def _is_num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _type_ok(tag, value):
    if value is None:
        return True
    if tag == _NUM:
        return _is_num(value)
    if tag == _INT:
        return isinstance(value, int) and not isinstance(value, bool)
    if tag == _STR:
        return isinstance(value, str)
    if tag == _VEC:
        return isinstance(value, list) and all(_is_num(x) for x in value)
    if tag == _MAT:
        return isinstance(value, list) and all(_type_ok(_VEC, row) for row in value)
    if tag == "ints":
        return isinstance(value, list) and all(_type_ok(_INT, x) for x in value)
    if tag == "block":
        return isinstance(value, dict)
    return False


def _read_block(block, schema, prefix, errors):
    out = {name: default for name, (_, default) in schema.items()}
    if block is None:
        return out
    for key, value in block.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in schema:
            errors.append(f"{path}: unknown key")
            continue
        tag, default = schema[key]
        if (value is None and default is not None) or not _type_ok(tag, value):
            errors.append(f"{path}: expected {tag}, got {type(value).__name__}")
            continue
        out[key] = value
    return out


def _positive(block, names, prefix, errors, allow_zero=False):
    for name in names:
        value = block.get(name)
        if value is None:
            continue
        bad = value < 0 if allow_zero else value <= 0
        if bad:
            kind = "nonnegative" if allow_zero else "positive"
            errors.append(f"{prefix}.{name}: must be {kind}, got {value}")


def _choice(block, name, choices, prefix, errors):
    if block.get(name) is not None and block[name] not in choices:
        errors.append(f"{prefix}.{name}: must be one of {', '.join(choices)}, got {block[name]!r}")


@dataclass
class ExperimentConfig:
    experiment: str
    id: str
    seeds: List[int]
    repetitions: int
    output: Optional[str]
    env: Dict
    meta: Dict
    batch: Dict
    federated: Dict
    raw: Dict = field(default_factory=dict, repr=False)

    def env_spec(self, seed) -> EnvSpec:
        kind = "distributional" if self.experiment == "batch" else self.experiment
        return EnvSpec(kind=kind, seed=seed, **self.env)

    def meta_config(self, seed) -> MetaRunConfig:
        return MetaRunConfig(seed=seed, **self.meta)

    def fed_config(self, seed) -> FedConfig:
        return FedConfig(seed=seed, **self.federated)


def parse_config(text) -> ExperimentConfig:
    """Parse and validate a JSON config; raises :class:`ConfigError` listing every problem."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ConfigError([f"config is not UTF-8: {exc}"])
    try:
        raw = json.loads(text) if isinstance(text, str) else text
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config is not valid JSON: {exc}"])
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    errors: List[str] = []
    top = _read_block(raw, TOP_SCHEMA, "", errors)
    exp = top["experiment"]
    if exp is None:
        errors.append("experiment: required")
    elif exp not in EXPERIMENTS:
        errors.append(f"experiment: must be one of {', '.join(EXPERIMENTS)}, got {exp!r}")
    if not top["seeds"]:
        errors.append("seeds: need at least one seed")
    elif any(s < 0 for s in top["seeds"]):
        errors.append("seeds: must be nonnegative")
    elif len(set(top["seeds"])) != len(top["seeds"]):
        errors.append("seeds: must be distinct")
    if top["repetitions"] < 1:
        errors.append("repetitions: must be >= 1")

    env = _read_block(raw.get("env") if isinstance(raw.get("env"), dict) else None,
                      ENV_SCHEMA, "env", errors)
    meta = _read_block(raw.get("meta") if isinstance(raw.get("meta"), dict) else None,
                       META_SCHEMA, "meta", errors)
    batch = _read_block(raw.get("batch") if isinstance(raw.get("batch"), dict) else None,
                        BATCH_SCHEMA, "batch", errors)
    fed = _read_block(raw.get("federated") if isinstance(raw.get("federated"), dict) else None,
                      FED_SCHEMA, "federated", errors)

    _positive(env, ("d", "m", "T", "radius", "lipschitz"), "env", errors)
    _positive(env, ("noise", "V", "step", "dispersion"), "env", errors, allow_zero=True)
    _choice(env, "family", ("quadratic", "logistic"), "env", errors)
    _choice(env, "domain", ("ball", "box"), "env", errors)
    _choice(env, "drift", ("none", "phases", "random_walk"), "env", errors)
    _positive(meta, ("epsilon", "zeta", "p", "v", "D", "dyn_rate"), "meta", errors)
    _choice(meta, "dyn", DYN_STRATEGIES, "meta", errors)
    _choice(meta, "sim", SIM_STRATEGIES, "meta", errors)
    _choice(meta, "mode", (OMD, FTRL), "meta", errors)
    _choice(meta, "update_vector", UPDATE_VECTORS, "meta", errors)
    if meta.get("dyn_rate") is not None and meta["dyn_rate"] > 1:
        errors.append(f"meta.dyn_rate: must lie in (0, 1], got {meta['dyn_rate']}")
    if meta.get("sim") == "fixed" and meta.get("v") is None:
        errors.append("meta.v: required when meta.sim is 'fixed'")
    _positive(batch, ("n_test_tasks", "n_risk_samples"), "batch", errors)
    if batch["horizons"] is not None and (not batch["horizons"] or min(batch["horizons"]) < 1):
        errors.append("batch.horizons: need positive task counts")
    if not any(e.startswith("federated.") for e in errors):
        try:
            FedConfig(**fed)
        except ArubaError as exc:
            errors.extend(f"federated.{msg}" for msg in str(exc).split("; "))
    if not any(e.startswith("env.") for e in errors) and exp in EXPERIMENTS:
        kind = "distributional" if exp == "batch" else ("static" if exp == "federated" else exp)
        try:
            spec = EnvSpec(kind=kind, **env)
            if exp == "batch" and spec.family != "quadratic":
                errors.append("env.family: batch experiments use the quadratic family")
        except ArubaError as exc:
            errors.extend(f"env.{msg}" for msg in str(exc).split("; "))
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(experiment=exp, id=top["id"] or exp, seeds=list(top["seeds"]),
                            repetitions=top["repetitions"], output=top["output"], env=env,
                            meta=meta, batch=batch, federated=fed, raw=raw)


def derive_seed(seed: int, rep: int) -> int:
    """Seed for repetition ``rep``; repetition 0 uses ``seed`` itself."""
    if rep == 0:
        return seed
    return int(np.random.SeedSequence([seed, rep]).generate_state(1, np.uint32)[0])


# --- single runs ------------------------------------------------------------

def _meta_rows(run):
    rows = []
    for row in run.rows:
        t = row.t
        rows += [(t, "regret", row.regret), (t, "ub", row.bound), (t, "tar", row.tar),
                 (t, "rub", row.rub)]
        if not math.isnan(row.v):
            rows.append((t, "v", row.v))
        rows += [(t, "eta_min", row.eta_min), (t, "eta_mean", row.eta_mean),
                 (t, "eta_max", row.eta_max), (t, "phi_drift", row.phi_drift)]
    return rows


def _run_stream(config: ExperimentConfig, seed):
    spec = config.env_spec(seed)
    stream = generate(spec)
    rows = []
    if config.experiment == "dynamic":
        rows.append((0, "path_length", stream.path_length))
    run = run_meta_stream(config.meta_config(seed), stream)
    return rows + _meta_rows(run)


def _run_batch(config: ExperimentConfig, seed):
    env = generate(config.env_spec(seed))
    m = env.spec.m
    rows = [(0, "v_q", env.V_Q())]
    meta = config.meta_config(seed)
    for T in config.batch["horizons"]:
        run = run_meta_stream(meta, env.stream(T))
        phi, scale = online_to_batch(run)
        if run.scale_kind == "v":
            scale = scale / (env.lipschitz * math.sqrt(m))
        risk = transfer_risk_estimate(phi, scale, env, config.batch["n_test_tasks"],
                                      n_risk_samples=config.batch["n_risk_samples"])
        rows += [(T, "tar", run.tar), (T, "rub", run.rub), (T, "risk", risk.mean),
                 (T, "risk_stderr", risk.stderr), (T, "risk_excess", risk.excess)]
    return rows


def _run_federated(config: ExperimentConfig, seed):
    result = run_fedavg(config.fed_config(seed))
    rows = []
    for rec in result.state.ledger:
        rows += [(rec.round, "eta_min", rec.eta_min), (rec.round, "eta_mean", rec.eta_mean),
                 (rec.round, "eta_max", rec.eta_max), (rec.round, "payload_scalars", rec.uplink),
                 (rec.round, "payload_overhead", rec.uplink - rec.uplink_vanilla)]
    R = result.state.r
    rows += [(R, "pre_loss", result.pre_loss), (R, "post_loss", result.post_loss)]
    return rows


_RUNNERS = {"static": _run_stream, "dynamic": _run_stream, "geometry": _run_stream,
            "batch": _run_batch, "federated": _run_federated}


def run_unit(config: ExperimentConfig, seed, rep):
    """One (seed, repetition) run; returns ``(experiment id, seed, rows)``."""
    exp_id = config.id if config.repetitions == 1 else f"{config.id}#r{rep}"
    rows = _RUNNERS[config.experiment](config, derive_seed(seed, rep))
    return exp_id, seed, rows


def _run_unit_safe(args):
    config, seed, rep = args
    try:
        return run_unit(config, seed, rep), None
    except ArubaError as exc:
        return None, f"seed {seed} rep {rep}: {type(exc).__name__}: {exc}"


# --- output -------------------------------------------------------------------

def format_value(x) -> str:
    return repr(float(x))


def to_csv(results) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for exp_id, seed, rows in results:
        for t, metric, value in rows:
            writer.writerow((exp_id, seed, t, metric, format_value(value)))
    return buf.getvalue()


SUM_METRICS = ("payload_scalars", "payload_overhead", "regret")


def summarize_rows(rows):
    """Final value of each metric and sums of the additive ones."""
    final, totals = {}, {}
    for t, metric, value in rows:
        final[metric] = float(value)
        if metric in SUM_METRICS:
            totals[metric] = totals.get(metric, 0.0) + float(value)
    return {"final": final, "totals": totals}


def summarize(results, status="ok", errors=()):
    runs = [{"experiment": exp_id, "seed": seed, **summarize_rows(rows)}
            for exp_id, seed, rows in results]
    return {"status": status, "errors": list(errors), "runs": runs}


@dataclass
class RunOutcome:
    status: int
    csv_text: str
    summary: dict
    csv_path: Optional[str] = None
    json_path: Optional[str] = None


def run_experiment(config: ExperimentConfig, out=None, jobs=1) -> RunOutcome:
    """Run every (seed, repetition) unit and write ``<out>.csv`` and ``<out>.json``.

    Results are assembled in (seed, repetition) order whatever the worker count.
    On failure the completed units are still written and the summary is
    marked ``"partial"``.
    """
    units = [(config, seed, rep) for seed in config.seeds for rep in range(config.repetitions)]
    if jobs > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_unit_safe, units))
    else:
        outcomes = [_run_unit_safe(u) for u in units]
    results = [res for res, err in outcomes if res is not None]
    errors = [err for res, err in outcomes if err is not None]
    status = EXIT_RUN_FAILURE if errors else EXIT_OK
    csv_text = to_csv(results)
    summary = summarize(results, "partial" if errors else "ok", errors)
    outcome = RunOutcome(status, csv_text, summary)
    out = out if out is not None else config.output
    if out is not None:
        base = out[:-4] if out.endswith(".csv") else out
        parent = os.path.dirname(base)
        if parent:
            os.makedirs(parent, exist_ok=True)
        outcome.csv_path, outcome.json_path = base + ".csv", base + ".json"
        with open(outcome.csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(csv_text)
        with open(outcome.json_path, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return outcome


def read_csv(text):
    """Parse CSV text back into ``{(experiment, seed): [(t, metric, value), ...]}``."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {header}")
    out = {}
    for exp_id, seed, t, metric, value in reader:
        out.setdefault((exp_id, int(seed)), []).append((int(t), metric, float(value)))
    return out
