"""Acceptance checks. Each ``criterion_*`` function runs one check at its
stated tolerance and returns a :class:`CriterionResult`."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List

import numpy as np
from scipy import optimize

from .core import (
    EUCLIDEAN,
    NEGATIVE_ENTROPY,
    Domain,
    LinearLoss,
    QuadraticLoss,
    Task,
    hindsight_optimum,
    make_rng,
    unit_sphere,
)
from .engine import (
    MetaRunConfig,
    aruba_practical,
    online_to_batch,
    run_meta_stream,
    transfer_risk_estimate,
)
from .environments import DistributionalEnv, EnvSpec, TaskStream, generate
from .federated import FedConfig, run_fedavg
from .meta_init import InitState
from .meta_scale import DiagScaleState, ScalarScaleState, riccati_H
from .within_task import WithinTaskConfig, run_task


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    values: Dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number}: {self.name} ({self.detail})"


def _timed(number, name):
    def wrap(fn):
        def run(*args, **kwargs):
            start = time.perf_counter()
            passed, detail, values = fn(*args, **kwargs)
            return CriterionResult(number, name, bool(passed), detail, values,
                                   time.perf_counter() - start)
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run
    return wrap


# --- 1 -----------------------------------------------------------------------

def _simplex_stream(seed, d=4, m=15, T=40):
    """Linear losses on the simplex with l_inf-bounded gradients."""
    rng = make_rng(seed, 30)
    bias = rng.uniform(-1, 1, d)
    tasks = []
    for _ in range(T):
        g = np.clip(bias + 0.5 * rng.uniform(-1, 1, (m, d)), -1, 1)
        tasks.append(Task([LinearLoss(row) for row in g], 1.0))
    domain = Domain.simplex(d)
    return TaskStream(tasks, np.zeros((T, d)), np.zeros((T, d)), domain, 1.0,
                      EnvSpec(d=d, m=m, T=T, seed=seed))


def soundness_configs():
    """(label, env kwargs or None for the simplex stream, meta kwargs)."""
    small = dict(d=4, m=15, T=40)
    box = dict(small, domain="box", radius=1.0)
    return [
        ("static ewoo", dict(small, kind="static"), dict(sim="eps_ewoo")),
        ("static ftl", dict(small, kind="static"), dict(sim="eps_ftl")),
        ("static fixed", dict(small, kind="static"), dict(sim="fixed", v=0.5)),
        ("static aogd", dict(small, kind="static"), dict(dyn="aogd")),
        ("static ogd", dict(small, kind="static"), dict(dyn="ogd_dynamic", dyn_rate=0.5)),
        ("static ftrl", dict(small, kind="static"), dict(mode="ftrl")),
        ("static box", dict(box, kind="static"), dict(sim="eps_ewoo")),
        ("static large V", dict(small, kind="static", V=0.4), dict(sim="eps_ewoo")),
        ("static noiseless", dict(small, kind="static", noise=0.0), dict(sim="eps_ftl")),
        ("static m=1", dict(small, kind="static", m=1), dict(sim="eps_ewoo")),
        ("static diag", dict(small, kind="static"), dict(sim="diag")),
        ("static isotropic", dict(small, kind="static"), dict(sim="isotropic")),
        ("static matrix", dict(box, kind="static"), dict(sim="matrix")),
        ("logistic", dict(small, kind="static", family="logistic", T=20), dict(sim="eps_ewoo")),
        ("dynamic phases", dict(small, kind="dynamic", radius=2.0, drift="phases",
                                phases=[[-1, 0, 0, 0], [1, 0, 0, 0]], V=0.05),
         dict(dyn="ogd_dynamic")),
        ("dynamic walk", dict(small, kind="dynamic", radius=2.0, drift="random_walk", step=0.02),
         dict(sim="eps_ewoo")),
        ("geometry diag", dict(box, kind="geometry", radius=3.0, deviations=[1, 0.01, 0.01, 0.01]),
         dict(sim="diag")),
        ("geometry matrix", dict(box, kind="geometry", radius=3.0, deviations=[1, 0.01, 0.01, 0.01],
                                 rotation_deg=45.0), dict(sim="matrix")),
        ("geometry ftrl matrix", dict(box, kind="geometry", radius=3.0,
                                      deviations=[1, 0.01, 0.01, 0.01]),
         dict(sim="matrix", mode="ftrl")),
        ("simplex entropy", None, dict(sim="eps_ewoo", D=2.0)),
        ("simplex entropy ftl", None, dict(sim="eps_ftl", D=2.0)),
    ]


@_timed(1, "bound soundness TAR_t <= RUB_t")
def criterion_bound_soundness(seeds=(0, 1, 2)):
    worst = -math.inf
    failures = []
    n_runs = 0
    for label, env_kw, meta_kw in soundness_configs():
        for seed in seeds:
            if env_kw is None:
                stream = _simplex_stream(seed)
                meta = MetaRunConfig(geometry=NEGATIVE_ENTROPY, **meta_kw)
            else:
                stream = generate(EnvSpec(seed=seed, **env_kw))
                meta = MetaRunConfig(**meta_kw)
            run = run_meta_stream(meta, stream)
            n_runs += 1
            for row in run.rows:
                excess = (row.tar - row.rub) / max(1.0, abs(row.rub))
                worst = max(worst, excess)
                if excess > 1e-9:
                    failures.append((label, seed, row.t))
    n_cfg = len(soundness_configs())
    detail = f"{n_cfg} configs x {len(seeds)} seeds, worst (TAR-RUB)/max(1,RUB) = {worst:.3e}"
    return not failures, detail, {"worst": worst, "failures": failures, "runs": n_runs}


# --- 2 -----------------------------------------------------------------------

def similarity_gap(D, seed, T=2000, d=5, m=50, V=0.1, G=1.0):
    """Final TAR of the learned initialization and rate vs. the fixed diameter-tuned rate."""
    spec = EnvSpec(kind="static", d=d, m=m, T=T, radius=D / 2.0, V=V, lipschitz=G, seed=seed)
    stream = generate(spec)
    learned = run_meta_stream(MetaRunConfig(dyn="ftl_mean", sim="eps_ewoo"), stream)
    # eta = D / (G sqrt(2m)) is v = D / sqrt(2)
    base = run_meta_stream(MetaRunConfig(sim="fixed", v=D / math.sqrt(2.0)), stream)
    return learned.tar, base.tar


@_timed(2, "task-similarity adaptation")
def criterion_similarity(seeds=(0, 1, 2), diameters=(1.0, 2.0, 4.0), T=2000):
    gaps = {}
    ok = True
    for seed in seeds:
        rel = []
        for D in diameters:
            tar, base = similarity_gap(D, seed, T=T)
            rel.append(1.0 - tar / base)
            gaps[(seed, D)] = (tar, base)
        at2 = rel[list(diameters).index(2.0)]
        ok &= at2 >= 0.30 and all(b > a for a, b in zip(rel, rel[1:]))
        gaps[seed] = rel
    detail = "relative gap by D: " + "; ".join(
        f"seed {s}: " + ", ".join(f"{g:.3f}" for g in gaps[s]) for s in seeds)
    return ok, detail, gaps


# --- 3 -----------------------------------------------------------------------

def scale_regret_curve(strategy, B, epsilon, D=1.0, checkpoints=(100, 200, 500, 1000, 2000, 5000),
                       grid_size=10_000):
    """Surrogate regret of a scale learner against the best grid value at each checkpoint.

    Returns ``(regret, per_round)`` where ``per_round`` is the best fixed
    value's average loss, the scale below which regret is indistinguishable
    from a constant.
    """
    state = ScalarScaleState(strategy, epsilon=epsilon, D=D, G=1.0, m=1)
    lo, hi = state.interval
    grid = np.linspace(lo, hi, grid_size)
    cum_grid = np.zeros(grid_size)
    cum_alg = 0.0
    out, per_round = [], []
    cps = set(checkpoints)
    for t, b in enumerate(B, start=1):
        v = state.value()
        a = b * b + epsilon ** 2
        cum_alg += a / v + v
        cum_grid += a / grid + grid
        state.update(b * b)
        if t in cps:
            out.append(cum_alg - cum_grid.min())
            per_round.append(cum_grid.min() / t)
    return np.array(out), np.array(per_round)


def loglog_slope(T, regret, floor):
    """Least-squares slope of ``log max(regret, floor)`` against ``log T``."""
    T = np.asarray(T, dtype=float)
    regret = np.maximum(np.asarray(regret, dtype=float), floor)
    return float(np.polyfit(np.log(T), np.log(regret), 1)[0])


@_timed(3, "scale-learner regret sublinearity")
def criterion_scale_regret(n_sequences=5, T=5000, D=1.0):
    checkpoints = (100, 200, 500, 1000, 2000, 5000)
    epsilon = T ** -0.25
    slopes = {"eps_ewoo": [], "eps_ftl": []}
    for k in range(n_sequences):
        rng = make_rng(k, 31)
        a, b = rng.uniform(0.5, 3.0, 2)
        B = D * rng.beta(a, b, T)
        for strategy in slopes:
            curve, per_round = scale_regret_curve(strategy, B, epsilon, D, checkpoints)
            slopes[strategy].append(loglog_slope(checkpoints, curve, per_round))
    ok = max(slopes["eps_ewoo"]) < 0.8 and max(slopes["eps_ftl"]) < 0.9
    detail = (f"max slope ewoo {max(slopes['eps_ewoo']):.3f} (<0.8), "
              f"ftl {max(slopes['eps_ftl']):.3f} (<0.9)")
    return ok, detail, slopes


# --- 4 -----------------------------------------------------------------------

def drift_tars(seed, drift, d=5, m=50, T=1000, V=0.05, jump=2.0):
    half = jump / 2.0
    phases = [[-half] + [0.0] * (d - 1), [half] + [0.0] * (d - 1)] if drift else None
    spec = EnvSpec(kind="dynamic", d=d, m=m, T=T, radius=2.0, V=V,
                   drift="phases" if drift else "none", phases=phases, seed=seed)
    stream = generate(spec)
    ftl = run_meta_stream(MetaRunConfig(dyn="ftl_mean"), stream).tar
    ogd = run_meta_stream(MetaRunConfig(dyn="ogd_dynamic"), stream).tar
    return ftl, ogd, stream.path_length


@_timed(4, "dynamic environments")
def criterion_dynamic(seeds=(0, 1, 2)):
    ratios_drift, ratios_static = [], []
    for seed in seeds:
        ftl, ogd, _ = drift_tars(seed, True)
        ratios_drift.append(ogd / ftl)
        ftl, ogd, _ = drift_tars(seed, False)
        ratios_static.append(ogd / ftl)
    ok = max(ratios_drift) <= 0.60 and min(ratios_static) >= 0.95
    detail = (f"ogd/ftl with drift max {max(ratios_drift):.3f} (<=0.6), "
              f"without drift min {min(ratios_static):.3f} (>=0.95)")
    return ok, detail, {"drift": ratios_drift, "static": ratios_static}


# --- 5 -----------------------------------------------------------------------

def anisotropic_eta(seed=0, d=10, m=20, T=500, epsilon=0.05, zeta=0.05, p=1.0):
    spec = EnvSpec(kind="geometry", d=d, m=m, T=T, domain="box", radius=5.0,
                   deviations=[1.0] + [1e-3] * (d - 1), seed=seed)
    _, eta, _ = aruba_practical(generate(spec), epsilon=epsilon, zeta=zeta, p=p)
    return eta


def brute_force_rate(b_terms, g_terms):
    """Minimizer of ``sum_s b_s / x + g_s x`` over ``x > 0`` by bracketing the derivative."""
    B, G = float(np.sum(b_terms)), float(np.sum(g_terms))

    def deriv(x):
        return G - B / (x * x)

    lo, hi = 1e-12, 1.0
    while deriv(hi) < 0:
        hi *= 2.0
    while deriv(lo) > 0:
        lo /= 2.0
    return optimize.brentq(deriv, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def diag_closed_form_error(seed=0, d=6, T=30, m=8, epsilon=0.3, zeta=1.7, p=0.4):
    rng = make_rng(seed, 32)
    state = DiagScaleState(d, epsilon, zeta, p)
    b_terms = [np.full(d, epsilon ** 2)]
    g_terms = [np.full(d, zeta ** 2)]
    worst = 0.0
    for t in range(1, T + 1):
        phi, theta = rng.normal(size=d), rng.normal(size=d)
        grads = rng.normal(size=(m, d)) * rng.uniform(0.1, 2.0, d)
        state.accumulate(phi, theta, grads)
        decay = (t + 1) ** -p
        b_terms.append(epsilon ** 2 * decay + 0.5 * (phi - theta) ** 2)
        g_terms.append(zeta ** 2 * decay + np.sum(grads ** 2, axis=0))
        eta = state.eta()
        bt, gt = np.array(b_terms), np.array(g_terms)
        for j in range(d):
            x = brute_force_rate(bt[:, j], gt[:, j])
            worst = max(worst, abs(x - eta[j]) / x)
    return worst


@_timed(5, "per-coordinate rates on anisotropic tasks")
def criterion_diagonal():
    eta = anisotropic_eta()
    ratio = float(eta[0] / np.median(eta[1:]))
    err = max(diag_closed_form_error(seed) for seed in range(3))
    ok = ratio >= 10.0 and err <= 1e-8
    detail = f"eta_1/median = {ratio:.2f} (>=10), closed form vs brute force rel err {err:.2e}"
    return ok, detail, {"ratio": ratio, "error": err}


# --- 6 -----------------------------------------------------------------------

def random_spd(rng, d, spread=3.0):
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    lam = np.exp(rng.uniform(-spread, spread, d))
    return (Q * lam) @ Q.T


def riccati_residuals(n_pairs=100, max_d=16, seed=0):
    rng = make_rng(seed, 33)
    out = []
    for _ in range(n_pairs):
        d = int(rng.integers(1, max_d + 1))
        B2, G2 = random_spd(rng, d), random_spd(rng, d)
        H = riccati_H(B2, G2, tol=np.inf)
        out.append(np.linalg.norm(H @ G2 @ H - B2) / np.linalg.norm(B2))
    return np.array(out)


def rotated_rubs(seed, d=8, m=20, T=500):
    spec = EnvSpec(kind="geometry", d=d, m=m, T=T, domain="box", radius=5.0,
                   deviations=[1.0] + [1e-3] * (d - 1), rotation_deg=45.0, seed=seed)
    stream = generate(spec)
    mat = run_meta_stream(MetaRunConfig(sim="matrix"), stream)
    diag = run_meta_stream(MetaRunConfig(sim="diag"), stream)
    return mat.rub, diag.rub, mat.final_scale


@_timed(6, "full-matrix rates")
def criterion_matrix(seeds=(0, 1, 2)):
    resid = riccati_residuals()
    rubs = [rotated_rubs(seed)[:2] for seed in seeds]
    ok = resid.max() <= 1e-8 and all(mat <= diag for mat, diag in rubs)
    detail = (f"max Riccati residual {resid.max():.2e} (<=1e-8), RUB matrix/diag "
              + ", ".join(f"{a:.3f}/{b:.3f}" for a, b in rubs))
    return ok, detail, {"residual": float(resid.max()), "rubs": rubs}


# --- 7 -----------------------------------------------------------------------

def batch_env(seed, d=5, m=25, V_Q=0.1, dispersion=0.05):
    noise = math.sqrt((V_Q ** 2 - dispersion ** 2) * m)
    return DistributionalEnv(EnvSpec(kind="distributional", d=d, m=m, radius=1.0,
                                     center=[0.4] + [0.0] * (d - 1), dispersion=dispersion,
                                     noise=noise, seed=seed))


def batch_risks(env, horizons=(10, 100, 1000), n_test_tasks=200):
    m = env.spec.m
    out = []
    for T in horizons:
        run = run_meta_stream(MetaRunConfig(), env.stream(T))
        phi, v = online_to_batch(run)
        eta = v / (env.lipschitz * math.sqrt(m))
        out.append(transfer_risk_estimate(phi, eta, env, n_test_tasks, n_risk_samples=None))
    oracle_eta = env.V_Q() / (math.sqrt(2.0) * env.lipschitz * math.sqrt(m))
    oracle = transfer_risk_estimate(env.mu, oracle_eta, env, n_test_tasks, n_risk_samples=None)
    return out, oracle


@_timed(7, "online-to-batch transfer risk")
def criterion_batch(seeds=(0, 1, 2)):
    ok = True
    parts = []
    values = {}
    for seed in seeds:
        risks, oracle = batch_risks(batch_env(seed))
        means = [r.mean for r in risks]
        decreasing = all(b < a for a, b in zip(means, means[1:]))
        ratio = risks[-1].excess / oracle.excess
        ok &= decreasing and ratio <= 3.0
        values[seed] = {"risk": means, "excess": [r.excess for r in risks],
                        "oracle_excess": oracle.excess}
        parts.append(f"seed {seed}: {'decreasing' if decreasing else 'NOT decreasing'}, "
                     f"excess/oracle {ratio:.2f}")
    return ok, "; ".join(parts) + " (<=3)", values


# --- 8 -----------------------------------------------------------------------

ETA_GRID = (0.01, 0.03, 0.1, 0.3, 1.0)


def federated_comparison(seeds=(0, 1, 2), grid=ETA_GRID, **overrides):
    learned = np.mean([run_fedavg(FedConfig(seed=s, **overrides)).post_loss for s in seeds])
    fixed = {eta: float(np.mean([run_fedavg(FedConfig(seed=s, mode="vanilla", eta=eta,
                                                      **overrides)).post_loss for s in seeds]))
             for eta in grid}
    return float(learned), fixed


def payload_overheads(seed=0, rounds=20, d=10):
    out = {}
    for mode in ("isotropic", "diag"):
        res = run_fedavg(FedConfig(seed=seed, mode=mode, rounds=rounds, d=d))
        out[mode] = [(rec.uplink - rec.uplink_vanilla, len(rec.clients)) for rec in res.state.ledger]
    return out


@_timed(8, "federated rate learning")
def criterion_federated(seeds=(0, 1, 2)):
    learned, fixed = federated_comparison(seeds)
    best = min(fixed.values())
    ratio = learned / best
    d = 10
    over = payload_overheads(d=d)
    exact = all(o == 2 * n for o, n in over["isotropic"]) and all(o == d * n for o, n in over["diag"])
    ok = ratio <= 1.10 and exact
    detail = (f"post-refine loss learned/best-grid {ratio:.3f} (<=1.10); payload overhead "
              f"{'exact' if exact else 'WRONG'} (2 vs d={d} per client)")
    return ok, detail, {"ratio": ratio, "learned": learned, "fixed": fixed, "payload_exact": exact}


# --- 9 -----------------------------------------------------------------------

def omd_vs_ogd_error(seed=0, d=5, m=40, eta=0.07):
    rng = make_rng(seed, 34)
    task = Task([QuadraticLoss(rng.normal(size=d), rng.uniform(0.2, 1.0)) for _ in range(m)], 10.0)
    phi = rng.normal(size=d)
    trace = run_task(WithinTaskConfig(Domain.unconstrained(d), phi, eta), task,
                     theta_star=np.zeros(d))
    theta = phi.copy()
    worst = 0.0
    for i, loss in enumerate(task.losses):
        worst = max(worst, float(np.max(np.abs(trace.iterates[i] - theta))))
        theta = theta - eta * loss.grad(theta)
    return max(worst, float(np.max(np.abs(trace.last_iterate - theta))))


def ftl_mean_errors(seed=0, d=4, n=12):
    rng = make_rng(seed, 35)
    sigma = rng.uniform(0.5, 2.0, n)
    # Euclidean, interior of a large ball
    pts = rng.normal(size=(n, d)) * 0.3
    state = InitState(Domain.ball(np.zeros(d), 10.0))
    for x, s in zip(pts, sigma):
        phi = state.update(x, s)
    res = optimize.minimize(lambda y: float(np.sum(sigma * 0.5 * np.sum((pts - y) ** 2, axis=1))),
                            np.zeros(d), method="BFGS", options={"gtol": 1e-12})
    err_euc = float(np.max(np.abs(res.x - phi)))
    # negative entropy on the simplex, softmax parametrization
    pts = rng.dirichlet(np.ones(d), n)
    state = InitState(Domain.simplex(d), geometry=NEGATIVE_ENTROPY)
    for x, s in zip(pts, sigma):
        phi = state.update(x, s)

    def kl_sum(z):
        y = np.exp(z - z.max())
        y /= y.sum()
        return float(np.sum(sigma * np.sum(pts * np.log(pts / y), axis=1)))

    res = optimize.minimize(kl_sum, np.zeros(d), method="BFGS", options={"gtol": 1e-12})
    y = np.exp(res.x - res.x.max())
    y /= y.sum()
    return err_euc, float(np.max(np.abs(y - phi)))


def ewoo_quadrature_error(seed=0, n_tasks=25, D=1.0, epsilon=0.3, m=10, n_points=1_000_000):
    rng = make_rng(seed, 36)
    state = ScalarScaleState("eps_ewoo", epsilon=epsilon, D=D, G=1.0, m=m)
    for b in D * rng.uniform(size=n_tasks):
        state.update(b * b)
    lo, hi = state.interval
    v = np.linspace(lo, hi, n_points)
    logw = -state.gamma * (state.A / v + state.S * v)
    w = np.exp(logw - logw.max())
    ref = np.trapezoid(v * w, v) / np.trapezoid(w, v)
    return abs(state.value() - ref)


def hindsight_errors(seed=0, d=5, m=30):
    rng = make_rng(seed, 37)
    worst = 0.0
    for domain in (Domain.ball(np.zeros(d), 10.0), Domain.cube(d, 0.2)):
        targets = rng.normal(size=(m, d))
        weights = rng.uniform(0.2, 2.0, m)
        task = Task([QuadraticLoss(a, w) for a, w in zip(targets, weights)], 100.0)
        closed = domain.project(weights @ targets / weights.sum())
        worst = max(worst, float(np.max(np.abs(hindsight_optimum(task, domain) - closed))))
    return worst


@_timed(9, "oracle equivalences")
def criterion_oracles(seeds=(0, 1, 2)):
    omd = max(omd_vs_ogd_error(s) for s in seeds)
    ftl = [ftl_mean_errors(s) for s in seeds]
    ftl_e, ftl_k = max(e for e, _ in ftl), max(k for _, k in ftl)
    ewoo = max(ewoo_quadrature_error(s) for s in seeds)
    hind = max(hindsight_errors(s) for s in seeds)
    ok = omd <= 1e-12 and ftl_e <= 1e-6 and ftl_k <= 1e-6 and ewoo <= 1e-8 and hind <= 1e-10
    detail = (f"OMD/OGD {omd:.1e}, ftl_mean {ftl_e:.1e}/{ftl_k:.1e}, EWOO {ewoo:.1e}, "
              f"hindsight {hind:.1e}")
    return ok, detail, {"omd": omd, "ftl": (ftl_e, ftl_k), "ewoo": ewoo, "hindsight": hind}


# --- 10 ----------------------------------------------------------------------

def determinism_configs():
    return [
        {"experiment": "static", "seeds": [0, 1], "env": {"T": 40, "m": 10}},
        {"experiment": "dynamic", "seeds": [0], "env": {"T": 40, "m": 10, "radius": 2.0,
                                                         "drift": "random_walk", "step": 0.02}},
        {"experiment": "geometry", "seeds": [0], "env": {"T": 30, "m": 10, "domain": "box",
                                                          "radius": 3.0, "rotation_deg": 45.0,
                                                          "deviations": [1, 0.1, 0.1, 0.1, 0.1]},
         "meta": {"sim": "matrix"}},
        {"experiment": "batch", "seeds": [0], "env": {"m": 10},
         "batch": {"horizons": [5, 20], "n_test_tasks": 10}},
        {"experiment": "federated", "seeds": [3], "repetitions": 2,
         "federated": {"n_clients": 20, "rounds": 10, "clients_per_round": 5}},
    ]


@_timed(10, "determinism")
def criterion_determinism():
    from .harness import parse_config, run_experiment

    same = []
    for cfg in determinism_configs():
        config = parse_config(cfg)
        a = run_experiment(config).csv_text.encode("utf-8")
        b = run_experiment(config).csv_text.encode("utf-8")
        same.append(a == b)
    return all(same), f"{sum(same)}/{len(same)} experiments byte-identical on rerun", {"same": same}


CRITERIA: List[Callable[[], CriterionResult]] = [
    criterion_bound_soundness,
    criterion_similarity,
    criterion_scale_regret,
    criterion_dynamic,
    criterion_diagonal,
    criterion_matrix,
    criterion_batch,
    criterion_federated,
    criterion_oracles,
    criterion_determinism,
]


def run_suite(only=None, report=None) -> List[CriterionResult]:
    """Run the selected criteria (1-based numbers); ``report`` is called with each result."""
    results = []
    for number, fn in enumerate(CRITERIA, start=1):
        if only and number not in only:
            continue
        res = fn()
        results.append(res)
        if report is not None:
            report(res)
    return results
