"""Meta-learning loop over a task stream.

Each task is solved by a within-task learner started from ``(phi_t, scale_t)``;
the initialization learner and the scale learner are then updated from the
task's meta-update vector and observed gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .core import (
    EUCLIDEAN,
    ArubaError,
    Geometry,
    InvalidArgument,
    Task,
    UnsupportedError,
    as_param,
    bregman,
)
from .meta_init import STRATEGIES as DYN_STRATEGIES
from .meta_init import InitState
from .meta_scale import (
    SCALAR_STRATEGIES,
    DiagScaleState,
    IsotropicScaleState,
    MatrixScaleState,
    ScalarScaleState,
)
from .within_task import FTRL, OMD, WithinTaskConfig, run_task

UPDATE_VECTORS = ("optimal_action", "last_iterate", "average_iterate")
SIM_STRATEGIES = SCALAR_STRATEGIES + ("diag", "isotropic", "matrix")


class RunAborted(ArubaError):
    """A task failed mid-run; ``rows`` holds the ledger up to the failure."""

    def __init__(self, message, rows):
        super().__init__(message)
        self.rows = rows


@dataclass
class MetaRunConfig:
    dyn: str = "ftl_mean"
    sim: str = "eps_ewoo"
    mode: str = OMD
    update_vector: str = "optimal_action"
    T: Optional[int] = None
    geometry: Geometry = EUCLIDEAN
    epsilon: Optional[float] = None
    zeta: Optional[float] = None
    p: Optional[float] = None
    v: Optional[float] = None          # fixed strategy only
    D: Optional[float] = None          # bound on sqrt(Bregman); defaults from the domain
    dyn_rate: float = 1.0
    phi0: Optional[np.ndarray] = None
    seed: int = 0

    def __post_init__(self):
        if self.dyn not in DYN_STRATEGIES:
            raise InvalidArgument(f"dyn: unknown initialization strategy {self.dyn!r}")
        if self.sim not in SIM_STRATEGIES:
            raise InvalidArgument(f"sim: unknown scale strategy {self.sim!r}")
        if self.mode not in (OMD, FTRL):
            raise InvalidArgument(f"mode: unknown within-task mode {self.mode!r}")
        if self.update_vector not in UPDATE_VECTORS:
            raise InvalidArgument(f"update_vector: unknown choice {self.update_vector!r}")
        if self.dyn != "ftl_mean" and self.geometry.kind != "euclidean":
            raise UnsupportedError(f"{self.dyn} needs the Euclidean geometry")
        if self.sim not in SCALAR_STRATEGIES and self.geometry.kind != "euclidean":
            raise UnsupportedError(f"{self.sim} scale learning needs the Euclidean geometry")
        if self.T is not None and self.T < 1:
            raise InvalidArgument("T must be positive")
        for name in ("epsilon", "zeta", "p", "v", "D"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise InvalidArgument(f"{name}: must be positive")

    def scale_defaults(self, T: int, m: int):
        """``(epsilon, zeta, p)`` with the horizon-dependent defaults filled in."""
        if self.sim in SCALAR_STRATEGIES:
            eps = T ** -0.25 if self.epsilon is None else self.epsilon
            return eps, None, None
        if self.sim == "matrix":
            eps = T ** -0.125 if self.epsilon is None else self.epsilon
            zeta = math.sqrt(m) * T ** -0.125 if self.zeta is None else self.zeta
            return eps, zeta, None
        eps = 1.0 if self.epsilon is None else self.epsilon
        zeta = math.sqrt(m) if self.zeta is None else self.zeta
        p = 0.4 if self.p is None else self.p
        return eps, zeta, p


@dataclass
class LedgerRow:
    t: int
    regret: float
    bound: float
    tar: float
    rub: float
    v: float
    eta_min: float
    eta_mean: float
    eta_max: float
    phi_drift: float


@dataclass
class MetaRun:
    rows: List[LedgerRow]
    phis: List[np.ndarray]            # phi_t used on task t
    scales: list                      # v_t (scalar strategies), eta_t vector or H_t
    final_phi: np.ndarray
    final_scale: object
    scale_kind: str
    config: MetaRunConfig
    info: dict = field(default_factory=dict)

    @property
    def tar(self) -> float:
        return self.rows[-1].tar

    @property
    def rub(self) -> float:
        return self.rows[-1].rub


def _eta_summary(scale):
    arr = np.asarray(scale, dtype=float)
    if arr.ndim == 2:
        arr = np.linalg.eigvalsh(arr)
    return float(arr.min()), float(arr.mean()), float(arr.max())


def meta_update_vector(choice, trace):
    if choice == "optimal_action":
        return trace.theta_star
    if choice == "last_iterate":
        return trace.last_iterate
    return trace.average_iterate


class _ScaleLearner:
    """Uniform front for the scalar, diagonal, isotropic and matrix scale learners."""

    def __init__(self, config: MetaRunConfig, domain, T, m, G):
        self.sim = config.sim
        self.G, self.m = G, m
        eps, zeta, p = config.scale_defaults(T, m)
        if self.sim in SCALAR_STRATEGIES:
            self.kind = "scalar"
            D = config.D
            if D is None:
                max_div = domain.max_bregman(config.geometry)
                if not math.isfinite(max_div):
                    raise InvalidArgument("D: needed when the domain's Bregman diameter is unbounded")
                D = math.sqrt(max_div)
            self.state = ScalarScaleState(self.sim, epsilon=eps, D=D, G=G, m=m, v=config.v)
        elif self.sim == "diag":
            self.kind = "diagonal"
            self.state = DiagScaleState(domain.dim, eps, zeta, p)
        elif self.sim == "isotropic":
            self.kind = "scalar"
            self.state = IsotropicScaleState(domain.dim, eps, zeta, p)
        else:
            self.kind = "matrix"
            self.state = MatrixScaleState(domain.dim, eps, zeta)

    @property
    def scalar_v(self):
        return isinstance(self.state, ScalarScaleState)

    def current(self, G, m):
        """Returns ``(within-task scale, recorded meta-state)``."""
        if self.scalar_v:
            v = self.state.value()
            return v / (G * math.sqrt(m)), v
        if self.sim == "matrix":
            H = self.state.H()
            return H, H
        eta = self.state.eta()
        return eta, eta

    def update(self, geometry, phi, theta_hat, trace, sigma):
        if self.scalar_v:
            self.state.update(bregman(geometry, theta_hat, phi), sigma)
        else:
            self.state.accumulate(phi, theta_hat, trace.grads)


def _task_lipschitz(task: Task, default):
    G = task.lipschitz if task.lipschitz is not None else default
    if G is None or not G > 0:
        raise InvalidArgument("tasks need a positive declared Lipschitz bound")
    return float(G)


def run_meta_stream(config: MetaRunConfig, environment, domain=None) -> MetaRun:
    """Run the meta-learner over ``environment`` (a task stream or list of tasks)."""
    tasks = list(environment)
    domain = getattr(environment, "domain", domain)
    if domain is None:
        raise InvalidArgument("a domain is required")
    T = len(tasks) if config.T is None else config.T
    if T < 1 or len(tasks) < T:
        raise InvalidArgument("environment yields fewer tasks than the horizon")
    tasks = tasks[:T]
    default_G = getattr(environment, "lipschitz", None)
    G0 = _task_lipschitz(tasks[0], default_G)
    dyn = InitState(domain, config.dyn, config.geometry, phi=config.phi0, rate=config.dyn_rate)
    sim = _ScaleLearner(config, domain, T, tasks[0].m, G0)

    rows, phis, scales = [], [], []
    sum_r = sum_u = 0.0
    for t, task in enumerate(tasks, start=1):
        try:
            G = _task_lipschitz(task, default_G)
            m = task.m
            phi = dyn.phi.copy()
            scale, state = sim.current(G, m)
            wt = WithinTaskConfig(domain, phi, scale, config.geometry, config.mode)
            trace = run_task(wt, task, anchor=phi)
            theta_hat = meta_update_vector(config.update_vector, trace)
            sigma = G * math.sqrt(m)
            sim.update(config.geometry, phi, theta_hat, trace, sigma)
            new_phi = dyn.update(theta_hat, sigma)
        except ArubaError as exc:
            raise RunAborted(f"task {t} failed: {exc}", rows) from exc
        sum_r += trace.regret
        sum_u += trace.bound
        lo, mean, hi = _eta_summary(scale)
        rows.append(LedgerRow(t=t, regret=trace.regret, bound=trace.bound, tar=sum_r / t,
                              rub=sum_u / t, v=float(state) if sim.scalar_v else float("nan"),
                              eta_min=lo, eta_mean=mean, eta_max=hi,
                              phi_drift=float(np.linalg.norm(new_phi - phi))))
        phis.append(phi)
        scales.append(state)
    final_scale = sim.current(G0, tasks[0].m)[1]
    return MetaRun(rows, phis, scales, dyn.phi.copy(), final_scale,
                   "v" if sim.scalar_v else sim.kind, config)


def _default_descent(task, domain, phi, eta):
    trace = run_task(WithinTaskConfig(domain, phi, eta), task, anchor=phi)
    return trace


def aruba_practical(environment, descent_runner: Optional[Callable] = None, epsilon=1.0,
                    zeta=1.0, p=1.0, dyn="ftl_mean", domain=None, isotropic=False,
                    dyn_rate=1.0):
    """Per-coordinate rate learning around a batch descent method.

    ``descent_runner(task, domain, phi, eta)`` returns either a within-task
    trace (the default runner, per-coordinate lazy OMD) or a pair
    ``(theta_hat, grads)``. With a trace the last iterate is the meta-update
    vector and the ledger records regret and its bound. Only observed
    gradients are used; no Lipschitz bound is needed.

    Returns ``(phi_T, eta_T, ledger)`` with ``phi_T`` and ``eta_T`` the values
    that would be deployed on the next task.
    """
    tasks = list(environment)
    domain = getattr(environment, "domain", domain)
    if domain is None:
        raise InvalidArgument("a domain is required")
    runner = _default_descent if descent_runner is None else descent_runner
    cls = IsotropicScaleState if isotropic else DiagScaleState
    scale = cls(domain.dim, epsilon, zeta, p)
    init = InitState(domain, dyn, rate=dyn_rate)
    rows = []
    sum_r = sum_u = 0.0
    for t, task in enumerate(tasks, start=1):
        phi = init.phi.copy()
        eta = scale.eta()
        try:
            out = runner(task, domain, phi, eta)
        except ArubaError as exc:
            raise RunAborted(f"task {t} failed: {exc}", rows) from exc
        if isinstance(out, tuple):
            theta_hat, grads = as_param(out[0]), np.asarray(out[1], dtype=float)
            regret = bound = float("nan")
        else:
            theta_hat, grads = out.last_iterate, out.grads
            regret, bound = out.regret, out.bound_empirical
        scale.accumulate(phi, theta_hat, grads)
        new_phi = init.update(theta_hat)
        sum_r += regret
        sum_u += bound
        lo, mean, hi = _eta_summary(eta)
        rows.append(LedgerRow(t=t, regret=regret, bound=bound, tar=sum_r / t, rub=sum_u / t,
                              v=float("nan"), eta_min=lo, eta_mean=mean, eta_max=hi,
                              phi_drift=float(np.linalg.norm(new_phi - phi))))
    return init.phi.copy(), scale.eta(), rows


def aruba_plusplus_refine(b, g, c, grads) -> np.ndarray:
    """Rates used along a test task when the squared-gradient sum keeps growing.

    Row ``i`` is the rate before step ``i``; there are ``len(grads) + 1`` rows.
    """
    if not c > 0:
        raise InvalidArgument("c must be positive")
    b = np.asarray(b, dtype=float)
    g = np.array(g, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if grads.ndim == 1 and b.ndim == 1 and b.size > 1:
        grads = grads.reshape(1, -1)
    grads = grads.reshape(len(grads), *b.shape) if grads.size else np.zeros((0,) + b.shape)
    if np.any(b <= 0) or np.any(g <= 0):
        raise InvalidArgument("accumulators must be positive")
    out = [np.sqrt(b / g)]
    for grad in grads:
        g = g + c * grad ** 2
        out.append(np.sqrt(b / g))
    return np.array(out)


def online_to_batch(run=None, phis=None, scales=None):
    """Uniform average of the per-task initializations and scale states."""
    if run is not None:
        phis, scales = run.phis, run.scales
    if phis is None or len(phis) == 0:
        raise InvalidArgument("online-to-batch needs a non-empty run")
    phi_bar = np.mean(np.asarray(phis, dtype=float), axis=0)
    if scales is None:
        return phi_bar, None
    if len(scales) != len(phis):
        raise InvalidArgument("need one scale state per task")
    scale_bar = np.mean(np.asarray(scales, dtype=float), axis=0)
    if scale_bar.ndim == 0:
        scale_bar = float(scale_bar)
    return phi_bar, scale_bar


@dataclass
class TransferRisk:
    mean: float
    stderr: float
    excess: float
    excess_stderr: float
    n_tasks: int


def transfer_risk_estimate(phi, scale, environment, n_test_tasks, m=None, n_risk_samples=100,
                           seed_key=0, geometry: Geometry = EUCLIDEAN) -> TransferRisk:
    """Monte-Carlo transfer risk of the averaged within-task iterate.

    For each fresh test task the within-task learner runs from ``(phi, scale)``
    on ``m`` samples; its averaged iterate is scored on ``n_risk_samples``
    held-out losses. ``excess`` subtracts the task optimum's loss on the same
    samples. With ``n_risk_samples=None`` the environment's closed-form
    population risk is used instead.
    """
    if not isinstance(n_test_tasks, int) or n_test_tasks < 1:
        raise InvalidArgument("n_test_tasks must be a positive integer")
    domain = environment.domain
    phi = as_param(phi)
    risks, excess = np.empty(n_test_tasks), np.empty(n_test_tasks)
    for k in range(n_test_tasks):
        rng = environment.rng("test", seed_key, k)
        task, opt = environment.sample_task(rng, m)
        if task.m == 0:
            raise InvalidArgument("test tasks need at least one sample")
        trace = run_task(WithinTaskConfig(domain, phi, scale, geometry), task, theta_star=opt)
        theta_bar = trace.average_iterate
        if n_risk_samples is None:
            risks[k] = environment.population_risk(opt, theta_bar)
            excess[k] = risks[k] - environment.population_risk(opt, opt)
        else:
            held = environment.sample_losses(opt, rng, n_risk_samples)
            at_bar = np.mean([loss.value(theta_bar) for loss in held]) if held else 0.0
            at_opt = np.mean([loss.value(opt) for loss in held]) if held else 0.0
            risks[k] = at_bar
            excess[k] = at_bar - at_opt

    def _se(x):
        return float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0

    return TransferRisk(float(risks.mean()), _se(risks), float(excess.mean()), _se(excess),
                        n_test_tasks)

