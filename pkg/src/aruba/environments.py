"""Synthetic task environments.

Every generator is a pure function of its :class:`EnvSpec` (seed included).
Quadratic tasks carry losses ``(w/2)||theta - a_i||^2`` whose targets are
re-centred so that the task's hindsight optimum is exactly its center; the
weight ``w`` is chosen so every loss is ``G``-Lipschitz on the domain.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import List, Optional

import numpy as np

from .core import (
    Domain,
    InvalidArgument,
    LogisticLoss,
    QuadraticLoss,
    Task,
    as_param,
    make_rng,
    unit_sphere,
)

KINDS = ("static", "dynamic", "geometry", "distributional")
FAMILIES = ("quadratic", "logistic")

# sub-stream keys
_CENTERS, _NOISE, _WALK, _TRAIN, _TEST = 0, 1, 2, 10, 11


@dataclass
class EnvSpec:
    kind: str = "static"
    d: int = 5
    m: int = 50
    T: int = 100
    family: str = "quadratic"
    domain: str = "ball"
    radius: float = 1.0            # ball radius or box half-width
    lipschitz: float = 1.0
    noise: float = 0.5             # within-task target noise (norm of each perturbation)
    center: Optional[List[float]] = None
    V: float = 0.1                 # static / per-phase deviation of task optima
    drift: str = "none"            # none | phases | random_walk
    phases: Optional[List[List[float]]] = None
    phase_V: Optional[List[float]] = None
    step: float = 0.0
    deviations: Optional[List[float]] = None
    rotation_deg: float = 0.0
    dispersion: float = 0.1
    seed: int = 0

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise InvalidArgument("; ".join(errors))

    def validate(self) -> List[str]:
        errors = []
        if self.kind not in KINDS:
            errors.append(f"kind: unknown environment kind {self.kind!r}")
        if self.family not in FAMILIES:
            errors.append(f"family: unknown loss family {self.family!r}")
        if self.domain not in ("ball", "box"):
            errors.append(f"domain: must be 'ball' or 'box', got {self.domain!r}")
        for name in ("d", "m", "T"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                errors.append(f"{name}: must be an integer >= 1")
        for name in ("radius", "lipschitz"):
            if not getattr(self, name) > 0:
                errors.append(f"{name}: must be positive")
        for name in ("noise", "V", "step", "dispersion"):
            if not getattr(self, name) >= 0:
                errors.append(f"{name}: must be nonnegative")
        if self.drift not in ("none", "phases", "random_walk"):
            errors.append(f"drift: unknown drift schedule {self.drift!r}")
        if self.deviations is not None and any(s < 0 for s in self.deviations):
            errors.append("deviations: must be nonnegative")
        return errors

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    def make_domain(self) -> Domain:
        c = np.zeros(self.d) if self.center is None else as_param(self.center)
        if self.domain == "ball":
            return Domain.ball(c, self.radius)
        return Domain.cube(self.d, self.radius, c)

    def phi_star(self) -> np.ndarray:
        return np.zeros(self.d) if self.center is None else as_param(self.center)


@dataclass
class TaskStream:
    tasks: List[Task]
    centers: np.ndarray          # per-task optimum of the summed loss (quadratic family)
    reference: np.ndarray        # comparator sequence psi_t
    domain: Domain
    lipschitz: float
    spec: EnvSpec
    path_length: float = 0.0
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.tasks)

    def __iter__(self):
        return iter(self.tasks)

    @property
    def m(self):
        return self.spec.m


def _margin_ok(domain: Domain, point, offset_norm, offset_inf=None) -> bool:
    """Is the l2 ball of radius ``offset_norm`` around ``point`` inside the domain?"""
    if domain.kind == "ball":
        return float(np.linalg.norm(point - domain.center)) + offset_norm <= domain.radius + 1e-12
    reach = offset_norm if offset_inf is None else offset_inf
    return bool(np.all(point - reach >= domain.lo - 1e-12) and np.all(point + reach <= domain.hi + 1e-12))


def quadratic_weight(domain: Domain, lipschitz: float, target_reach: float) -> float:
    """Weight making ``(w/2)||theta - a||^2`` ``lipschitz``-Lipschitz for targets
    within ``target_reach`` of a domain member."""
    return lipschitz / (domain.diameter + target_reach)


def _quadratic_task(center, rng, m, noise, weight, lipschitz):
    d = center.size
    xi = noise * unit_sphere(rng, d, m)
    xi -= xi.mean(axis=0)
    losses = [QuadraticLoss(center + xi[i], weight) for i in range(m)]
    return Task(losses, lipschitz, meta={"center": center})


def _logistic_task(center, rng, m, lipschitz):
    d = center.size
    x = lipschitz * unit_sphere(rng, d, m)
    p = 1.0 / (1.0 + np.exp(-(x @ center)))
    y = np.where(rng.uniform(size=m) < p, 1.0, -1.0)
    losses = [LogisticLoss(x[i], y[i]) for i in range(m)]
    return Task(losses, lipschitz, meta={"center": center})


def _make_tasks(spec: EnvSpec, domain: Domain, centers: np.ndarray) -> List[Task]:
    noise_rng = make_rng(spec.seed, _NOISE)
    if spec.family == "quadratic":
        w = quadratic_weight(domain, spec.lipschitz, 2.0 * spec.noise)
        return [_quadratic_task(c, noise_rng, spec.m, spec.noise, w, spec.lipschitz) for c in centers]
    return [_logistic_task(c, noise_rng, spec.m, spec.lipschitz) for c in centers]


def _path_length(reference: np.ndarray) -> float:
    if len(reference) < 2:
        return 0.0
    return float(np.sum(np.linalg.norm(np.diff(reference, axis=0), axis=1)))


def _reference_sequence(spec: EnvSpec, domain: Domain) -> np.ndarray:
    T, d = spec.T, spec.d
    base = spec.phi_star()
    if spec.drift == "none":
        return np.tile(base, (T, 1))
    if spec.drift == "phases":
        if not spec.phases:
            raise InvalidArgument("phases: drift schedule needs at least one phase center")
        phases = np.array([as_param(p) for p in spec.phases])
        if phases.shape[1] != d:
            raise InvalidArgument("phases: centers must have dimension d")
        idx = (np.arange(T) * len(phases)) // T
        return phases[idx]
    rng = make_rng(spec.seed, _WALK)
    steps = spec.step * unit_sphere(rng, d, T - 1) if T > 1 else np.zeros((0, d))
    return base + np.vstack([np.zeros((1, d)), np.cumsum(steps, axis=0)])


def _phase_deviation(spec: EnvSpec) -> np.ndarray:
    T = spec.T
    if spec.drift == "phases" and spec.phase_V is not None:
        if len(spec.phase_V) != len(spec.phases):
            raise InvalidArgument("phase_V: one deviation per phase")
        idx = (np.arange(T) * len(spec.phases)) // T
        return np.asarray(spec.phase_V, dtype=float)[idx]
    return np.full(T, spec.V)


def gen_static(spec: EnvSpec) -> TaskStream:
    """Task optima ``phi* + V u_t`` with ``u_t`` uniform on the unit sphere."""
    if spec.kind not in ("static", "dynamic"):
        raise InvalidArgument("gen_static needs a static spec")
    return _gen_centered(spec, np.tile(spec.phi_star(), (spec.T, 1)), np.full(spec.T, spec.V))


def gen_dynamic(spec: EnvSpec) -> TaskStream:
    """Task optima ``psi_t + V_t u_t`` around a drifting reference sequence."""
    domain = spec.make_domain()
    reference = _reference_sequence(spec, domain)
    return _gen_centered(spec, reference, _phase_deviation(spec))


def _gen_centered(spec, reference, deviation) -> TaskStream:
    domain = spec.make_domain()
    for t in range(spec.T):
        if not _margin_ok(domain, reference[t], deviation[t]):
            raise InvalidArgument(f"task {t + 1}: optima would leave the domain (V or path too large)")
    u = unit_sphere(make_rng(spec.seed, _CENTERS), spec.d, spec.T)
    centers = reference + deviation[:, None] * u
    tasks = _make_tasks(spec, domain, centers)
    return TaskStream(tasks, centers, reference, domain, spec.lipschitz, spec,
                      path_length=_path_length(reference))


def rotation_matrix(d: int, degrees: float, i: int = 0, j: int = 1) -> np.ndarray:
    R = np.eye(d)
    if d < 2 or degrees == 0.0:
        return R
    a = np.deg2rad(degrees)
    R[i, i], R[i, j], R[j, i], R[j, j] = np.cos(a), -np.sin(a), np.sin(a), np.cos(a)
    return R


def gen_geometry(spec: EnvSpec) -> TaskStream:
    """Task optima ``phi* + R diag(s) u_t``; ``u_t`` has unit per-coordinate second moment."""
    d = spec.d
    s = np.zeros(d) if spec.deviations is None else as_param(spec.deviations)
    if s.size != d:
        raise InvalidArgument("deviations: need one entry per coordinate")
    domain = spec.make_domain()
    R = rotation_matrix(d, spec.rotation_deg)
    phi_star = spec.phi_star()
    # |u_j| <= sqrt(d) on the scaled sphere
    reach = np.abs(R) @ (s * np.sqrt(d))
    if not _margin_ok(domain, phi_star, float(np.linalg.norm(s) * np.sqrt(d)), reach):
        raise InvalidArgument("deviations: task optima would leave the domain")
    u = np.sqrt(d) * unit_sphere(make_rng(spec.seed, _CENTERS), d, spec.T)
    centers = phi_star + (u * s) @ R.T
    tasks = _make_tasks(spec, domain, centers)
    reference = np.tile(phi_star, (spec.T, 1))
    return TaskStream(tasks, centers, reference, domain, spec.lipschitz, spec,
                      info={"rotation": R, "deviations": s})


class DistributionalEnv:
    """Task distribution Q: optimum ``mu + dispersion * u`` (unit sphere ``u``) and
    per-sample targets ``optimum + noise * z`` (unit sphere ``z``).

    The empirical risk minimizer of an ``m``-sample task has
    ``E||theta* - mu||^2 = dispersion^2 + noise^2 / m``.
    """

    def __init__(self, spec: EnvSpec):
        if spec.family != "quadratic":
            raise InvalidArgument("distributional environments use the quadratic family")
        self.spec = spec
        self.domain = spec.make_domain()
        self.mu = spec.phi_star()
        if not _margin_ok(self.domain, self.mu, spec.dispersion + spec.noise):
            raise InvalidArgument("dispersion/noise: targets would leave the domain")
        self.lipschitz = spec.lipschitz
        self.weight = quadratic_weight(self.domain, spec.lipschitz, spec.noise)

    def V_Q(self, m=None) -> float:
        m = self.spec.m if m is None else m
        return float(np.sqrt(self.spec.dispersion ** 2 + self.spec.noise ** 2 / m))

    def rng(self, split: str, *keys):
        key = {"train": _TRAIN, "test": _TEST}[split]
        return make_rng(self.spec.seed, key, *keys)

    def sample_optimum(self, rng) -> np.ndarray:
        return self.mu + self.spec.dispersion * unit_sphere(rng, self.spec.d)

    def sample_losses(self, optimum, rng, n) -> List[QuadraticLoss]:
        z = self.spec.noise * unit_sphere(rng, self.spec.d, n)
        return [QuadraticLoss(optimum + z[i], self.weight) for i in range(n)]

    def sample_task(self, rng, m=None):
        m = self.spec.m if m is None else m
        opt = self.sample_optimum(rng)
        return Task(self.sample_losses(opt, rng, m), self.lipschitz, meta={"optimum": opt}), opt

    def stream(self, T=None, split="train") -> TaskStream:
        T = self.spec.T if T is None else T
        rng = self.rng(split)
        tasks, opts = [], []
        for _ in range(T):
            task, opt = self.sample_task(rng)
            tasks.append(task)
            opts.append(opt)
        opts = np.array(opts)
        return TaskStream(tasks, opts, np.tile(self.mu, (T, 1)), self.domain, self.lipschitz,
                          self.spec, info={"V_Q": self.V_Q()})

    def population_risk(self, optimum, theta) -> float:
        diff = np.asarray(theta) - optimum
        return 0.5 * self.weight * (float(diff @ diff) + self.spec.noise ** 2)


def gen_distributional(spec: EnvSpec) -> DistributionalEnv:
    return DistributionalEnv(spec)


def generate(spec: EnvSpec):
    """Dispatch on ``spec.kind``."""
    if spec.kind == "static":
        return gen_static(spec)
    if spec.kind == "dynamic":
        return gen_dynamic(spec)
    if spec.kind == "geometry":
        return gen_geometry(spec)
    return gen_distributional(spec)
