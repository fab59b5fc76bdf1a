"""Within-task learners: lazy linearized OMD and full FTRL with a (phi, scale) pair.

The scale is a positive scalar learning rate, a positive per-coordinate
vector (diagonal ``H``), or a symmetric positive-definite matrix ``H``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import (
    EUCLIDEAN,
    Domain,
    Geometry,
    InvalidArgument,
    LinearLoss,
    QuadraticLoss,
    Task,
    UnsupportedError,
    _projected_gradient,
    as_param,
    bregman,
    hindsight_optimum,
    project,
    project_matrix,
)

OMD = "omd"
FTRL = "ftrl"


def scale_kind(scale) -> str:
    arr = np.asarray(scale, dtype=float)
    return {0: "scalar", 1: "diagonal", 2: "matrix"}.get(arr.ndim, "invalid")


def check_scale(scale, d: int):
    arr = np.asarray(scale, dtype=float)
    kind = scale_kind(arr)
    if kind == "invalid" or not np.all(np.isfinite(arr)):
        raise InvalidArgument("scale must be a finite scalar, vector or matrix")
    if kind == "scalar":
        if not arr > 0:
            raise InvalidArgument("learning rate must be positive")
    elif kind == "diagonal":
        if arr.shape != (d,) or np.any(arr <= 0):
            raise InvalidArgument("per-coordinate learning rates must be positive and length d")
    else:
        if arr.shape != (d, d) or not np.allclose(arr, arr.T, atol=1e-10 * max(1.0, np.abs(arr).max())):
            raise InvalidArgument("matrix scale must be a symmetric d x d matrix")
        if np.linalg.eigvalsh(0.5 * (arr + arr.T))[0] <= 0:
            raise InvalidArgument("matrix scale must be positive definite")
    return kind


@dataclass
class WithinTaskConfig:
    domain: Domain
    phi: np.ndarray
    scale: Union[float, np.ndarray]
    geometry: Geometry = EUCLIDEAN
    mode: str = OMD

    def __post_init__(self):
        self.phi = as_param(self.phi)
        if self.phi.size != self.domain.dim:
            raise InvalidArgument("initialization has the wrong dimension")
        if self.mode not in (OMD, FTRL):
            raise InvalidArgument(f"unknown within-task mode {self.mode!r}")
        self.kind = check_scale(self.scale, self.domain.dim)
        if self.kind == "scalar":
            self.scale = float(self.scale)
        else:
            self.scale = np.asarray(self.scale, dtype=float)
        if self.geometry.kind == "negative_entropy":
            if self.kind != "scalar" or self.domain.kind != "simplex":
                raise InvalidArgument("negative-entropy OMD needs a scalar rate on the simplex")
        if self.kind == "matrix":
            if self.domain.kind not in ("box", "unconstrained"):
                raise InvalidArgument("matrix-scaled OMD needs a box or unconstrained domain")
            self.scale = 0.5 * (self.scale + self.scale.T)
            self._precision = np.linalg.inv(self.scale)


@dataclass
class TaskTrace:
    iterates: np.ndarray        # (m, d): theta_{t,1..m}
    grads: np.ndarray           # (m, d)
    losses: np.ndarray          # (m,)
    theta_star: np.ndarray
    last_iterate: np.ndarray    # theta_{t,m+1}
    regret: float
    bound: float                # U_t with the declared Lipschitz bound (scalar path)
    bound_empirical: float      # U_t with observed gradients
    grad_sq: np.ndarray         # per-coordinate sum of squared gradients
    grad_sq_total: float

    @property
    def average_iterate(self) -> np.ndarray:
        return self.iterates.mean(axis=0)

    @property
    def m(self) -> int:
        return self.losses.size


def omd_iterate(config: WithinTaskConfig, gradient_sum) -> np.ndarray:
    """Lazy mirror-descent action for the accumulated gradient ``gradient_sum``."""
    phi = config.phi
    s = np.asarray(gradient_sum, dtype=float)
    if config.kind == "scalar":
        eta = config.scale
        if config.geometry.kind == "negative_entropy":
            logits = np.log(phi) - eta * s
            logits -= logits.max()
            w = np.exp(logits)
            return w / w.sum()
        return project(config.domain, phi - eta * s)
    if config.kind == "diagonal":
        eta = config.scale
        return project(config.domain, phi - eta * s, weight=1.0 / eta)
    return project_matrix(config.domain, phi - config.scale @ s, config._precision)


def _ftrl_iterate(config: WithinTaskConfig, seen) -> np.ndarray:
    """Minimizer of the proximal regularizer plus the full past losses."""
    if not seen:
        return config.phi.copy()
    if config.geometry.kind != "euclidean":
        if all(isinstance(loss, LinearLoss) for loss in seen):
            return omd_iterate(config, np.sum([loss.g for loss in seen], axis=0))
        raise UnsupportedError("full FTRL with nonlinear losses needs the Euclidean geometry")
    phi = config.phi
    if all(isinstance(loss, (QuadraticLoss, LinearLoss)) for loss in seen):
        curv = sum(loss.weight for loss in seen if isinstance(loss, QuadraticLoss))
        lin = np.zeros_like(phi)
        for loss in seen:
            if isinstance(loss, QuadraticLoss):
                lin += loss.weight * loss.target
            else:
                lin -= loss.g
        if config.kind == "scalar":
            prec = 1.0 / config.scale + curv
            return project(config.domain, (phi / config.scale + lin) / prec)
        if config.kind == "diagonal":
            prec = 1.0 / config.scale + curv
            return project(config.domain, (phi / config.scale + lin) / prec, weight=prec)
        prec = config._precision + curv * np.eye(phi.size)
        center = np.linalg.solve(prec, config._precision @ phi + lin)
        return project_matrix(config.domain, center, prec)

    if config.kind == "scalar":
        prec_vec = np.full_like(phi, 1.0 / config.scale)
    elif config.kind == "diagonal":
        prec_vec = 1.0 / config.scale
    else:
        prec_vec = None

    def fun_grad(x):
        diff = x - phi
        if prec_vec is not None:
            g = prec_vec * diff
        else:
            g = config._precision @ diff
        f = 0.5 * float(diff @ g) + sum(loss.value(x) for loss in seen)
        g = g + np.sum([loss.grad(x) for loss in seen], axis=0)
        return f, g

    x, _ = _projected_gradient(fun_grad, phi, config.domain, config.geometry, 1e-11, 100_000)
    return x


def dual_norm_sq(geometry: Geometry, g) -> float:
    g = np.asarray(g, dtype=float)
    if geometry.kind == "negative_entropy":
        return float(np.max(np.abs(g))) ** 2
    return float(g @ g)


def regret_upper_bound(geometry: Geometry, phi, scale, theta_star, grads=None,
                       lipschitz: Optional[float] = None, m: Optional[int] = None) -> float:
    """Data-dependent regret upper bound of OMD/FTRL at ``(phi, scale)``.

    Scalar rate: ``B(theta*||phi)/eta + eta * G^2 * m``; if ``lipschitz`` is
    omitted the observed ``sum ||grad||^2`` replaces ``G^2 m``.
    Diagonal or matrix ``H``: ``0.5 ||theta* - phi||^2_{H^-1} + sum ||grad||^2_H``.
    """
    phi = np.asarray(phi, dtype=float)
    theta_star = np.asarray(theta_star, dtype=float)
    kind = scale_kind(scale)
    if kind == "scalar":
        eta = float(scale)
        if not eta > 0:
            raise InvalidArgument("learning rate must be positive")
        div = bregman(geometry, theta_star, phi)
        if lipschitz is not None:
            if m is None:
                m = len(grads)
            return div / eta + eta * lipschitz ** 2 * m
        if grads is None:
            raise InvalidArgument("need gradients or a Lipschitz bound")
        return div / eta + eta * sum(dual_norm_sq(geometry, g) for g in grads)
    check_scale(scale, phi.size)
    if grads is None:
        raise InvalidArgument("matrix/diagonal bound needs the observed gradients")
    grads = np.asarray(grads, dtype=float).reshape(-1, phi.size)
    diff = theta_star - phi
    if kind == "diagonal":
        eta = np.asarray(scale, dtype=float)
        return 0.5 * float(np.sum(diff ** 2 / eta)) + float(np.sum(grads ** 2 @ eta))
    H = np.asarray(scale, dtype=float)
    first = 0.5 * float(diff @ np.linalg.solve(H, diff))
    second = float(np.einsum("ij,jk,ik->", grads, H, grads))
    return first + second


def run_task(config: WithinTaskConfig, task: Task, anchor=None,
             theta_star=None) -> TaskTrace:
    """Play the task's ``m`` rounds and record iterates, regret and its bound."""
    d = config.domain.dim
    m = task.m
    iterates = np.empty((m, d))
    grads = np.empty((m, d))
    values = np.empty(m)
    gsum = np.zeros(d)
    for i, loss in enumerate(task.losses):
        if config.mode == OMD:
            theta = omd_iterate(config, gsum)
        else:
            theta = _ftrl_iterate(config, task.losses[:i])
        g = loss.grad(theta)
        iterates[i] = theta
        grads[i] = g
        values[i] = loss.value(theta)
        gsum += g
    if config.mode == OMD:
        last = omd_iterate(config, gsum)
    else:
        last = _ftrl_iterate(config, task.losses)
    if theta_star is None:
        theta_star = hindsight_optimum(task, config.domain, config.geometry, anchor=anchor)
    regret = float(values.sum() - task.total(theta_star))
    if config.kind == "scalar":
        bound = regret_upper_bound(config.geometry, config.phi, config.scale, theta_star,
                                   lipschitz=task.lipschitz, m=m)
    else:
        bound = regret_upper_bound(config.geometry, config.phi, config.scale, theta_star, grads)
    bound_emp = regret_upper_bound(config.geometry, config.phi, config.scale, theta_star, grads)
    grad_sq = np.sum(grads ** 2, axis=0)
    return TaskTrace(iterates=iterates, grads=grads, losses=values, theta_star=theta_star,
                     last_iterate=last, regret=regret, bound=bound, bound_empirical=bound_emp,
                     grad_sq=grad_sq, grad_sq_total=float(grad_sq.sum()))
