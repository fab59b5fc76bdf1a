"""Domains, Bregman geometries, loss oracles and the hindsight-optimum oracle.

Parameter vectors are plain float64 numpy arrays throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize
from scipy.special import xlogy


class ArubaError(Exception):
    """Base class for errors raised by this package."""


class InvalidArgument(ArubaError, ValueError):
    pass


class BoundaryError(InvalidArgument):
    pass


class UnsupportedError(ArubaError):
    pass


class ConvergenceError(ArubaError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NumericError(ArubaError, ArithmeticError):
    pass


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based generator for the stream ``keys`` under a 64-bit ``seed``.

    Distinct key tuples give independent streams; the same tuple always gives
    the same stream.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def as_param(x) -> np.ndarray:
    arr = np.array(x, dtype=float).reshape(-1)
    if arr.size == 0:
        raise InvalidArgument("parameter vector must have length >= 1")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument("parameter vector has non-finite entries")
    return arr


def unit_sphere(rng: np.random.Generator, d: int, n: Optional[int] = None) -> np.ndarray:
    """Uniform draws from the unit sphere in R^d."""
    shape = (d,) if n is None else (n, d)
    z = rng.standard_normal(shape)
    norms = np.linalg.norm(z, axis=-1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return z / norms


# ---------------------------------------------------------------------------
# Geometry

@dataclass(frozen=True)
class Geometry:
    """A 1-strongly-convex regularizer and its Bregman divergence."""

    kind: str

    def __post_init__(self):
        if self.kind not in ("euclidean", "negative_entropy"):
            raise InvalidArgument(f"unknown geometry {self.kind!r}")

    def regularizer(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "euclidean":
            return 0.5 * float(theta @ theta)
        _check_positive(theta)
        return float(np.sum(theta * np.log(theta)))

    def bregman(self, theta, phi) -> float:
        return bregman(self, theta, phi)


EUCLIDEAN = Geometry("euclidean")
NEGATIVE_ENTROPY = Geometry("negative_entropy")


def _check_positive(x):
    if np.any(x <= 0.0):
        raise BoundaryError("negative-entropy geometry needs strictly positive coordinates")


def bregman(geometry: Geometry, theta, phi) -> float:
    """Bregman divergence of the geometry's regularizer, ``B(theta || phi)``."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(phi))):
        raise InvalidArgument("bregman: non-finite input")
    if theta.shape != phi.shape:
        raise InvalidArgument("bregman: dimension mismatch")
    if geometry.kind == "euclidean":
        diff = theta - phi
        return 0.5 * float(diff @ diff)
    if np.any(theta < 0.0):
        raise BoundaryError("negative-entropy geometry needs nonnegative coordinates")
    _check_positive(phi)
    # generalized KL with 0 log 0 = 0; reduces to KL on the simplex
    val = float(np.sum(xlogy(theta, theta) - xlogy(theta, phi) - theta + phi))
    return max(val, 0.0)


# ---------------------------------------------------------------------------
# Domains

@dataclass(frozen=True, eq=False)
class Domain:
    """Convex action set: ``ball``, ``box``, ``simplex`` or ``unconstrained``."""

    kind: str
    dim: int
    center: Optional[np.ndarray] = None
    radius: float = 0.0
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None

    @classmethod
    def ball(cls, center, radius):
        center = as_param(center)
        if not radius > 0:
            raise InvalidArgument("ball radius must be positive")
        return cls("ball", center.size, center=center, radius=float(radius))

    @classmethod
    def box(cls, lo, hi):
        lo, hi = as_param(lo), as_param(hi)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise InvalidArgument("box needs lo <= hi of equal length")
        return cls("box", lo.size, lo=lo, hi=hi)

    @classmethod
    def cube(cls, d, half_width, center=0.0):
        c = np.broadcast_to(np.asarray(center, dtype=float), (d,))
        return cls.box(c - half_width, c + half_width)

    @classmethod
    def simplex(cls, d):
        return cls("simplex", int(d))

    @classmethod
    def unconstrained(cls, d):
        return cls("unconstrained", int(d))

    @property
    def diameter(self) -> float:
        """l2 diameter."""
        if self.kind == "ball":
            return 2.0 * self.radius
        if self.kind == "box":
            return float(np.linalg.norm(self.hi - self.lo))
        if self.kind == "simplex":
            return float(np.sqrt(2.0)) if self.dim > 1 else 0.0
        return float("inf")

    def max_bregman(self, geometry: Geometry = EUCLIDEAN) -> float:
        """Upper bound on ``B(theta || phi)`` over pairs of members."""
        if geometry.kind == "euclidean":
            return 0.5 * self.diameter ** 2
        return float("inf")

    def default_init(self) -> np.ndarray:
        if self.kind == "ball":
            return self.center.copy()
        if self.kind == "box":
            return 0.5 * (self.lo + self.hi)
        if self.kind == "simplex":
            return np.full(self.dim, 1.0 / self.dim)
        return np.zeros(self.dim)

    def max_distance_from(self, point) -> float:
        """max over members x of ||x - point||_2."""
        point = np.asarray(point, dtype=float)
        if self.kind == "ball":
            return float(np.linalg.norm(point - self.center)) + self.radius
        if self.kind == "box":
            far = np.maximum(np.abs(point - self.lo), np.abs(point - self.hi))
            return float(np.linalg.norm(far))
        if self.kind == "simplex":
            return float(max(np.linalg.norm(point - e) for e in np.eye(self.dim)))
        return float("inf")

    def contains(self, x, tol=1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            return False
        if self.kind == "ball":
            return float(np.linalg.norm(x - self.center)) <= self.radius + tol
        if self.kind == "box":
            return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))
        if self.kind == "simplex":
            return bool(np.all(x >= -tol) and abs(x.sum() - 1.0) <= tol * max(1, self.dim))
        return True

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Random members (not uniform for every kind; used for probing)."""
        if self.kind == "ball":
            u = unit_sphere(rng, self.dim, n)
            r = self.radius * rng.uniform(size=(n, 1)) ** (1.0 / self.dim)
            return self.center + r * u
        if self.kind == "box":
            return rng.uniform(self.lo, self.hi, size=(n, self.dim))
        if self.kind == "simplex":
            return rng.dirichlet(np.ones(self.dim), size=n)
        return rng.standard_normal((n, self.dim))

    def project(self, theta, geometry=EUCLIDEAN, weight=None):
        return project(self, theta, geometry=geometry, weight=weight)


def _project_simplex(y):
    # sort-based Euclidean projection
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, y.size + 1)
    rho = ind[u - css / ind > 0][-1]
    tau = css[rho - 1] / rho
    return np.maximum(y - tau, 0.0)


def _project_ball_weighted(y, center, radius, w):
    z = y - center
    if float(z @ z) <= radius * radius:
        return y.copy()
    if w is None or np.allclose(w, w[0]):
        return center + z * (radius / np.linalg.norm(z))

    def excess(lam):
        x = w * z / (w + lam)
        return float(x @ x) - radius * radius

    hi = 1.0
    while excess(hi) > 0:
        hi *= 2.0
    lam = optimize.brentq(excess, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    x = w * z / (w + lam)
    # land exactly on the sphere
    x *= radius / max(np.linalg.norm(x), radius)
    return center + x


def project(domain: Domain, theta, geometry: Geometry = EUCLIDEAN, weight=None) -> np.ndarray:
    """Projection onto ``domain`` under the geometry, or under ``sum_j weight_j x_j^2``.

    ``weight`` is a positive per-coordinate vector. Diagonal-H mirror steps pass
    ``weight = 1/eta`` so the projection is taken in the ``H^{-1}`` norm.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (domain.dim,):
        raise InvalidArgument("project: dimension mismatch")
    if not np.all(np.isfinite(theta)):
        raise InvalidArgument("project: non-finite input")
    if weight is not None:
        weight = np.asarray(weight, dtype=float)
        if weight.shape != theta.shape or np.any(weight <= 0):
            raise InvalidArgument("projection weight must be strictly positive")
    if domain.kind == "unconstrained":
        return theta.copy()
    if domain.kind == "box":
        return np.clip(theta, domain.lo, domain.hi)
    if domain.kind == "ball":
        return _project_ball_weighted(theta, domain.center, domain.radius, weight)
    # simplex
    if weight is not None and not np.allclose(weight, weight[0]):
        raise UnsupportedError("weighted-norm projection onto the simplex is not supported")
    if geometry.kind == "negative_entropy":
        _check_positive(theta)
        return theta / theta.sum()
    return _project_simplex(theta)


def project_matrix(domain: Domain, theta, precision) -> np.ndarray:
    """Projection under ``||x||_A^2 = x^T A x`` for a SPD ``precision`` matrix ``A``.

    Exact for box and unconstrained domains only.
    """
    theta = np.asarray(theta, dtype=float)
    if domain.kind == "unconstrained":
        return theta.copy()
    if domain.kind != "box":
        raise UnsupportedError("full-matrix projection needs a box or unconstrained domain")
    if np.all(theta >= domain.lo) and np.all(theta <= domain.hi):
        return theta.copy()
    chol = np.linalg.cholesky(precision)
    # ||L^T (x - theta)||^2 with precision = L L^T; BVLS is an exact active-set solver
    res = optimize.lsq_linear(chol.T, chol.T @ theta, bounds=(domain.lo, domain.hi),
                              method="bvls", tol=1e-14)
    return np.clip(res.x, domain.lo, domain.hi)


# ---------------------------------------------------------------------------
# Loss oracles

class LossOracle:
    """A convex loss with value, subgradient and a Lipschitz bound on a domain."""

    family = "abstract"

    def value(self, theta) -> float:
        raise NotImplementedError

    def grad(self, theta) -> np.ndarray:
        raise NotImplementedError

    def lipschitz(self, domain: Domain) -> float:
        raise NotImplementedError


class QuadraticLoss(LossOracle):
    """``(weight/2) * ||theta - target||^2``."""

    family = "quadratic"

    def __init__(self, target, weight=1.0):
        self.target = as_param(target)
        if not weight > 0:
            raise InvalidArgument("quadratic weight must be positive")
        self.weight = float(weight)

    def value(self, theta):
        diff = np.asarray(theta, dtype=float) - self.target
        return 0.5 * self.weight * float(diff @ diff)

    def grad(self, theta):
        return self.weight * (np.asarray(theta, dtype=float) - self.target)

    def lipschitz(self, domain):
        return self.weight * domain.max_distance_from(self.target)


class LinearLoss(LossOracle):
    """``<g, theta>``."""

    family = "linear"

    def __init__(self, g):
        self.g = np.array(np.asarray(g, dtype=float).reshape(-1))
        if not np.all(np.isfinite(self.g)):
            raise InvalidArgument("linear loss gradient must be finite")

    def value(self, theta):
        return float(self.g @ np.asarray(theta, dtype=float))

    def grad(self, theta):
        return self.g.copy()

    def lipschitz(self, domain):
        return float(np.linalg.norm(self.g))


class LogisticLoss(LossOracle):
    """``log(1 + exp(-y <x, theta>))`` with label ``y`` in {-1, +1}."""

    family = "logistic"

    def __init__(self, x, y):
        self.x = as_param(x)
        if y not in (-1, 1, -1.0, 1.0):
            raise InvalidArgument("logistic label must be -1 or +1")
        self.y = float(y)

    def value(self, theta):
        z = self.y * float(self.x @ np.asarray(theta, dtype=float))
        return float(np.logaddexp(0.0, -z))

    def grad(self, theta):
        z = self.y * float(self.x @ np.asarray(theta, dtype=float))
        # sigmoid(-z), written to avoid overflow
        s = 0.5 * (1.0 - np.tanh(0.5 * z))
        return -self.y * s * self.x

    def lipschitz(self, domain):
        return float(np.linalg.norm(self.x))


@dataclass
class Task:
    """A sequence of ``m`` convex losses with a declared RMS Lipschitz bound."""

    losses: Sequence[LossOracle]
    lipschitz: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.losses) == 0:
            raise InvalidArgument("a task needs at least one loss")
        if not self.lipschitz > 0:
            raise InvalidArgument("declared Lipschitz bound must be positive")

    @property
    def m(self) -> int:
        return len(self.losses)

    def total(self, theta) -> float:
        return float(sum(loss.value(theta) for loss in self.losses))

    def total_grad(self, theta) -> np.ndarray:
        return np.sum([loss.grad(theta) for loss in self.losses], axis=0)

    def check_lipschitz(self, domain: Domain) -> bool:
        per = np.array([loss.lipschitz(domain) for loss in self.losses])
        return self.lipschitz ** 2 >= float(np.mean(per ** 2)) * (1 - 1e-12)


# ---------------------------------------------------------------------------
# Hindsight optimum

TIE_BREAK = 1e-8


def _isotropic_quadratic_center(losses):
    """Return (center, curvature) if the summed loss is an isotropic quadratic."""
    curvature = 0.0
    first = None
    linear = None
    for loss in losses:
        if isinstance(loss, QuadraticLoss):
            curvature += loss.weight
            term = loss.weight * loss.target
            first = term if first is None else first + term
        elif isinstance(loss, LinearLoss):
            linear = loss.g if linear is None else linear + loss.g
        else:
            return None
    if curvature == 0.0:
        return None
    if linear is not None:
        first = first - linear
    return first / curvature, curvature


def _projected_gradient(fun_grad, x0, domain, geometry, tol, max_iter):
    x = domain.project(x0)
    f, g = fun_grad(x)
    step = 1.0
    x_prev = g_prev = None
    for _ in range(max_iter):
        resid = float(np.linalg.norm(x - domain.project(x - g)))
        if resid <= tol:
            return x, resid
        if x_prev is not None:
            s, y = x - x_prev, g - g_prev
            sy = float(s @ y)
            if sy > 0:
                step = min(max(float(s @ s) / sy, 1e-12), 1e12)
        while True:
            cand = domain.project(x - step * g)
            fc, gc = fun_grad(cand)
            d = cand - x
            if fc <= f + float(g @ d) + 0.5 / step * float(d @ d) + 1e-15 * abs(f):
                break
            step *= 0.5
            if step < 1e-300:
                raise ConvergenceError("hindsight optimum: line search failed", residual=resid)
        x_prev, g_prev = x, g
        x, f, g = cand, fc, gc
    resid = float(np.linalg.norm(x - domain.project(x - g)))
    if resid <= tol:
        return x, resid
    raise ConvergenceError(f"hindsight optimum did not converge (residual {resid:.3e})", residual=resid)


def hindsight_optimum(task: Task, domain: Domain, geometry: Geometry = EUCLIDEAN,
                      anchor=None, tol=1e-10, max_iter=100_000) -> np.ndarray:
    """Minimizer of the task's summed loss over the domain.

    Ties are broken towards ``anchor`` (default: the domain's default
    initialization) by a ``1e-8`` proximal term. Sums of isotropic quadratic
    and linear losses are solved in closed form.
    """
    if task.m == 0:
        raise InvalidArgument("empty task")
    anchor = domain.default_init() if anchor is None else as_param(anchor)
    losses = list(task.losses)

    quad = _isotropic_quadratic_center(losses)
    if quad is not None:
        # the summed loss is isotropic, so the Euclidean projection is exact
        return domain.project(quad[0])
    if all(isinstance(loss, LinearLoss) for loss in losses) and geometry.kind == "euclidean" \
            and domain.kind != "simplex":
        s = np.sum([loss.g for loss in losses], axis=0)
        if domain.kind == "unconstrained" and np.any(s != 0):
            raise InvalidArgument("linear task is unbounded below on an unconstrained domain")
        return domain.project(anchor - s / TIE_BREAK)

    def fun_grad(x):
        diff = x - anchor
        f = task.total(x) + 0.5 * TIE_BREAK * float(diff @ diff)
        g = task.total_grad(x) + TIE_BREAK * diff
        return f, g

    x, _ = _projected_gradient(fun_grad, anchor, domain, geometry, tol, max_iter)
    return x
