"""Learning-rate learners.

Scalar: fixed ``v``, eps-FTL and eps-EWOO over the surrogate losses
``f(v) = ((B^2 + eps^2)/v + v) * sigma`` on ``[eps, sqrt(D^2 + eps^2)]``.
Per-coordinate and isotropic: the distance / squared-gradient accumulators
with ``eta = sqrt(b / g)``. Full matrix: accumulators ``B^2, G^2`` and the
positive-definite solution of ``H G^2 H = B^2``.
"""

from __future__ import annotations

import math

import numpy as np

from .core import InvalidArgument, NumericError

SCALAR_STRATEGIES = ("fixed", "eps_ftl", "eps_ewoo")


def ewoo_gamma(D, G, m, epsilon):
    """Exp-concavity constant of the regularized surrogate losses."""
    return 2.0 / (D * G * math.sqrt(m)) * min(epsilon ** 2 / D ** 2, 1.0)


def adaptive_simpson(f, a, b, rel_tol=1e-10, max_intervals=2 ** 20, panels=16):
    """Integrate a vectorized, positive, vector-valued ``f`` over ``[a, b]``.

    ``f`` maps an array of ``n`` points to an array of shape ``(k, n)``.
    Intervals are refined breadth-first until the Richardson error of each
    one is below its share of ``rel_tol`` times the integral estimate.
    """
    if not b > a:
        return np.zeros(np.asarray(f(np.array([a]))).shape[0])
    width = b - a
    lo = np.linspace(a, b, panels + 1)[:-1]
    hi = lo + width / panels
    hi[-1] = b
    total = None
    tol = None
    n_done = 0
    while lo.size:
        mid = 0.5 * (lo + hi)
        pts = np.concatenate([lo, 0.5 * (lo + mid), mid, 0.5 * (mid + hi), hi])
        vals = f(pts).reshape(-1, 5, lo.size)
        f0, f1, f2, f3, f4 = (vals[:, j, :] for j in range(5))
        h = hi - lo
        coarse = h / 6.0 * (f0 + 4.0 * f2 + f4)
        fine = h / 12.0 * (f0 + 4.0 * f1 + 2.0 * f2 + 4.0 * f3 + f4)
        if total is None:
            total = np.zeros(fine.shape[0])
            scale = np.abs(fine.sum(axis=1))
            if np.any(scale == 0) or not np.all(np.isfinite(scale)):
                raise NumericError("quadrature: degenerate integrand")
            tol = rel_tol * scale
        err = np.abs(fine - coarse)
        ok = np.all(err <= 15.0 * tol[:, None] * (h / width)[None, :], axis=0)
        # underflowing widths cannot be split further
        ok |= h <= 8 * np.finfo(float).eps * max(abs(a), abs(b), 1.0)
        total += (fine[:, ok] + (fine[:, ok] - coarse[:, ok]) / 15.0).sum(axis=1)
        n_done += int(ok.sum())
        keep = ~ok
        lo, mid, hi = lo[keep], mid[keep], hi[keep]
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        if n_done + lo.size > max_intervals:
            raise NumericError("quadrature did not converge within the subdivision cap")
    if not np.all(np.isfinite(total)):
        raise NumericError("quadrature produced a non-finite value")
    return total


def ewoo_mean(A, S, gamma, lo, hi, rel_tol=1e-10):
    """Mean of the density ``exp(-gamma (A/v + S v))`` on ``[lo, hi]``."""
    if S == 0.0 and A == 0.0:
        return 0.5 * (lo + hi)
    root = math.sqrt(A / S) if S > 0 else hi
    peak = min(max(root, lo), hi)

    # exponent relative to the peak, written without cancellation
    if peak == root:
        def excess(v):
            return S * (v - peak) ** 2 / v
    else:
        def excess(v):
            return (v - peak) * (S - A / (v * peak))

    def f(v):
        w = np.exp(-gamma * excess(v))
        return np.vstack([w, v * w])

    num = np.zeros(2)
    for a, b in ((lo, peak), (peak, hi)):
        if b > a:
            num += adaptive_simpson(f, a, b, rel_tol=rel_tol)
    if not num[0] > 0:
        raise NumericError("EWOO normalizer vanished")
    return float(min(max(num[1] / num[0], lo), hi))


class ScalarScaleState:
    """Scalar learner for ``v_t``; the within-task rate is ``v_t / (G sqrt(m))``.

    ``D`` bounds the square root of the Bregman divergence between the
    meta-update vector and the initialization (so ``B_t^2 <= D^2``).
    """

    def __init__(self, strategy="eps_ewoo", epsilon=None, D=None, G=1.0, m=1, v=None,
                 rel_tol=1e-10):
        if strategy not in SCALAR_STRATEGIES:
            raise InvalidArgument(f"unknown scale strategy {strategy!r}")
        self.strategy = strategy
        self.history = []
        self.A = 0.0   # sum of sigma_s (B_s^2 + eps^2)
        self.S = 0.0   # sum of sigma_s
        self.rel_tol = rel_tol
        if strategy == "fixed":
            if v is None or not v > 0:
                raise InvalidArgument("fixed strategy needs v > 0")
            self.v_fixed = float(v)
            self.epsilon = 0.0
            return
        if epsilon is None or not epsilon > 0:
            raise InvalidArgument("epsilon must be positive")
        if D is None or not D > 0 or not math.isfinite(D):
            raise InvalidArgument("D must be a positive finite bound")
        if not G > 0 or not m >= 1:
            raise InvalidArgument("G must be positive and m >= 1")
        self.epsilon = float(epsilon)
        self.D = float(D)
        self.G = float(G)
        self.m = int(m)

    @property
    def interval(self):
        return self.epsilon, math.sqrt(self.D ** 2 + self.epsilon ** 2)

    @property
    def gamma(self):
        return ewoo_gamma(self.D, self.G, self.m, self.epsilon)

    @property
    def t(self):
        return len(self.history) + 1

    def value(self) -> float:
        if self.strategy == "fixed":
            return self.v_fixed
        lo, hi = self.interval
        if not self.history:
            return 0.5 * (lo + hi)
        if self.strategy == "eps_ftl":
            return min(max(math.sqrt(self.A / self.S), lo), hi)
        return ewoo_mean(self.A, self.S, self.gamma, lo, hi, self.rel_tol)

    def update(self, B2, sigma=1.0):
        if not B2 >= 0 or not sigma > 0:
            raise InvalidArgument("need B^2 >= 0 and sigma > 0")
        self.history.append((float(B2), float(sigma)))
        self.A += sigma * (B2 + self.epsilon ** 2)
        self.S += sigma

    def surrogate(self, v, B2, sigma=1.0):
        return ((B2 + self.epsilon ** 2) / v + v) * sigma


def eps_ftl_v(state: ScalarScaleState) -> float:
    return state.value()


def eps_ewoo_v(state: ScalarScaleState) -> float:
    return state.value()


def _check_accumulator_params(epsilon, zeta, p):
    if not (epsilon > 0 and zeta > 0 and p > 0):
        raise InvalidArgument("epsilon, zeta and p must be positive")


class DiagScaleState:
    """Per-coordinate accumulators ``b`` (distances) and ``g`` (squared gradients)."""

    def __init__(self, d, epsilon=1.0, zeta=1.0, p=1.0):
        _check_accumulator_params(epsilon, zeta, p)
        self.d = int(d)
        self.epsilon, self.zeta, self.p = float(epsilon), float(zeta), float(p)
        self.b = np.full(self.d, self.epsilon ** 2)
        self.g = np.full(self.d, self.zeta ** 2)
        self.t = 1

    def eta(self) -> np.ndarray:
        return np.sqrt(self.b / self.g)

    def accumulate(self, phi, theta_hat, grads=None, grad_sq=None):
        phi = np.asarray(phi, dtype=float)
        theta_hat = np.asarray(theta_hat, dtype=float)
        if phi.shape != (self.d,) or theta_hat.shape != (self.d,):
            raise InvalidArgument("dimension mismatch in accumulate")
        if grad_sq is None:
            grads = np.zeros((0, self.d)) if grads is None else np.asarray(grads, dtype=float)
            if grads.ndim != 2 or grads.shape[1] != self.d:
                raise InvalidArgument("gradients must have shape (m, d)")
            grad_sq = np.sum(grads ** 2, axis=0)
        grad_sq = np.asarray(grad_sq, dtype=float)
        if grad_sq.shape != (self.d,):
            raise InvalidArgument("squared-gradient sum has the wrong shape")
        return self.add(0.5 * (phi - theta_hat) ** 2, grad_sq)

    def add(self, half_sq_dist, grad_sq):
        """Accumulate precomputed distance and squared-gradient terms."""
        decay = (self.t + 1) ** (-self.p)
        self.b = self.b + self.epsilon ** 2 * decay + np.asarray(half_sq_dist, dtype=float)
        self.g = self.g + self.zeta ** 2 * decay + np.asarray(grad_sq, dtype=float)
        self.t += 1
        return self


class IsotropicScaleState:
    """Scalar accumulators: summed squared distances and squared gradient norms."""

    def __init__(self, d, epsilon=1.0, zeta=1.0, p=1.0):
        _check_accumulator_params(epsilon, zeta, p)
        self.d = int(d)
        self.epsilon, self.zeta, self.p = float(epsilon), float(zeta), float(p)
        self.b = self.epsilon ** 2
        self.g = self.zeta ** 2
        self.t = 1

    def eta(self) -> float:
        return math.sqrt(self.b / self.g)

    def accumulate(self, phi, theta_hat, grads=None, grad_sq=None):
        phi = np.asarray(phi, dtype=float)
        theta_hat = np.asarray(theta_hat, dtype=float)
        if phi.shape != (self.d,) or theta_hat.shape != (self.d,):
            raise InvalidArgument("dimension mismatch in accumulate")
        if grad_sq is None:
            grads = np.zeros((0, self.d)) if grads is None else np.asarray(grads, dtype=float)
            if grads.ndim != 2 or grads.shape[1] != self.d:
                raise InvalidArgument("gradients must have shape (m, d)")
            grad_sq = float(np.sum(grads ** 2))
        diff = phi - theta_hat
        return self.add(0.5 * float(diff @ diff), float(np.sum(grad_sq)))

    def add(self, half_sq_dist, grad_sq):
        """Accumulate precomputed distance and squared-gradient terms."""
        decay = (self.t + 1) ** (-self.p)
        self.b += self.epsilon ** 2 * decay + float(half_sq_dist)
        self.g += self.zeta ** 2 * decay + float(grad_sq)
        self.t += 1
        return self


def diag_eta(state: DiagScaleState) -> np.ndarray:
    return state.eta()


def diag_accumulate(state: DiagScaleState, phi, theta_hat, grads=None):
    return state.accumulate(phi, theta_hat, grads)


def isotropic_accumulate(state: IsotropicScaleState, phi, theta_hat, grads=None):
    return state.accumulate(phi, theta_hat, grads)


def _eigh_spd(A, name):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgument(f"{name} must be square")
    scale = max(1.0, float(np.abs(A).max()))
    if not np.allclose(A, A.T, rtol=0, atol=1e-10 * scale):
        raise InvalidArgument(f"{name} must be symmetric")
    lam, V = np.linalg.eigh(0.5 * (A + A.T))
    if lam[0] <= 0:
        raise InvalidArgument(f"{name} must be positive definite")
    return lam, V


def sqrtm_spd(A) -> np.ndarray:
    lam, V = _eigh_spd(A, "matrix")
    return (V * np.sqrt(lam)) @ V.T


def riccati_H(B2, G2, tol=1e-8) -> np.ndarray:
    """Unique SPD ``H`` with ``H @ G2 @ H == B2``.

    ``H = G^{-1} (G B2 G)^{1/2} G^{-1}`` with ``G = G2^{1/2}``.
    """
    _eigh_spd(B2, "B^2")
    lam, V = _eigh_spd(G2, "G^2")
    root = np.sqrt(lam)
    G = (V * root) @ V.T
    G_inv = (V / root) @ V.T
    M = G @ B2 @ G
    mu, W = np.linalg.eigh(0.5 * (M + M.T))
    M_half = (W * np.sqrt(np.clip(mu, 0.0, None))) @ W.T
    H = G_inv @ M_half @ G_inv
    H = 0.5 * (H + H.T)
    resid = np.linalg.norm(H @ G2 @ H - B2) / np.linalg.norm(B2)
    if not resid <= tol:
        raise NumericError(f"Riccati residual {resid:.3e} exceeds {tol:.0e}")
    return H


class MatrixScaleState:
    """Full-matrix accumulators ``B^2`` and ``G^2``; ``H`` solves ``H G^2 H = B^2``."""

    def __init__(self, d, epsilon=1.0, zeta=1.0):
        if not (epsilon > 0 and zeta > 0):
            raise InvalidArgument("epsilon and zeta must be positive")
        self.d = int(d)
        self.epsilon, self.zeta = float(epsilon), float(zeta)
        self.B2 = self.epsilon ** 2 * np.eye(self.d)
        self.G2 = self.zeta ** 2 * np.eye(self.d)
        self.t = 1

    def H(self) -> np.ndarray:
        return riccati_H(self.B2, self.G2)

    def accumulate(self, phi, theta_hat, grads=None):
        phi = np.asarray(phi, dtype=float)
        theta_hat = np.asarray(theta_hat, dtype=float)
        if phi.shape != (self.d,) or theta_hat.shape != (self.d,):
            raise InvalidArgument("dimension mismatch in accumulate")
        grads = np.zeros((0, self.d)) if grads is None else np.asarray(grads, dtype=float)
        diff = theta_hat - phi
        eye = np.eye(self.d)
        self.B2 = self.B2 + self.epsilon ** 2 * eye + 0.5 * np.outer(diff, diff)
        self.G2 = self.G2 + self.zeta ** 2 * eye + grads.T @ grads
        for M in (self.B2, self.G2):
            if np.abs(M - M.T).max() > 1e-10 * max(1.0, np.abs(M).max()):
                raise NumericError("accumulator lost symmetry")
        self.t += 1
        return self


def matrix_accumulate(state: MatrixScaleState, phi, theta_hat, grads=None):
    return state.accumulate(phi, theta_hat, grads)
