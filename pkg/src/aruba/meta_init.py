"""Initialization learners: Bregman-mean FTL, adaptive OGD and dynamic OGD."""

from __future__ import annotations

import numpy as np

from .core import EUCLIDEAN, Domain, Geometry, InvalidArgument, UnsupportedError, as_param

STRATEGIES = ("ftl_mean", "aogd", "ogd_dynamic")

# smallest coordinate of an entropy-geometry initialization; weighted means of
# vertices would otherwise sit on the simplex boundary, where entropy OMD is stuck
ENTROPY_FLOOR = 1e-6


class InitState:
    """Current initialization ``phi_t`` and the sums each strategy needs.

    ``ftl_mean`` plays the ``sigma``-weighted mean of past meta-update vectors,
    which minimizes the weighted sum of Bregman divergences ``B(theta_s||phi)``
    for any geometry. ``aogd`` and ``ogd_dynamic`` are Euclidean only.
    """

    def __init__(self, domain: Domain, strategy="ftl_mean", geometry: Geometry = EUCLIDEAN,
                 phi=None, rate=1.0):
        if strategy not in STRATEGIES:
            raise InvalidArgument(f"unknown initialization strategy {strategy!r}")
        if strategy != "ftl_mean" and geometry.kind != "euclidean":
            raise UnsupportedError(f"{strategy} needs the Euclidean geometry")
        if strategy == "ogd_dynamic" and not (0.0 < rate <= 1.0):
            raise InvalidArgument("dynamic OGD rate must lie in (0, 1]")
        self.domain = domain
        self.strategy = strategy
        self.geometry = geometry
        self.rate = float(rate)
        self.phi = domain.default_init() if phi is None else domain.project(as_param(phi), geometry)
        self.weighted_sum = np.zeros(domain.dim)
        self.weight_total = 0.0
        self.t = 0

    def update(self, theta_hat, sigma=1.0) -> np.ndarray:
        theta_hat = as_param(theta_hat)
        if theta_hat.size != self.domain.dim:
            raise InvalidArgument("meta-update vector has the wrong dimension")
        if not sigma > 0:
            raise InvalidArgument("sigma must be positive")
        self.t += 1
        self.weighted_sum += sigma * theta_hat
        self.weight_total += sigma
        if self.strategy == "ftl_mean":
            phi = self.weighted_sum / self.weight_total
        elif self.strategy == "aogd":
            # f(phi) = sigma/2 ||theta_hat - phi||^2 is sigma-strongly convex
            phi = self.phi - sigma * (self.phi - theta_hat) / self.weight_total
        else:
            phi = self.phi - self.rate * (self.phi - theta_hat)
        if self.geometry.kind == "negative_entropy" and np.any(phi < ENTROPY_FLOOR):
            phi = np.maximum(phi, ENTROPY_FLOOR)
        self.phi = self.domain.project(phi, self.geometry)
        return self.phi


def ftl_mean_update(state: InitState, theta_hat, sigma=1.0):
    return state.update(theta_hat, sigma)


def aogd_update(state: InitState, theta_hat, sigma=1.0):
    return state.update(theta_hat, sigma)


def ogd_dynamic_update(state: InitState, theta_hat, rate=None):
    if rate is not None:
        if not (0.0 < rate <= 1.0):
            raise InvalidArgument("dynamic OGD rate must lie in (0, 1]")
        state.rate = float(rate)
    return state.update(theta_hat, 1.0)
