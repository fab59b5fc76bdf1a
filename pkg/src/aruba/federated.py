"""FedAvg simulator with server-side learning-rate adaptation.

Clients run local mini-batch gradient descent from the broadcast model and
return their model, sample count and (for the adaptive modes) summed squared
gradients. The server averages the models, then updates ``b`` with half the
squared server-side step and ``g`` with the sample-weighted squared-gradient
sums, and broadcasts ``eta = sqrt(b / g)``. With ``distance="client"`` the
server instead adds the sample-weighted half squared client displacements
``0.5 (theta_k - phi_r)^2``, computed from the returned models.

Message sizes are counted in scalars. Vanilla FedAvg uplinks the model and
the sample count (``d + 1``); the per-coordinate mode adds the squared
gradient vector (``2d + 1``); the isotropic mode adds two scalars, the squared
gradient norm sum and the client's half squared displacement (``d + 3``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .core import ArubaError, InvalidArgument, QuadraticLoss, make_rng, unit_sphere
from .meta_scale import DiagScaleState, IsotropicScaleState

MODES = ("vanilla", "isotropic", "diag")
DISTANCES = ("server", "client")


class RoundError(ArubaError):
    """Every sampled client was skipped."""


@dataclass
class Client:
    id: int
    train: List[QuadraticLoss]
    test: List[QuadraticLoss]
    optimum: Optional[np.ndarray] = None

    def __post_init__(self):
        if any(a is b for a in self.train for b in self.test):
            raise InvalidArgument("train and test splits must be disjoint")

    @property
    def n_train(self):
        return len(self.train)

    def test_loss(self, theta) -> float:
        if not self.test:
            return float("nan")
        return float(np.mean([loss.value(theta) for loss in self.test]))


def make_clients(n_clients, d, dispersion, noise=1.0, samples=(20, 60), train_frac=0.8,
                 center=None, seed=0) -> List[Client]:
    """Quadratic clients whose optima lie ``dispersion`` away from a shared center."""
    if not (0.0 < train_frac < 1.0):
        raise InvalidArgument("train_frac must lie in (0, 1)")
    rng = make_rng(seed, 20)
    mu = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    clients = []
    for k in range(n_clients):
        opt = mu + dispersion * unit_sphere(rng, d)
        n = int(rng.integers(samples[0], samples[1] + 1))
        targets = opt + noise * rng.standard_normal((n, d)) / np.sqrt(d)
        losses = [QuadraticLoss(a) for a in targets]
        n_train = int(round(train_frac * n))
        clients.append(Client(k, losses[:n_train], losses[n_train:], opt))
    return clients


@dataclass
class ClientUpdate:
    client_id: int
    model: np.ndarray
    delta: np.ndarray
    grad_sq: np.ndarray          # per-coordinate sum of squared mini-batch gradients
    count: int
    displacement: float          # 0.5 ||model - phi||^2


def client_update(client: Client, phi, eta, local_steps=None, batch_size=10, rng=None):
    """Local mini-batch gradient descent from ``phi``; ``None`` signals an empty client.

    ``local_steps=None`` makes one pass over the client's training split.
    """
    eta = np.asarray(eta, dtype=float)
    if np.any(eta <= 0) or not np.all(np.isfinite(eta)):
        raise InvalidArgument("learning rate must be positive")
    if client.n_train == 0:
        return None
    if batch_size < 1 or (local_steps is not None and local_steps < 0):
        raise InvalidArgument("need local_steps >= 0 and batch_size >= 1")
    n = client.n_train
    if local_steps is None:
        local_steps = -(-n // batch_size)
    phi = np.asarray(phi, dtype=float)
    theta = phi.copy()
    grad_sq = np.zeros_like(phi)
    order = np.arange(n) if rng is None else rng.permutation(n)
    pos = 0
    for _ in range(local_steps):
        if batch_size >= n:
            batch = order
        else:
            idx = (pos + np.arange(batch_size)) % n
            batch = order[idx]
            pos = (pos + batch_size) % n
        g = np.mean([client.train[i].grad(theta) for i in batch], axis=0)
        grad_sq += g ** 2
        theta = theta - eta * g
    diff = theta - phi
    return ClientUpdate(client.id, theta, diff, grad_sq, n, 0.5 * float(diff @ diff))


@dataclass
class RoundRecord:
    round: int
    clients: List[int]
    uplink: int
    downlink: int
    uplink_vanilla: int
    eta_min: float
    eta_mean: float
    eta_max: float
    client_displacement: float


class ServerState:
    def __init__(self, d, mode="diag", phi=None, eta=1.0, epsilon=0.05, zeta=0.05, p=1.0,
                 distance="server"):
        if mode not in MODES:
            raise InvalidArgument(f"unknown federated mode {mode!r}")
        if distance not in DISTANCES:
            raise InvalidArgument(f"unknown distance signal {distance!r}")
        self.distance = distance
        self.d = int(d)
        self.mode = mode
        self.phi = np.zeros(self.d) if phi is None else np.asarray(phi, dtype=float).copy()
        if mode == "vanilla":
            if not eta > 0:
                raise InvalidArgument("fixed learning rate must be positive")
            self.scale = None
            self._eta = float(eta)
        else:
            cls = DiagScaleState if mode == "diag" else IsotropicScaleState
            self.scale = cls(self.d, epsilon, zeta, p)
        self.r = 0
        self.ledger: List[RoundRecord] = []

    def eta(self):
        if self.scale is None:
            return self._eta
        return self.scale.eta()

    def uplink_size(self) -> int:
        return {"vanilla": self.d + 1, "isotropic": self.d + 3, "diag": 2 * self.d + 1}[self.mode]

    def downlink_size(self) -> int:
        return {"vanilla": self.d, "isotropic": self.d + 1, "diag": 2 * self.d}[self.mode]

    @property
    def uplink_total(self) -> int:
        return sum(rec.uplink for rec in self.ledger)

    @property
    def downlink_total(self) -> int:
        return sum(rec.downlink for rec in self.ledger)


def server_round(state: ServerState, clients: List[Client], local_steps=None, batch_size=10,
                 rng=None) -> ServerState:
    """One round: broadcast, local updates, weighted averaging, rate update."""
    if not clients:
        raise InvalidArgument("a round needs at least one client")
    eta = state.eta()
    updates = []
    for client in sorted(clients, key=lambda c: c.id):
        sub = None if rng is None else make_rng(int(rng.integers(2 ** 63)), client.id)
        up = client_update(client, state.phi, eta, local_steps, batch_size, sub)
        if up is not None:
            updates.append(up)
    if not updates:
        raise RoundError(f"round {state.r + 1}: every sampled client was skipped")
    counts = np.array([u.count for u in updates], dtype=float)
    weights = counts / counts.sum()
    models = np.array([u.model for u in updates])
    new_phi = weights @ models
    if state.scale is not None:
        grad_sq = weights @ np.array([u.grad_sq for u in updates])
        if state.mode == "isotropic":
            grad_sq = float(grad_sq.sum())
        if state.distance == "server":
            state.scale.accumulate(state.phi, new_phi, grad_sq=grad_sq)
        else:
            half_sq = weights @ (0.5 * np.array([u.delta for u in updates]) ** 2)
            if state.mode == "isotropic":
                half_sq = float(half_sq.sum())
            state.scale.add(half_sq, grad_sq)
    state.phi = new_phi
    state.r += 1
    eta_arr = np.atleast_1d(np.asarray(eta, dtype=float))
    n = len(updates)
    state.ledger.append(RoundRecord(
        round=state.r, clients=[u.client_id for u in updates],
        uplink=n * state.uplink_size(), downlink=n * state.downlink_size(),
        uplink_vanilla=n * (state.d + 1),
        eta_min=float(eta_arr.min()), eta_mean=float(eta_arr.mean()), eta_max=float(eta_arr.max()),
        client_displacement=float(weights @ [u.displacement for u in updates])))
    return state


def personalize_eval(state: ServerState, clients: List[Client], refine_steps=10, batch_size=10,
                     seed=0):
    """Per-client ``(pre, post)`` test loss around ``refine_steps`` local steps at the server rate."""
    out = []
    eta = state.eta()
    for client in clients:
        pre = client.test_loss(state.phi)
        if refine_steps == 0 or client.n_train == 0:
            out.append((pre, pre))
            continue
        up = client_update(client, state.phi, eta, refine_steps, batch_size,
                           make_rng(seed, 21, client.id))
        out.append((pre, client.test_loss(up.model)))
    return out


@dataclass
class FedConfig:
    n_clients: int = 100
    d: int = 10
    dispersion: float = 0.5
    noise: float = 1.0
    samples_min: int = 20
    samples_max: int = 60
    rounds: int = 200
    clients_per_round: int = 10
    local_steps: Optional[int] = None    # None: one local epoch
    batch_size: int = 10
    mode: str = "diag"
    distance: str = "server"
    eta: float = 1.0                # vanilla mode only
    epsilon: float = 0.05
    zeta: float = 0.05
    p: float = 1.0
    train_frac: float = 0.8
    meta_train_frac: float = 0.8
    refine_steps: int = 10
    seed: int = 0

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise InvalidArgument("; ".join(errors))

    def validate(self) -> List[str]:
        errors = []
        if self.mode not in MODES:
            errors.append(f"mode: unknown federated mode {self.mode!r}")
        if self.distance not in DISTANCES:
            errors.append(f"distance: must be one of {DISTANCES}")
        for name in ("n_clients", "d", "rounds", "clients_per_round", "batch_size",
                     "samples_min"):
            if not getattr(self, name) >= 1:
                errors.append(f"{name}: must be >= 1")
        if self.local_steps is not None and not self.local_steps >= 0:
            errors.append("local_steps: must be nonnegative")
        for name in ("refine_steps", "dispersion", "noise"):
            if not getattr(self, name) >= 0:
                errors.append(f"{name}: must be nonnegative")
        if self.samples_max < self.samples_min:
            errors.append("samples_max: must be >= samples_min")
        for name in ("eta", "epsilon", "zeta", "p"):
            if not getattr(self, name) > 0:
                errors.append(f"{name}: must be positive")
        for name in ("train_frac", "meta_train_frac"):
            if not 0.0 < getattr(self, name) < 1.0:
                errors.append(f"{name}: must lie in (0, 1)")
        n_train = int(round(self.meta_train_frac * self.n_clients))
        if not errors and not 1 <= self.clients_per_round <= n_train:
            errors.append("clients_per_round: must not exceed the meta-train clients")
        return errors


@dataclass
class FedResult:
    state: ServerState
    personalization: list
    train_ids: List[int]
    test_ids: List[int]
    info: dict = field(default_factory=dict)

    @property
    def pre_loss(self) -> float:
        return float(np.mean([p for p, _ in self.personalization]))

    @property
    def post_loss(self) -> float:
        return float(np.mean([q for _, q in self.personalization]))


def run_fedavg(config: FedConfig) -> FedResult:
    clients = make_clients(config.n_clients, config.d, config.dispersion, config.noise,
                           (config.samples_min, config.samples_max), config.train_frac,
                           seed=config.seed)
    split_rng = make_rng(config.seed, 22)
    perm = split_rng.permutation(config.n_clients)
    n_train = int(round(config.meta_train_frac * config.n_clients))
    train = [clients[i] for i in sorted(perm[:n_train])]
    test = [clients[i] for i in sorted(perm[n_train:])]
    state = ServerState(config.d, config.mode, eta=config.eta, epsilon=config.epsilon,
                        zeta=config.zeta, p=config.p, distance=config.distance)
    rng = make_rng(config.seed, 23)
    for _ in range(config.rounds):
        picks = rng.choice(len(train), size=config.clients_per_round, replace=False)
        server_round(state, [train[i] for i in picks], config.local_steps, config.batch_size, rng)
    pers = personalize_eval(state, test, config.refine_steps, config.batch_size, config.seed)
    return FedResult(state, pers, [c.id for c in train], [c.id for c in test])
