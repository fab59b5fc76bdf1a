import numpy as np
import pytest

from aruba.core import InvalidArgument, QuadraticLoss, make_rng
from aruba.federated import (
    Client,
    FedConfig,
    RoundError,
    ServerState,
    client_update,
    make_clients,
    personalize_eval,
    run_fedavg,
    server_round,
)


def client_with(targets, cid=0, test=None):
    train = [QuadraticLoss(np.asarray(a, dtype=float)) for a in targets]
    test = [QuadraticLoss(np.asarray(a, dtype=float)) for a in (test or targets)]
    return Client(cid, train, test)


def test_zero_gradients_leave_the_model():
    c = client_with([[0.5, 0.5]] * 4)
    up = client_update(c, [0.5, 0.5], 0.3, local_steps=5, batch_size=2)
    assert np.allclose(up.model, [0.5, 0.5])
    assert np.allclose(up.grad_sq, 0.0)
    assert up.displacement == 0.0


def test_one_step_is_minus_eta_gradient():
    c = client_with([[1.0, 0.0], [0.0, 2.0]])
    up = client_update(c, [0.0, 0.0], 0.1, local_steps=1, batch_size=2)
    assert np.allclose(up.delta, -0.1 * np.array([-0.5, -1.0]))
    assert np.allclose(up.grad_sq, [0.25, 1.0])


def test_full_batch_steps_match_closed_form():
    rng = make_rng(0)
    targets = rng.normal(size=(6, 3))
    c = client_with(targets)
    phi, eta, k = np.array([1.0, -1.0, 0.5]), 0.3, 25
    up = client_update(c, phi, eta, local_steps=k, batch_size=6)
    a = targets.mean(axis=0)
    assert np.allclose(up.model, a + (1 - eta) ** k * (phi - a), atol=1e-8)


def test_per_coordinate_rates_apply_per_coordinate():
    c = client_with([[1.0, 1.0]])
    up = client_update(c, [0.0, 0.0], np.array([0.1, 0.5]), local_steps=1, batch_size=1)
    assert np.allclose(up.model, [0.1, 0.5])


def test_empty_client_returns_none():
    c = Client(3, [], [QuadraticLoss(np.zeros(2))])
    assert client_update(c, np.zeros(2), 0.1) is None


def test_bad_rates_rejected():
    c = client_with([[0.0]])
    with pytest.raises(InvalidArgument):
        client_update(c, [0.0], 0.0)
    with pytest.raises(InvalidArgument):
        client_update(c, [0.0], 0.1, batch_size=0)


def test_single_client_round_adopts_its_model():
    c = client_with([[1.0, 2.0], [3.0, 0.0]])
    state = ServerState(2, "vanilla", eta=0.2)
    server_round(state, [c], local_steps=3, batch_size=2)
    assert np.allclose(state.phi, client_update(c, np.zeros(2), 0.2, 3, 2).model)


def test_vanilla_full_batch_single_step_is_centralized_gradient_step():
    rng = make_rng(1)
    clients = [client_with(rng.normal(size=(n, 2)), cid=i) for i, n in enumerate((3, 5, 7))]
    state = ServerState(2, "vanilla", eta=0.4)
    server_round(state, clients, local_steps=1, batch_size=100)
    all_losses = [l for c in clients for l in c.train]
    g = np.mean([l.grad(np.zeros(2)) for l in all_losses], axis=0)
    assert np.allclose(state.phi, -0.4 * g)


def test_symmetric_clients_cancel():
    a = client_with([[1.0, 0.0]] * 5, cid=0)
    b = client_with([[-1.0, 0.0]] * 5, cid=1)
    state = ServerState(2, "diag")
    server_round(state, [a, b], local_steps=2, batch_size=5)
    assert np.allclose(state.phi, 0.0)
    # no server-side movement: b only gains the decayed start term
    assert np.allclose(state.scale.b, 0.05 ** 2 * 1.5)
    assert state.eta()[0] < 0.1 and state.eta()[1] == pytest.approx(1.0)


def test_first_adaptive_rate_is_one_with_equal_eps_zeta():
    for mode in ("diag", "isotropic"):
        assert np.allclose(ServerState(4, mode, epsilon=0.05, zeta=0.05).eta(), 1.0)


def test_isotropic_equals_diag_in_one_dimension():
    clients = make_clients(6, 1, 0.5, seed=2)
    a, b = ServerState(1, "diag"), ServerState(1, "isotropic")
    for _ in range(5):
        server_round(a, clients[:3])
        server_round(b, clients[:3])
        assert a.eta()[0] == pytest.approx(b.eta(), rel=1e-12)
    assert np.allclose(a.phi, b.phi)


def test_round_with_only_empty_clients_fails():
    empty = Client(0, [], [QuadraticLoss(np.zeros(2))])
    with pytest.raises(RoundError):
        server_round(ServerState(2), [empty])


def test_payload_counts():
    d = 7
    clients = make_clients(3, d, 0.5, seed=3)
    sizes = {}
    for mode in ("vanilla", "isotropic", "diag"):
        state = ServerState(d, mode)
        server_round(state, clients)
        rec = state.ledger[0]
        sizes[mode] = rec.uplink // 3
        assert rec.uplink_vanilla == 3 * (d + 1)
        assert state.uplink_total == rec.uplink
    assert sizes == {"vanilla": d + 1, "isotropic": d + 3, "diag": 2 * d + 1}
    assert ServerState(d, "diag").downlink_size() == 2 * d
    assert ServerState(d, "isotropic").downlink_size() == d + 1


def test_client_distance_option_runs():
    clients = make_clients(4, 3, 0.5, seed=4)
    state = ServerState(3, "diag", distance="client")
    server_round(state, clients)
    assert np.all(np.isfinite(state.eta()))


def test_personalization_without_steps_is_identity():
    state = ServerState(3, "diag")
    clients = make_clients(5, 3, 0.5, seed=5)
    for pre, post in personalize_eval(state, clients, refine_steps=0):
        assert pre == post


def test_short_federated_run_improves_after_refinement():
    cfg = FedConfig(n_clients=30, d=5, rounds=20, clients_per_round=5, seed=1)
    res = run_fedavg(cfg)
    assert res.post_loss < res.pre_loss
    assert not set(res.train_ids) & set(res.test_ids)
    assert len(res.state.ledger) == 20


def test_federated_run_is_deterministic():
    cfg = FedConfig(n_clients=20, d=3, rounds=5, clients_per_round=4, seed=7)
    a, b = run_fedavg(cfg), run_fedavg(cfg)
    assert np.array_equal(a.state.phi, b.state.phi)
    assert a.personalization == b.personalization


def test_fed_config_validation():
    with pytest.raises(InvalidArgument):
        FedConfig(mode="x")
    with pytest.raises(InvalidArgument):
        FedConfig(n_clients=10, clients_per_round=9)
    errors = FedConfig.__new__(FedConfig)
    errors.__dict__.update(FedConfig().__dict__)
    errors.eta, errors.p = 0.0, -1.0
    assert len(errors.validate()) == 2
