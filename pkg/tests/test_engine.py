import math

import numpy as np
import pytest

from aruba.core import Domain, InvalidArgument, NumericError, QuadraticLoss, Task, make_rng
from aruba.engine import (
    MetaRunConfig,
    RunAborted,
    aruba_plusplus_refine,
    aruba_practical,
    online_to_batch,
    run_meta_stream,
    transfer_risk_estimate,
)
from aruba.environments import DistributionalEnv, EnvSpec, gen_static
from aruba.within_task import WithinTaskConfig, run_task


def small_stream(T=30, seed=0, **kw):
    return gen_static(EnvSpec(d=3, m=20, T=T, V=0.1, noise=0.5, seed=seed, **kw))


def test_single_task_run():
    run = run_meta_stream(MetaRunConfig(), small_stream(T=1))
    assert len(run.rows) == 1
    assert run.tar == pytest.approx(run.rows[0].regret)
    assert run.rub == pytest.approx(run.rows[0].bound)
    assert np.allclose(run.phis[0], 0.0)


def test_identical_tasks_fix_the_initialization():
    task = small_stream(T=1).tasks[0]
    dom = Domain.ball(np.zeros(3), 1.0)
    run = run_meta_stream(MetaRunConfig(sim="eps_ftl"), [task] * 3, domain=dom)
    opt = task.meta["center"]
    assert np.allclose(run.phis[1], opt, atol=1e-9)
    assert np.allclose(run.phis[2], opt, atol=1e-9)
    # B^2 = 0 after the first task, so the learned scale shrinks
    assert run.scales[2] < run.scales[1] < run.scales[0]


def test_ledger_running_means():
    run = run_meta_stream(MetaRunConfig(sim="eps_ewoo"), small_stream(T=12))
    r = np.array([row.regret for row in run.rows])
    u = np.array([row.bound for row in run.rows])
    assert np.allclose([row.tar for row in run.rows], np.cumsum(r) / np.arange(1, 13))
    assert np.allclose([row.rub for row in run.rows], np.cumsum(u) / np.arange(1, 13))
    assert np.all(r <= u + 1e-9)


@pytest.mark.parametrize("sim,kind", [("fixed", "v"), ("eps_ftl", "v"), ("diag", "diagonal"),
                                      ("isotropic", "scalar"), ("matrix", "matrix")])
def test_all_scale_strategies_run(sim, kind):
    cfg = MetaRunConfig(sim=sim, v=0.5 if sim == "fixed" else None)
    run = run_meta_stream(cfg, small_stream(T=10, domain="box"))
    assert run.scale_kind == kind
    assert all(row.regret <= row.bound + 1e-9 for row in run.rows)


def test_optimal_action_and_last_iterate_agree_for_long_tasks():
    spec = EnvSpec(d=3, m=400, T=20, V=0.1, noise=0.3, seed=2)
    a = run_meta_stream(MetaRunConfig(update_vector="optimal_action"), gen_static(spec))
    b = run_meta_stream(MetaRunConfig(update_vector="last_iterate"), gen_static(spec))
    assert b.tar == pytest.approx(a.tar, rel=0.05)


def test_rub_tracks_best_fixed_parameters():
    stream = gen_static(EnvSpec(d=3, m=20, T=300, V=0.1, noise=0.5, seed=1))
    run = run_meta_stream(MetaRunConfig(sim="eps_ftl", epsilon=0.01), stream)
    G, m = stream.lipschitz, stream.m
    best = math.inf
    for v in np.linspace(0.01, 1.0, 100):
        eta = v / (G * math.sqrt(m))
        total = sum(run_task(WithinTaskConfig(stream.domain, stream.reference[0], eta), task).bound
                    for task in stream)
        best = min(best, total / len(stream))
    assert run.rub <= 1.15 * best


def test_rub_is_eventually_nonincreasing_under_defaults():
    stream = gen_static(EnvSpec(d=3, m=20, T=300, V=0.1, noise=0.5, seed=1))
    rub = np.array([row.rub for row in run_meta_stream(MetaRunConfig(), stream).rows])
    assert np.all(np.diff(rub[10:]) <= 1e-12)


def test_run_aborted_keeps_partial_ledger():
    class Broken(QuadraticLoss):
        def grad(self, theta):
            raise NumericError("bad gradient")

    good = small_stream(T=2).tasks
    bad = Task([Broken(np.zeros(3))] * 3, 1.0)
    with pytest.raises(RunAborted) as info:
        run_meta_stream(MetaRunConfig(), good + [bad], domain=Domain.ball(np.zeros(3), 1.0))
    assert len(info.value.rows) == 2


def test_config_validation():
    for kw in ({"dyn": "x"}, {"sim": "x"}, {"mode": "x"}, {"update_vector": "x"},
               {"epsilon": 0.0}, {"T": 0}):
        with pytest.raises(InvalidArgument):
            MetaRunConfig(**kw)


def test_practical_first_rate_is_eps_over_zeta():
    _, _, rows = aruba_practical(small_stream(T=3), epsilon=0.2, zeta=0.8)
    assert rows[0].eta_min == pytest.approx(0.25)
    assert rows[0].eta_max == pytest.approx(0.25)


def test_practical_with_custom_runner():
    def runner(task, domain, phi, eta):
        grads = np.array([l.grad(phi) for l in task.losses])
        return phi - eta * grads.sum(axis=0), grads

    phi, eta, rows = aruba_practical(small_stream(T=5), runner)
    assert phi.shape == (3,) and eta.shape == (3,)
    assert math.isnan(rows[-1].regret)


def test_plusplus_refinement_sequence():
    rates = aruba_plusplus_refine(1.0, 1.0, 1.0, [1.0, 1.0])
    assert np.allclose(rates, [1.0, 1 / math.sqrt(2), 1 / math.sqrt(3)])
    with pytest.raises(InvalidArgument):
        aruba_plusplus_refine(1.0, 1.0, 0.0, [1.0])


def test_online_to_batch_averages():
    phi, scale = online_to_batch(phis=[[0.0, 1.0], [1.0, 3.0]], scales=[0.2, 0.4])
    assert np.allclose(phi, [0.5, 2.0])
    assert scale == pytest.approx(0.3)
    phi, scale = online_to_batch(phis=[[1.0]], scales=[np.array([1.0, 3.0])])
    assert np.allclose(scale, [1.0, 3.0])
    with pytest.raises(InvalidArgument):
        online_to_batch(phis=[])


def test_online_to_batch_from_run():
    run = run_meta_stream(MetaRunConfig(sim="diag"), small_stream(T=5))
    phi, scale = online_to_batch(run)
    assert np.allclose(phi, np.mean(run.phis, axis=0))
    assert np.allclose(scale, np.mean(run.scales, axis=0))


def test_transfer_risk_point_mass():
    env = DistributionalEnv(EnvSpec(kind="distributional", d=3, m=200, dispersion=0.0,
                                    noise=0.5, seed=4))
    res = transfer_risk_estimate(env.mu, 0.05, env, 20)
    assert abs(res.excess) <= 1e-2
    assert res.n_tasks == 20


def test_transfer_risk_prefers_the_center():
    env = DistributionalEnv(EnvSpec(kind="distributional", d=2, m=5, dispersion=0.1,
                                    noise=0.2, domain="box", seed=5))
    near = transfer_risk_estimate(env.mu, 0.01, env, 30, n_risk_samples=None)
    far = transfer_risk_estimate([1.0, 1.0], 0.01, env, 30, n_risk_samples=None)
    assert near.mean < far.mean
    assert near.excess >= 0


def test_transfer_risk_zero_losses():
    class ZeroEnv:
        domain = Domain.cube(2, 1.0)

        def rng(self, split, *keys):
            return make_rng(0, *keys)

        def sample_task(self, rng, m):
            return Task([QuadraticLoss(np.zeros(2), 1e-300)] * 3, 1.0), np.zeros(2)

        def sample_losses(self, opt, rng, n):
            return []

    res = transfer_risk_estimate(np.zeros(2), 0.1, ZeroEnv(), 3)
    assert res.mean == 0.0 and res.excess == 0.0


def test_transfer_risk_rejects_no_tasks():
    env = DistributionalEnv(EnvSpec(kind="distributional"))
    with pytest.raises(InvalidArgument):
        transfer_risk_estimate(env.mu, 0.1, env, 0)
