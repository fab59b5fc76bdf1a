"""
Tracking a drifting environment
===============================

When the region that task optima come from moves, averaging all past
optima lags behind. An online gradient learner on the initialization
forgets old tasks and follows the drift, at no cost when nothing moves.
"""

from aruba import EnvSpec, MetaRunConfig, gen_dynamic, run_meta_stream

common = dict(kind="dynamic", d=4, m=20, T=300, V=0.05, radius=2.0, seed=1)
drifting = EnvSpec(drift="phases", phases=[[1, 0, 0, 0], [-1, 0, 0, 0], [0, 1, 0, 0]], **common)
still = EnvSpec(drift="none", center=[1, 0, 0, 0], **common)

for label, spec in (("three phases", drifting), ("no drift", still)):
    stream = gen_dynamic(spec)
    print(f"{label} (path length {stream.path_length:.2f})")
    for dyn in ("ftl_mean", "ogd_dynamic"):
        run = run_meta_stream(MetaRunConfig(dyn=dyn, sim="eps_ewoo"), stream)
        print(f"  {dyn:12s} TAR {run.tar:.4f}  RUB {run.rub:.4f}")
