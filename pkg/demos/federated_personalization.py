"""
Federated learning with a server-learned step size
==================================================

FedAvg clients run local SGD and return their models together with their
summed squared gradients. The server turns these into a per-coordinate
step size at the price of one extra vector per client. New clients then
personalize the global model with ten local steps.
"""

from aruba import FedConfig, run_fedavg

settings = dict(n_clients=100, d=10, rounds=100, clients_per_round=10, seed=0)

adaptive = run_fedavg(FedConfig(mode="diag", **settings))
print(f"learned rates: pre {adaptive.pre_loss:.4f}  post {adaptive.post_loss:.4f}")
print("  final per-coordinate rates:", adaptive.state.eta().round(3))
print(f"  uplink scalars: {adaptive.state.uplink_total}")

for eta in (0.01, 0.1, 1.0):
    res = run_fedavg(FedConfig(mode="vanilla", eta=eta, **settings))
    print(f"fixed eta {eta:<5}: pre {res.pre_loss:.4f}  post {res.post_loss:.4f}"
          f"  uplink {res.state.uplink_total}")
