"""Eigenvector for eigenvalue 1, and why diffusing only negative fluid matters.

For a column-stochastic ``P`` we seed ``F = P e - e`` with ``e`` uniform and
diffuse with the negative-only rule. The limit ``h + e`` is an eigenvector
whose largest coordinate equals ``1/N``.
"""

import numpy as np

from diteration import (
    DiffusionMode,
    Strategy,
    eigenvector_rho1,
    run,
    stochastic,
    uniform_random_graph,
)
from diteration.engine import rho1_seed
from diteration.graphs import snake_graph

p = stochastic(uniform_random_graph(64, 400, seed=3, count="undirected").to_matrix())
sol = eigenvector_rho1(p, epsilon=1e-12)
x = sol.h + 1.0 / p.n
print(f"random graph: max(h + e) * N = {x.max() * p.n:.12f}")
print(f"             |P x - x|_1   = {np.abs(p.toarray() @ x - x).sum():.2e}")

# The five-node snake shows the failure case. Replaying the fair sequence
# 1, 2, 0, 3, 4 with every sign allowed cycles forever with |F|_1 = 0.4.
snake = stochastic(snake_graph().to_matrix())
seed = rho1_seed(snake)
order = Strategy.explicit([1, 2, 0, 3, 4])
both = run(snake, seed, order, DiffusionMode.ALL, epsilon=1e-12, max_diffusions=10_000,
           validate=False)
print(f"snake, all signs:  status={both.status}, |F|_1 = {both.residual_l1:.2f} "
      f"after {both.diffusion_count} diffusions")

neg = run(snake, seed, Strategy.explicit([1, 2, 0, 3, 4]), DiffusionMode.NEGATIVE_ONLY,
          epsilon=1e-12)
print(f"snake, negatives:  status={neg.status} after {neg.diffusion_count} diffusions, "
      f"h + e = {np.round(neg.h + 0.2, 6).tolist()}")
