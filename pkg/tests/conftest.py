import numpy as np

from netnum import ProblemInstance, RoutingMatrix, UtilityParams


def make_instance(matrix, capacities, alpha=0.0, xi=0.0, mu=2.0) -> ProblemInstance:
    """Instance from a dense routing matrix, bypassing topology construction."""
    return ProblemInstance(
        RoutingMatrix.from_dense(matrix),
        capacities,
        UtilityParams(alpha=alpha, xi=xi),
        mu=mu,
    )


def random_instance(rng, alpha=0.0, xi=0.5, mu=2.0, d_max=20, e_max=10) -> ProblemInstance:
    """Random 0/1 routing instance; every flow crosses at least one link."""
    d = int(rng.integers(1, d_max + 1))
    e = int(rng.integers(1, e_max + 1))
    dense = np.zeros((e, d))
    for s in range(d):
        k = int(rng.integers(1, e + 1))
        rows = rng.choice(e, size=k, replace=False)
        dense[rows, s] = 1.0
    caps = rng.uniform(5.0, 50.0, size=e)
    return make_instance(dense, caps, alpha=alpha, xi=xi, mu=mu)


def single_link_instance(c=10.0, n_flows=1, alpha=0.0, xi=0.0, mu=2.0) -> ProblemInstance:
    """All flows across one link of capacity c."""
    return make_instance(np.ones((1, n_flows)), [c], alpha=alpha, xi=xi, mu=mu)
