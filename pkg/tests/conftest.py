import numpy as np
import pytest

from dplab.fractal import CantorParams, CounterexampleConfig
from dplab.solver import energy


@pytest.fixture(scope="session")
def config_j8():
    """Counterexample configuration at working depth 8 (fast unit tests)."""
    return CounterexampleConfig(cantor=CantorParams(n=2, eps=0.15, depth=8))


@pytest.fixture(scope="session")
def config_j10():
    """Certificate-grade configuration (depth 10, the headline parameters)."""
    return CounterexampleConfig(cantor=CantorParams(n=2, eps=0.15, depth=10))


def coordinate_descent_oracle(problem, delta, sigma, x0, sweeps=4000,
                              tol=1e-13):
    """Exhaustive cyclic coordinate descent on the discrete convex energy.

    Deliberately algorithm-free: each free node is minimized exactly in turn
    with a bounded scalar search, until a full sweep moves the energy by
    less than ``tol``.  Slow but unambiguous; use on tiny grids only.
    """
    from scipy.optimize import minimize_scalar
    from dplab.grid import GridFunction

    grid = problem.grid
    x = np.array(x0, dtype=float)
    interior = ~grid.boundary_mask()
    idx = list(zip(*np.nonzero(interior)))
    psi = problem.obstacle.values if problem.obstacle is not None else None

    def E(v):
        return energy(problem, GridFunction(grid, v), delta=delta,
                      sigma=sigma)[0]

    fx = E(x)
    for _ in range(sweeps):
        f_prev = fx
        for ij in idx:
            base = x[ij]

            def f1(t, ij=ij):
                x[ij] = t
                return E(x)

            lo = psi[ij] if psi is not None else base - 2.0
            res = minimize_scalar(f1, bounds=(lo, max(base, lo) + 2.0),
                                  method="bounded",
                                  options={"xatol": 1e-12})
            if res.fun < fx:
                x[ij] = res.x
                fx = res.fun
            else:
                x[ij] = base
        if f_prev - fx < tol:
            break
    return x, fx
