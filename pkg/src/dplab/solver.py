"""Convex minimization of the double-phase energy with optional obstacle.

The regularized problem (coefficient shift sigma, gradient smoothing delta)
is C^1 and convex in the nodal values; it is minimized by projected
accelerated descent with backtracking, the projection onto {w >= psi} being
the pointwise max.  A schedule of (eps, delta) pairs drives the regularized
family toward the singular problem.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .grid import Grid, GridFunction, gradient, integrate
from .integrand import IntegrandSpec, eval_H, grad_L

__all__ = [
    "ObstacleProblem",
    "RegularizationSchedule",
    "SolveReport",
    "SolverDivergenceError",
    "energy",
    "energy_gradient",
    "gradient_adjoint",
    "harmonic_extension",
    "solve",
    "regularized_family",
    "vi_residual",
]


class SolverDivergenceError(RuntimeError):
    pass


@dataclass
class ObstacleProblem:
    """min over {w = u0 on the boundary, w >= psi} of the double-phase energy."""

    grid: Grid
    integrand: IntegrandSpec
    coefficient: object  # callable of points -> a(x) >= 0, or cellwise array
    boundary: GridFunction  # datum u0 (full nodal field; only the trace binds)
    obstacle: GridFunction | None = None
    a_star: float = 0.0  # constant coefficient shift in (0,1], 0 = none

    def __post_init__(self):
        if self.boundary.grid is not self.grid:
            raise ValueError("boundary datum must live on the problem grid")
        if self.obstacle is not None:
            if self.obstacle.grid is not self.grid:
                raise ValueError("obstacle must live on the problem grid")
            bd = self.grid.boundary_mask()
            gap = np.min(self.boundary.values[bd] - self.obstacle.values[bd])
            if gap < -1e-12:
                raise ValueError("boundary datum must dominate the obstacle "
                                 "on the boundary (deficit %.3e)" % gap)
        if not 0.0 <= self.a_star <= 1.0:
            raise ValueError("a_star must lie in [0,1]")
        self._a_cells = self._coefficient_cells()
        if np.any(self._a_cells < 0):
            raise ValueError("coefficient must be nonnegative")

    def _coefficient_cells(self) -> np.ndarray:
        if callable(self.coefficient):
            a = np.asarray(self.coefficient(self.grid.cell_center_points()),
                           dtype=float)
        else:
            a = np.asarray(self.coefficient, dtype=float)
        if a.shape != self.grid.cell_shape:
            raise ValueError("coefficient must be cellwise")
        return a

    @property
    def coefficient_cells(self) -> np.ndarray:
        return self._a_cells


@dataclass
class RegularizationSchedule:
    """(eps_k, delta_k) ladder with solver tolerances.

    The coefficient shift sigma(eps) = eps^2 / (1 + ||D u0||_q^q) satisfies
    sigma_eps (1 + ||D u0||_q^q) = eps^2 = o(eps).  delta_k decays fast
    enough that the (small) pointwise increase of the smoothed L under
    delta -> 0 is dominated by the decrease of the sigma-term.
    """

    eps_list: tuple = (0.25, 0.0625, 0.015625, 0.00390625, 0.0009765625)
    delta_list: tuple = (1e-3, 2.5e-4, 6.25e-5, 1.5625e-5, 3.90625e-6)
    delta_floor: float = 1e-6
    max_iter: int = 20000
    tol_energy: float = 1e-10
    tol_grad: float = 1e-8

    def __post_init__(self):
        if len(self.eps_list) != len(self.delta_list) or not self.eps_list:
            raise ValueError("eps and delta lists must be nonempty, equal length")
        if any(e2 >= e1 for e1, e2 in zip(self.eps_list, self.eps_list[1:])):
            raise ValueError("eps list must decrease")

    @staticmethod
    def geometric(levels: int, eps0: float = 0.25, delta0: float = 1e-3,
                  ratio: float = 0.25) -> "RegularizationSchedule":
        eps = tuple(eps0 * ratio**k for k in range(levels))
        delta = tuple(delta0 * ratio**k for k in range(levels))
        return RegularizationSchedule(eps, delta)

    def sigma(self, eps: float, problem: ObstacleProblem) -> float:
        G = gradient(problem.boundary)
        r = np.sqrt(np.sum(G * G, axis=-1))
        norm_q = integrate(problem.grid, r**problem.integrand.q)
        return eps**2 / (1.0 + norm_q)

    def deltas(self):
        return tuple(max(d, self.delta_floor) for d in self.delta_list)


@dataclass
class SolveReport:
    final_energy: float
    breakdown: dict
    iterations: int
    projected_gradient_norm: float
    max_gradient_interior: float
    max_principle_margin: float
    feasibility_margin: float
    converged: bool
    history: list = field(default_factory=list, repr=False)

    def to_json(self) -> str:
        payload = {k: v for k, v in self.__dict__.items() if k != "history"}
        payload["energy_history_tail"] = [float(e) for e in self.history[-5:]]
        return json.dumps(payload, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# energy, nodal gradient


def energy(problem: ObstacleProblem, w: GridFunction, delta: float | None = None,
           sigma: float = 0.0):
    """Total energy and per-term breakdown at cell centers."""
    spec = problem.integrand
    G = gradient(w)
    r = np.sqrt(np.sum(G * G, axis=-1))
    d = spec.delta_moll if delta is None else delta
    Lpart = integrate(problem.grid, spec.radial_value(r, delta=d))
    s_eff = spec.s + d
    acoef = problem.coefficient_cells + problem.a_star + sigma
    qpart = integrate(problem.grid,
                      acoef * np.power(s_eff**2 + r * r, 0.5 * spec.q))
    return Lpart + qpart, {"L": Lpart, "q": qpart}


def _density_gradient(spec: IntegrandSpec, acoef, G, delta: float):
    """d/dz of the cell density L_delta(z) + acoef * (s_eff^2+|z|^2)^{q/2}."""
    r2 = np.sum(G * G, axis=-1)
    s_eff = spec.s + delta
    lead = grad_L(spec, G, delta=delta)
    qfac = acoef * spec.q * np.power(s_eff**2 + r2, 0.5 * spec.q - 1.0)
    return lead + qfac[..., None] * G


def _avg_adjoint(T: np.ndarray, axis: int) -> np.ndarray:
    shape = list(T.shape)
    shape[axis] += 1
    out = np.zeros(shape)
    lo = [slice(None)] * T.ndim
    hi = [slice(None)] * T.ndim
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    out[tuple(lo)] += 0.5 * T
    out[tuple(hi)] += 0.5 * T
    return out


def gradient_adjoint(grid: Grid, P: np.ndarray) -> np.ndarray:
    """Adjoint of the cell-centered gradient: cellwise n-vector -> nodal field."""
    out = np.zeros(grid.shape)
    for axis in range(grid.n):
        T = P[..., axis]
        for other in range(grid.n):
            if other != axis:
                T = _avg_adjoint(T, other)
        h = np.diff(grid.axes[axis]).reshape(
            [-1 if k == axis else 1 for k in range(grid.n)])
        D = T / h
        lo = [slice(None)] * grid.n
        hi = [slice(None)] * grid.n
        lo[axis] = slice(0, -1)
        hi[axis] = slice(1, None)
        out[tuple(hi)] += D
        out[tuple(lo)] -= D
    return out


def energy_gradient(problem: ObstacleProblem, values: np.ndarray,
                    delta: float, sigma: float) -> np.ndarray:
    """Nodal gradient of the (smoothed) energy at the given nodal values."""
    spec = problem.integrand
    G = gradient(GridFunction(problem.grid, values))
    acoef = problem.coefficient_cells + problem.a_star + sigma
    dens = _density_gradient(spec, acoef, G, delta)
    return gradient_adjoint(problem.grid,
                            dens * problem.grid.cell_volumes()[..., None])


def vi_residual(problem: ObstacleProblem, u: GridFunction, w: GridFunction,
                delta: float, sigma: float = 0.0) -> float:
    """Discrete variational-inequality pairing <dH(x,Du), Dw - Du>.

    Nonnegative (up to solver tolerance) for every feasible direction w
    (same trace, w >= psi) when u minimizes.
    """
    g = energy_gradient(problem, u.values, delta, sigma)
    return float(np.sum(g * (w.values - u.values)))


# ---------------------------------------------------------------------------
# initialization


def harmonic_extension(grid: Grid, boundary: GridFunction) -> np.ndarray:
    """Deterministic harmonic-like extension of the boundary trace."""
    shape = grid.shape
    N = int(np.prod(shape))
    bd = grid.boundary_mask().ravel()
    idx = np.arange(N).reshape(shape)
    rows, cols, vals = [], [], []
    rhs = np.zeros(N)
    for axis in range(grid.n):
        ax = grid.axes[axis]
        for i in range(1, len(ax) - 1):
            hm, hp = ax[i] - ax[i - 1], ax[i + 1] - ax[i]
            cm = 2.0 / (hm * (hm + hp))
            cp = 2.0 / (hp * (hm + hp))
            sl = [slice(None)] * grid.n
            sl[axis] = i
            center = idx[tuple(sl)].ravel()
            sl[axis] = i - 1
            left = idx[tuple(sl)].ravel()
            sl[axis] = i + 1
            right = idx[tuple(sl)].ravel()
            rows.extend([center, center, center])
            cols.extend([center, left, right])
            vals.extend([np.full(center.size, cm + cp),
                         np.full(center.size, -cm), np.full(center.size, -cp)])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    interior = ~bd
    keep = interior[rows]
    A = scipy.sparse.csr_matrix(
        (vals[keep], (rows[keep], cols[keep])), shape=(N, N))
    # move boundary columns to the right-hand side
    x = np.where(bd, boundary.values.ravel(), 0.0)
    rhs = -A @ x
    Ai = A[interior][:, interior]
    sol = scipy.sparse.linalg.spsolve(Ai.tocsc(), rhs[interior])
    x[interior] = sol
    return x.reshape(shape)


# ---------------------------------------------------------------------------
# projected accelerated descent


def _minimize(problem: ObstacleProblem, delta: float, sigma: float,
              x0: np.ndarray, max_iter: int, tol_energy: float,
              tol_grad: float):
    grid = problem.grid
    bd = grid.boundary_mask()
    psi = problem.obstacle.values if problem.obstacle is not None else None

    def project(v):
        v = v.copy()
        if psi is not None:
            np.maximum(v, psi, out=v)
        v[bd] = problem.boundary.values[bd]
        return v

    def E(v):
        total, _ = energy(problem, GridFunction(grid, v), delta=delta,
                          sigma=sigma)
        return total

    x = project(x0)
    y = x.copy()
    fx = E(x)
    lip = 1.0
    t_mom = 1.0
    history = [fx]
    stall = 0
    pg_norm = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        g = energy_gradient(problem, y, delta, sigma)
        g[bd] = 0.0
        fy = E(y)
        # backtracking on the quadratic model at y
        for _ in range(60):
            cand = project(y - g / lip)
            diff = cand - y
            model = fy + float(np.sum(g * diff)) + 0.5 * lip * float(np.sum(diff * diff))
            fc = E(cand)
            if fc <= model + 1e-15 * (1.0 + abs(fc)):
                break
            lip *= 2.0
        else:
            raise SolverDivergenceError("backtracking failed to find a valid step")
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
        if fc <= fx:  # monotone acceptance
            y = cand + ((t_mom - 1.0) / t_next) * (cand - x)
            x, fx = cand, fc
        else:  # restart momentum at the best iterate
            y = x.copy()
            t_next = 1.0
        t_mom = t_next
        history.append(fx)
        gx = energy_gradient(problem, x, delta, sigma)
        gx[bd] = 0.0
        step = x - project(x - gx / lip)
        # RMS composite-gradient norm: per-node scale, grid-size independent
        pg_norm = lip * float(np.sqrt(np.mean(step * step)))
        rel_drop = (history[-2] - fx) / (1.0 + abs(fx))
        stall = stall + 1 if rel_drop < tol_energy else 0
        if stall >= 50 and pg_norm < tol_grad * (1.0 + abs(fx)):
            return x, fx, it, pg_norm, history, True
        lip = max(lip * 0.5, 1e-8)
    return x, fx, it, pg_norm, history, False


def _interior_max_gradient(grid: Grid, values: np.ndarray,
                           box: float = 0.5) -> float:
    G = gradient(GridFunction(grid, values))
    centers = grid.cell_center_points()
    inside = np.all(np.abs(centers) <= box, axis=-1)
    r = np.sqrt(np.sum(G * G, axis=-1))
    return float(np.max(r[inside])) if np.any(inside) else 0.0


def solve(problem: ObstacleProblem, schedule: RegularizationSchedule):
    """Minimize through the (eps, delta) ladder, warm-starting each stage.

    Returns the final-stage minimizer and a SolveReport for it.
    """
    x = harmonic_extension(problem.grid, problem.boundary)
    if problem.obstacle is not None:
        x = np.maximum(x, problem.obstacle.values)
    total_it = 0
    converged = True
    deltas = schedule.deltas()
    result = None
    for eps, delta in zip(schedule.eps_list, deltas):
        sigma = schedule.sigma(eps, problem)
        x, fx, it, pg, history, ok = _minimize(
            problem, delta, sigma, x, schedule.max_iter,
            schedule.tol_energy, schedule.tol_grad)
        total_it += it
        converged = converged and ok
        result = (fx, pg, history, delta, sigma)
    fx, pg, history, delta, sigma = result
    u = GridFunction(problem.grid, x)
    _, breakdown = energy(problem, u, delta=delta, sigma=sigma)
    psi_sup = problem.obstacle.sup_norm() if problem.obstacle is not None else 0.0
    bound = max(1.0, problem.boundary.sup_norm(), psi_sup)
    feas = (float(np.min(u.values - problem.obstacle.values))
            if problem.obstacle is not None else math.inf)
    report = SolveReport(
        final_energy=fx,
        breakdown=breakdown,
        iterations=total_it,
        projected_gradient_norm=pg,
        max_gradient_interior=_interior_max_gradient(problem.grid, x),
        max_principle_margin=bound - u.sup_norm(),
        feasibility_margin=feas,
        converged=converged,
        history=history,
    )
    return u, report


def regularized_family(problem: ObstacleProblem, schedule: RegularizationSchedule):
    """Solve each (eps, delta) stage (warm-started) and report its energy.

    Returns a list of (eps, delta, energy) with energies decreasing toward
    the limit within solver tolerance.
    """
    x = harmonic_extension(problem.grid, problem.boundary)
    if problem.obstacle is not None:
        x = np.maximum(x, problem.obstacle.values)
    rows = []
    for eps, delta in zip(schedule.eps_list, schedule.deltas()):
        sigma = schedule.sigma(eps, problem)
        x, fx, _, _, _, ok = _minimize(
            problem, delta, sigma, x, schedule.max_iter,
            schedule.tol_energy, schedule.tol_grad)
        if not ok:
            raise SolverDivergenceError(
                "stage (eps=%g, delta=%g) did not converge" % (eps, delta))
        rows.append((eps, delta, fx))
    return rows
