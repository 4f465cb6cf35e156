"""Fractal counterexample construction on the cube Q = (-1,1)^n.

Builds the generalized Cantor set C of dimension n-1-eps in the hyperplane
{x_n = 0}, the associated Cantor measure, the cutoffs chi_*, chi_a, phi, the
competitors u_* and u~ = (1-phi) u_*, the fractal coefficient
a(x) = |x_n|^alpha chi_a, the weight b, and the divergence-free dual field
z = div((gamma x delta_0) * Z_n).  On top of these it provides the layered
quadratures of the energies H(u0;Q), G(u0;Q) and the conjugate energies
H*(sigma z;Q), G*(sigma b;Q), and the parameter selection for (m*, sigma*).

For n = 2 the x-bar integrals are reduced exactly to one-dimensional
integrals through the neighborhood-measure function s -> |{dist(., C_J) <= s}|,
which is piecewise linear with breakpoints at the construction half-gaps.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .integrand import (
    GrowthFunction,
    IntegrandSpec,
    conjugate_G_radial,
    conjugate_H_radial,
)

__all__ = [
    "CantorParams",
    "CantorApprox",
    "CantorMeasureApprox",
    "CounterexampleConfig",
    "SingularPlaneError",
    "AtomCollisionError",
    "build_cantor",
    "dist_to_cantor",
    "true_neighborhood_measure",
    "cutoffs",
    "competitor_u_star",
    "grad_u_star",
    "competitor_u_tilde",
    "grad_u_tilde",
    "phi_cutoff",
    "grad_phi_cutoff",
    "fractal_coefficient_a",
    "weight_b",
    "div_Zn",
    "dual_field_z",
    "calibrate_pairing",
    "pairing_quadrature",
    "energy_H_u0",
    "energy_G_u0",
    "conjugate_energy_G_star_b",
    "conjugate_energy_H_star_z",
    "select_parameters",
]


class SingularPlaneError(ValueError):
    """Cutoff ratio requested on the singular plane x_n = 0."""


class AtomCollisionError(ValueError):
    """Dual field requested within 1e-12 of a measure atom."""


# ---------------------------------------------------------------------------
# smooth ramps


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _smoothstep_d(t):
    tc = np.clip(t, 0.0, 1.0)
    return np.where((t > 0.0) & (t < 1.0), 6.0 * tc * (1.0 - tc), 0.0)


def ramp_down(r, lo, hi):
    """C^1 cutoff: 1 for r <= lo, 0 for r >= hi, cubic in between."""
    return 1.0 - _smoothstep((np.asarray(r, dtype=float) - lo) / (hi - lo))


def ramp_down_d(r, lo, hi):
    return -_smoothstep_d((np.asarray(r, dtype=float) - lo) / (hi - lo)) / (hi - lo)


def theta_ramp(rho):
    """theta: 0 up to 1/4, cubic rise to 1 at 1/2; max slope exactly 6."""
    return _smoothstep((np.asarray(rho, dtype=float) - 0.25) / 0.25)


def theta_ramp_d(rho):
    return _smoothstep_d((np.asarray(rho, dtype=float) - 0.25) / 0.25) / 0.25


# ---------------------------------------------------------------------------
# Cantor set / measure


@dataclass(frozen=True)
class CantorParams:
    """Generalized Cantor set of Hausdorff dimension n-1-eps in [-1/2,1/2]^{n-1}."""

    n: int = 2
    eps: float = 0.15
    depth: int = 10

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError("n must be 2 or 3")
        if not 0.0 < self.eps < self.n - 1:
            raise ValueError("eps must lie in (0, n-1)")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")

    @property
    def lam(self) -> float:
        return 0.5 ** ((self.n - 1) / (self.n - 1 - self.eps))

    def interval_length(self, i: int) -> float:
        return self.lam**i

    @property
    def dimension(self) -> float:
        return self.n - 1 - self.eps


class CantorApprox:
    """Depth-J interval representation of one axis of the Cantor set.

    The construction starts from [-1/2, 1/2]; every depth-i interval of
    length l_i keeps two end subintervals of length l_{i+1}.  The n-1 axes
    are identical copies; distances combine in sup norm.
    """

    def __init__(self, params: CantorParams):
        self.params = params
        lam = params.lam
        lefts = np.array([-0.5])
        for i in range(params.depth):
            li, lnext = lam**i, lam ** (i + 1)
            lefts = np.sort(np.concatenate([lefts, lefts + li - lnext]))
        self.lefts = lefts
        self.length = lam**params.depth

    @property
    def rights(self):
        return self.lefts + self.length

    def gap_widths(self):
        """Widths of the internal gaps between consecutive intervals."""
        return self.lefts[1:] - self.rights[:-1]

    # -- distances -----------------------------------------------------------

    def distance_1d(self, x):
        x = np.asarray(x, dtype=float)
        L, R = self.lefts, self.rights
        idx = np.searchsorted(L, x)
        dist_left = np.where(idx > 0, x - R[np.maximum(idx - 1, 0)], np.inf)
        dist_right = np.where(idx < len(L), L[np.minimum(idx, len(L) - 1)] - x, np.inf)
        d = np.minimum(np.maximum(dist_left, 0.0), np.maximum(dist_right, 0.0))
        inside = (idx > 0) & (x <= R[np.maximum(idx - 1, 0)])
        return np.where(inside, 0.0, d)

    def grad_distance_1d(self, x):
        """a.e. derivative of the 1-D distance: -1 / 0 / +1."""
        x = np.asarray(x, dtype=float)
        L, R = self.lefts, self.rights
        idx = np.searchsorted(L, x)
        dist_left = np.where(idx > 0, x - R[np.maximum(idx - 1, 0)], np.inf)
        dist_right = np.where(idx < len(L), L[np.minimum(idx, len(L) - 1)] - x, np.inf)
        inside = (idx > 0) & (x <= R[np.maximum(idx - 1, 0)])
        g = np.where(dist_left <= dist_right, 1.0, -1.0)
        return np.where(inside | (self.distance_1d(x) == 0.0), 0.0, g)

    def distance(self, xbar):
        """Distance of (n-1)-points to the product set (sup norm for n=3)."""
        xbar = np.atleast_2d(np.asarray(xbar, dtype=float))
        per_axis = self.distance_1d(xbar)
        return np.max(per_axis, axis=-1)

    def grad_distance(self, xbar):
        xbar = np.atleast_2d(np.asarray(xbar, dtype=float))
        per_axis = self.distance_1d(xbar)
        k = np.argmax(per_axis, axis=-1)
        g = np.zeros_like(xbar)
        rows = np.arange(xbar.shape[0])
        g[rows, k] = self.grad_distance_1d(xbar[rows, k])
        return g

    # -- exact neighborhood measure (one axis, within [-1,1]) ----------------

    def neighborhood_measure(self, s):
        """|{x in [-1,1] : dist(x, interval union) <= s}|, exact."""
        s = np.asarray(s, dtype=float)
        gaps = self.gap_widths()
        total = self.length * len(self.lefts)
        inner = np.sum(np.minimum(2.0 * s[..., None], gaps), axis=-1)
        outer = 2.0 * np.minimum(s, 0.5)
        return total + inner + outer

    def neighborhood_measure_deriv(self, s):
        """d/ds of neighborhood_measure: 2*#{open gaps} + 2*1_{s<1/2}."""
        s = np.asarray(s, dtype=float)
        gaps = np.sort(self.gap_widths())
        open_gaps = len(gaps) - np.searchsorted(gaps, 2.0 * s, side="right")
        return 2.0 * open_gaps + 2.0 * (s < 0.5)

    # -- box counting ---------------------------------------------------------

    def dyadic_box_count(self, k: int) -> int:
        """Number of dyadic intervals of length 2^-k meeting the union (one axis)."""
        h = 2.0**-k
        first = np.floor(self.lefts / h).astype(np.int64)
        last = np.floor(self.rights / h - 1e-15).astype(np.int64)
        cells = np.concatenate([np.arange(a, b + 1) for a, b in zip(first, last)])
        return len(np.unique(cells))

    def box_counting_slope(self, levels=None):
        """Least-squares slope of log N_i vs log(1/l_i) over construction levels."""
        J = self.params.depth
        levels = range(1, J + 1) if levels is None else levels
        xs = np.array([i * math.log(1.0 / self.params.lam) for i in levels])
        ys = np.array([i * (self.params.n - 1) * math.log(2.0) for i in levels])
        A = np.vstack([xs, np.ones_like(xs)]).T
        slope, _ = np.linalg.lstsq(A, ys, rcond=None)[0]
        return float(slope)

    def dyadic_box_counting_slope(self, k_min=2, k_max=None):
        """Slope from honest dyadic box counts (per axis, scaled by n-1)."""
        if k_max is None:
            k_max = max(k_min + 2, int(-math.log2(self.length)) - 1)
        ks = np.arange(k_min, k_max + 1)
        ys = np.array([math.log(self.dyadic_box_count(int(k)) ** (self.params.n - 1)) for k in ks])
        xs = ks * math.log(2.0)
        A = np.vstack([xs, np.ones_like(xs)]).T
        slope, _ = np.linalg.lstsq(A, ys, rcond=None)[0]
        return float(slope)


class CantorMeasureApprox:
    """Atomic approximation of the Cantor measure: equal weights at cell centers."""

    def __init__(self, approx: CantorApprox):
        params = approx.params
        centers = approx.lefts + 0.5 * approx.length
        if params.n == 2:
            atoms = centers[:, None]
        else:
            g1, g2 = np.meshgrid(centers, centers, indexing="ij")
            atoms = np.column_stack([g1.ravel(), g2.ravel()])
        self.level = params.depth
        self.atoms = atoms
        self.weight = 2.0 ** (-params.depth * (params.n - 1))
        self.total_mass = self.weight * len(atoms)


def build_cantor(params: CantorParams):
    approx = CantorApprox(params)
    return approx, CantorMeasureApprox(approx)


def dist_to_cantor(approx: CantorApprox, xbar):
    """Distance of x-bar to the depth-J set (exact for n=2, sup-norm for n=3)."""
    out = approx.distance(xbar)
    return float(out[0]) if np.asarray(xbar).ndim == 1 else out


def true_neighborhood_measure(params: CantorParams, s):
    """|{x : dist(x, C) <= s}| for the *infinite-depth* set on one axis.

    Uses self-similarity: m(s) = 2 lam m(s/lam) below the half-gap
    (1-2 lam)/2 and m(s) = 1 + 2s above it.  Exact, O(log 1/s).
    """
    s = np.asarray(s, dtype=float)
    lam = params.lam
    b = (1.0 - 2.0 * lam) / 2.0
    with np.errstate(divide="ignore"):
        k = np.where(s >= b, 0, np.ceil(np.log(np.maximum(s, 1e-300) / b) / math.log(lam)))
    k = np.maximum(k, 0.0)
    return (2.0 * lam) ** k * (1.0 + 2.0 * s / lam**k)


def true_neighborhood_measure_deriv(params: CantorParams, s):
    """d/ds of the infinite-depth neighborhood measure: 2^(k+1) piecewise."""
    s = np.asarray(s, dtype=float)
    lam = params.lam
    b = (1.0 - 2.0 * lam) / 2.0
    with np.errstate(divide="ignore"):
        k = np.where(s >= b, 0, np.ceil(np.log(np.maximum(s, 1e-300) / b) / math.log(lam)))
    k = np.maximum(k, 0.0)
    return 2.0 ** (k + 1.0)


def self_similar_layer_integral(params: CantorParams, density, t: float,
                                r_lo: float, r_hi: float, r_nodes: int = 96):
    """integral over xbar of density(dist/t) using the infinite-depth measure.

    Counterpart of the depth-J layer integral for diagnostics that must
    probe scales below the atom resolution; the measure derivative is
    piecewise constant with geometric breakpoints, so the integral is exact
    up to the 1-D quadrature of density.
    """
    lam = params.lam
    b = (1.0 - 2.0 * lam) / 2.0
    bps = []
    k = 0
    while b * lam ** (k - 1) > r_lo * t:
        val = b * lam ** (k - 1)
        if val < r_hi * t:
            bps.append(val / t)
        k += 1
    edges = np.unique(np.concatenate([[r_lo, r_hi], bps]))
    total = 0.0
    for a, c in zip(edges[:-1], edges[1:]):
        m = max(4, int(r_nodes * (c - a) / (r_hi - r_lo)))
        rr = a + (np.arange(m) + 0.5) * (c - a) / m
        md = true_neighborhood_measure_deriv(params, rr * t)
        total += np.sum(density(rr) * md) * (c - a) / m * t
    return total


# ---------------------------------------------------------------------------
# counterexample configuration


@dataclass
class CounterexampleConfig:
    """All data of the Section-6 construction, plus the calibrated dual field."""

    cantor: CantorParams = field(default_factory=CantorParams)
    alpha: float = 0.5
    q: float = 1.8
    kappa: float = 0.5
    m_star: float | None = None
    z_scale: float = 1.0
    spec: IntegrandSpec | None = None
    pairing_raw: float | None = None
    pairing_error: float | None = None

    def __post_init__(self):
        if not self.q > 1.0 + self.alpha:
            raise ValueError("counterexample needs q > 1 + alpha")
        if not self.cantor.eps < self.q - 1.0 - self.alpha:
            raise ValueError("needs eps < q - 1 - alpha")
        if self.m_star is not None and self.m_star < 1.0:
            raise ValueError("m_star must be >= 1")
        if self.kappa <= 0.0:
            raise ValueError("kappa must be positive")
        if self.spec is None:
            self.spec = IntegrandSpec(GrowthFunction("log"), q=self.q, s=0.0)
        if self.spec.q != self.q:
            raise ValueError("integrand q must match config q")
        self.approx, self.measure = build_cantor(self.cantor)

    @property
    def n(self) -> int:
        return self.cantor.n

    @property
    def sigma_star(self) -> float:
        if self.m_star is None:
            raise ValueError("m_star not selected yet")
        return self.m_star**self.alpha

    # -- serialization -------------------------------------------------------

    def to_text(self) -> str:
        doc = {
            "n": self.n,
            "eps": self.cantor.eps,
            "depth": self.cantor.depth,
            "lambda": self.cantor.lam,
            "atom_count": len(self.measure.atoms),
            "alpha": self.alpha,
            "q": self.q,
            "kappa": self.kappa,
            "m_star": self.m_star,
            "sigma_star": None if self.m_star is None else self.sigma_star,
            "pairing_raw": self.pairing_raw,
            "pairing_error": self.pairing_error,
            "z_rescale_factor": self.z_scale,
            "integrand": {
                "growth": self.spec.growth.kind,
                "level": self.spec.growth.level,
                "kindL": self.spec.kindL,
                "s": self.spec.s,
                "Lambda": self.spec.Lambda,
            },
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_text(cls, text: str) -> "CounterexampleConfig":
        doc = json.loads(text)
        ig = doc.get("integrand", {})
        spec = IntegrandSpec(
            GrowthFunction(ig.get("growth", "log"), ig.get("level", 1)),
            kindL=ig.get("kindL", "product"),
            q=doc["q"],
            s=ig.get("s", 0.0),
            Lambda=ig.get("Lambda", 4.0),
        )
        cfg = cls(
            cantor=CantorParams(doc["n"], doc["eps"], doc["depth"]),
            alpha=doc["alpha"],
            q=doc["q"],
            kappa=doc.get("kappa", 0.5),
            m_star=doc.get("m_star"),
            z_scale=doc.get("z_rescale_factor", 1.0),
            spec=spec,
            pairing_raw=doc.get("pairing_raw"),
            pairing_error=doc.get("pairing_error"),
        )
        return cfg


# ---------------------------------------------------------------------------
# cutoffs and competitors (points X of shape (m, n); last coordinate is x_n)


def _split(X, n):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[-1] != n:
        raise ValueError(f"points must have {n} coordinates")
    return X[:, : n - 1], X[:, n - 1]


def _ratio(config: CounterexampleConfig, X, strict=True):
    xbar, xn = _split(X, config.n)
    d = config.approx.distance(xbar)
    axn = np.abs(xn)
    if strict and np.any(axn == 0.0):
        raise SingularPlaneError("cutoff ratio undefined on the plane x_n = 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(axn > 0.0, d / np.where(axn > 0, axn, 1.0), np.inf)
    return r, d, xn


def cutoffs(config: CounterexampleConfig, X):
    """(chi_*, chi_a, grad chi_*, grad chi_a) at the points X."""
    r, d, xn = _ratio(config, X)
    xbar, _ = _split(X, config.n)
    chi_s = ramp_down(r, 2.0, 4.0)
    chi_a = ramp_down(r, 0.5, 2.0)
    gd = config.approx.grad_distance(xbar)
    axn = np.abs(xn)
    # grad r = (grad dist / |x_n| , -dist * sgn(x_n) / x_n^2)
    grad_r = np.empty((len(r), config.n))
    grad_r[:, :-1] = gd / axn[:, None]
    grad_r[:, -1] = -d * np.sign(xn) / xn**2
    g_s = ramp_down_d(r, 2.0, 4.0)[:, None] * grad_r
    g_a = ramp_down_d(r, 0.5, 2.0)[:, None] * grad_r
    return chi_s, chi_a, g_s, g_a


def competitor_u_star(config: CounterexampleConfig, X):
    """u_*(x) = (1/2) sgn(x_n) chi_*(x); value 0 on the plane itself."""
    r, _, xn = _ratio(config, X, strict=False)
    return 0.5 * np.sign(xn) * ramp_down(r, 2.0, 4.0)


def grad_u_star(config: CounterexampleConfig, X):
    chi_s, _, g_s, _ = cutoffs(config, X)
    _, xn = _split(X, config.n)
    return 0.5 * np.sign(xn)[:, None] * g_s


def phi_cutoff(config: CounterexampleConfig, X):
    """Tensor smoothstep: 1 on (-3/4,3/4)^n, 0 outside (-5/6,5/6)^n."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.prod(ramp_down(np.abs(X), 0.75, 5.0 / 6.0), axis=-1)


def grad_phi_cutoff(config: CounterexampleConfig, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    factors = ramp_down(np.abs(X), 0.75, 5.0 / 6.0)
    dfactors = ramp_down_d(np.abs(X), 0.75, 5.0 / 6.0) * np.sign(X)
    grad = np.empty_like(X)
    for j in range(X.shape[-1]):
        others = np.prod(np.delete(factors, j, axis=-1), axis=-1)
        grad[:, j] = dfactors[:, j] * others
    return grad


def competitor_u_tilde(config: CounterexampleConfig, X):
    """u~ = (1 - phi) u_*; smooth on the closed cube, zero near C."""
    return (1.0 - phi_cutoff(config, X)) * competitor_u_star(config, X)


def grad_u_tilde(config: CounterexampleConfig, X):
    phi = phi_cutoff(config, X)
    us = competitor_u_star(config, X)
    gphi = grad_phi_cutoff(config, X)
    out = -us[:, None] * gphi
    # the (1-phi) D u_* term vanishes where phi = 1; u_* has zero gradient
    # off its ramp ring, but include it where defined (x_n != 0)
    _, xn = _split(X, config.n)
    off_plane = xn != 0.0
    if np.any(off_plane):
        Xo = np.atleast_2d(np.asarray(X, dtype=float))[off_plane]
        out[off_plane] += (1.0 - phi[off_plane])[:, None] * grad_u_star(config, Xo)
    return out


def fractal_coefficient_a(config: CounterexampleConfig, X):
    """a(x) = |x_n|^alpha chi_a(x) (0 on the plane by continuity)."""
    r, _, xn = _ratio(config, X, strict=False)
    return np.abs(xn) ** config.alpha * ramp_down(r, 0.5, 2.0)


def weight_b(config: CounterexampleConfig, X):
    """b(x) = 1_{dist(xbar,C) <= |x_n|/2} |x_n|^{-eps} (0 on the plane)."""
    _, d, xn = _ratio(config, X, strict=False)
    axn = np.abs(xn)
    with np.errstate(divide="ignore"):
        val = np.where(axn > 0, axn ** -config.cantor.eps, 0.0)
    return np.where(d <= axn / 2.0, val, 0.0)


# ---------------------------------------------------------------------------
# dual field


def _angular_norm(n: int) -> float:
    """Normalization of Z_n: surface measure of the unit sphere of the
    x-bar space R^{n-1} (2 points for n=2, circle 2*pi for n=3); this is the
    convention under which the raw pairing equals 1."""
    return 2.0 if n == 2 else 2.0 * math.pi


def div_Zn(n: int, X):
    """Closed form of div Z_n away from the origin.

    div Z_n = theta'(|xbar|/|x_n|) / A * |xbar|^{2-n}
              * ( xbar * sgn(x_n)/x_n^2 , 1/|x_n| ).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    xbar, xn = X[:, : n - 1], X[:, n - 1]
    rb = np.sqrt(np.sum(xbar * xbar, axis=-1))
    axn = np.abs(xn)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(axn > 0, rb / np.where(axn > 0, axn, 1.0), np.inf)
    td = theta_ramp_d(rho)
    active = td != 0.0
    out = np.zeros_like(X)
    if not np.any(active):
        return out
    fac = td[active] / _angular_norm(n)
    if n > 2:
        fac = fac * rb[active] ** (2 - n)
    out[active, : n - 1] = (
        fac[:, None] * xbar[active] * (np.sign(xn[active]) / xn[active] ** 2)[:, None]
    )
    out[active, n - 1] = fac / axn[active]
    return out


def dual_field_z(config: CounterexampleConfig, X):
    """z(x) = z_scale * sum_k w_k (div Z_n)(x - (a_k, 0))."""
    n = config.n
    X = np.atleast_2d(np.asarray(X, dtype=float))
    xbar, xn = X[:, : n - 1], X[:, n - 1]
    atoms = config.measure.atoms
    w = config.measure.weight
    d_atoms = np.min(
        np.max(np.abs(xbar[:, None, :] - atoms[None, :, :]), axis=-1), axis=-1
    ) if n == 3 else None
    out = np.zeros_like(X)
    if n == 2:
        a1 = atoms[:, 0]
        axn = np.abs(xn)
        lo = np.searchsorted(a1, xbar[:, 0] - axn / 2.0)
        hi = np.searchsorted(a1, xbar[:, 0] + axn / 2.0)
        counts = hi - lo
        if counts.sum():
            fp = np.repeat(np.arange(len(X)), counts)
            starts = np.repeat(lo, counts)
            within = np.arange(counts.sum()) - np.repeat(
                np.cumsum(counts) - counts, counts
            )
            ai = starts + within
            rel = np.column_stack([xbar[fp, 0] - a1[ai], xn[fp]])
            if np.any(np.max(np.abs(rel), axis=-1) < 1e-12):
                raise AtomCollisionError("point within 1e-12 of a measure atom")
            vals = div_Zn(2, rel)
            for j in range(2):
                out[:, j] = np.bincount(fp, weights=vals[:, j], minlength=len(X))
    else:
        if np.any((d_atoms < 1e-12) & (np.abs(xn) < 1e-12)):
            raise AtomCollisionError("point within 1e-12 of a measure atom")
        for k in range(len(atoms)):
            rel = np.column_stack([xbar - atoms[k], xn])
            out += div_Zn(3, rel)
    return config.z_scale * w * out


# ---------------------------------------------------------------------------
# pairing quadrature


def _frame_rectangles(inner: float, outer: float, n: int):
    """Axis-aligned rectangles tiling [-outer,outer]^n minus (-inner,inner)^n."""
    if n != 2:
        raise NotImplementedError("pairing quadrature is implemented for n = 2")
    return [
        ((-outer, outer), (inner, outer)),
        ((-outer, outer), (-outer, -inner)),
        ((-outer, -inner), (-inner, inner)),
        ((inner, outer), (-inner, inner)),
    ]


def pairing_quadrature(config: CounterexampleConfig, resolution: int = 512) -> float:
    """Midpoint quadrature of integral <D u~, z> over Q.

    The integrand is supported on the frame (3/4,5/6) where D phi lives:
    inside (-3/4,3/4)^n u~ vanishes, outside (-5/6,5/6)^n u~ = u_* whose
    gradient ring never meets the support of z.
    """
    h = 1.0 / resolution
    total = 0.0
    for (x0, x1), (y0, y1) in _frame_rectangles(0.75 - h, 5.0 / 6.0 + h, config.n):
        nx = max(2, int(round((x1 - x0) / h)))
        ny = max(2, int(round((y1 - y0) / h)))
        xs = x0 + (np.arange(nx) + 0.5) * (x1 - x0) / nx
        ys = y0 + (np.arange(ny) + 0.5) * (y1 - y0) / ny
        XX, YY = np.meshgrid(xs, ys, indexing="ij")
        P = np.column_stack([XX.ravel(), YY.ravel()])
        du = grad_u_tilde(config, P)
        z = dual_field_z(config, P)
        total += np.sum(du * z) * ((x1 - x0) / nx) * ((y1 - y0) / ny)
    return float(total)


@dataclass
class PairingCalibration:
    raw: float
    error: float
    scale: float


def calibrate_pairing(config: CounterexampleConfig, resolution: int = 512) -> PairingCalibration:
    """Measure the raw pairing, rescale z so the pairing is exactly 1."""
    config.z_scale = 1.0
    fine = pairing_quadrature(config, resolution)
    coarse = pairing_quadrature(config, resolution // 2)
    err = abs(fine - coarse)
    config.pairing_raw = fine
    config.pairing_error = err
    config.z_scale = 1.0 / fine
    return PairingCalibration(raw=fine, error=err, scale=config.z_scale)


# ---------------------------------------------------------------------------
# layered energy quadratures (n = 2: exact x-bar reduction)


def _du_star_magnitude(r, t):
    """|D u_*| as a function of (r = dist/t, t): |ramp'| sqrt(1+r^2) / (2t)."""
    return np.abs(ramp_down_d(r, 2.0, 4.0)) * np.sqrt(1.0 + r * r) / (2.0 * t)


def _band_nodes(j: int, nodes: int):
    """Midpoint nodes and weights on the dyadic band [2^-j-1, 2^-j]."""
    hi, lo = 2.0**-j, 2.0 ** -(j + 1)
    dt = (hi - lo) / nodes
    return lo + (np.arange(nodes) + 0.5) * dt, dt


def _profile_layer_integral(approx: CantorApprox, density, t, r_lo, r_hi, r_nodes=96):
    """integral over xbar of density(dist/t, t) via the exact neighborhood measure.

    density is vectorized over the ratio array r; the xbar set is one axis of
    the depth-J construction embedded in [-1,1].
    """
    gaps = np.sort(approx.gap_widths())
    # breakpoints of m'(s) in the s = r*t variable, mapped to r
    bps = np.concatenate([gaps / 2.0, [0.5]]) / t
    bps = bps[(bps > r_lo) & (bps < r_hi)]
    edges = np.unique(np.concatenate([[r_lo, r_hi], bps]))
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        m = max(4, int(r_nodes * (b - a) / (r_hi - r_lo)))
        rr = a + (np.arange(m) + 0.5) * (b - a) / m
        md = approx.neighborhood_measure_deriv(rr * t)
        total += np.sum(density(rr) * md) * (b - a) / m * t
    return total


def _geometric_tail(bands):
    """Upper estimate of the continuation of a geometrically decaying series."""
    if len(bands) < 2 or bands[-1] <= 0.0:
        return 0.0
    r = bands[-1] / bands[-2] if bands[-2] > 0 else 0.5
    r = min(r, 0.95)
    return bands[-1] * r / (1.0 - r)


def energy_H_u0(config: CounterexampleConfig, m: float, floor_exp: int = 48,
                band_nodes: int = 8):
    """H(u0;Q) with u0 = m u_*: integral of L(m |D u_*|) (+ s^q coefficient term).

    The x-bar integral at each height is exact through the neighborhood
    measure; the t-integral runs over dyadic bands down to 2^-floor_exp with
    a geometric tail bound.  Returns (value, error_estimate).
    """
    if config.n != 2:
        raise NotImplementedError("layered certificate quadratures need n = 2")
    spec = config.spec

    def compute(nodes):
        total, tail = 0.0, 0.0
        bands = []
        for j in range(floor_exp):
            ts, dt = _band_nodes(j, nodes)
            acc = 0.0
            for t in ts:
                acc += dt * _profile_layer_integral(
                    config.approx,
                    lambda r, t=t: spec.radial_value(
                        m * _du_star_magnitude(r, t), delta=0.0),
                    t, 2.0, 4.0,
                )
            bands.append(2.0 * acc)
        return float(np.sum(bands)), _geometric_tail(bands)

    value, tail = compute(band_nodes)
    coarse, _ = compute(max(2, band_nodes // 2))
    sq_term = 0.0
    if spec.s > 0.0:
        for j in range(floor_exp):
            ts, dt = _band_nodes(j, band_nodes)
            for t in ts:
                sq_term += 2.0 * dt * _profile_layer_integral(
                    config.approx,
                    lambda r, t=t: np.full_like(r, t**config.alpha)
                    * ramp_down(r, 0.5, 2.0),
                    t, 0.0, 2.0,
                )
        sq_term *= spec.s**spec.q
    return value + sq_term + tail, tail + abs(value - coarse)


def energy_G_u0(config: CounterexampleConfig, m: float, floor_exp: int = 48,
                band_nodes: int = 8):
    """G(u0;Q) = integral of m|Du_*| g(m|Du_*|) + a (m|Du_*|)^q (a-part vanishes
    since the gradient ring is disjoint from the support of a)."""
    if config.n != 2:
        raise NotImplementedError("layered certificate quadratures need n = 2")
    g = config.spec.modular_growth
    q = config.q

    def compute(nodes):
        bands = []
        for j in range(floor_exp):
            ts, dt = _band_nodes(j, nodes)
            acc = 0.0
            for t in ts:
                def dens(r, t=t):
                    v = m * _du_star_magnitude(r, t)
                    return v * g.value(v)
                acc += dt * _profile_layer_integral(config.approx, dens, t, 2.0, 4.0)
            bands.append(2.0 * acc)
        return float(np.sum(bands)), _geometric_tail(bands)

    value, tail = compute(band_nodes)
    coarse, _ = compute(max(2, band_nodes // 2))
    return value + tail, tail + abs(value - coarse)


def _true_model_bands(config: CounterexampleConfig, conj_fn, sigma_coeff: float,
                      j_start: int, j_probe: int = 44, band_nodes: int = 6):
    """Continuation of a conjugate-energy integral below the quadrature floor.

    Models the band integrand by its true-measure form
    conj(t^alpha, sigma_coeff * t^-eps) * m_true(t/2), whose decay per band is
    geometric; integrates bands j_start..j_probe and extrapolates the rest.
    """
    spec = config.spec
    alpha, eps = config.alpha, config.cantor.eps
    bands = []
    for j in range(j_start, j_probe):
        ts, dt = _band_nodes(j, band_nodes)
        vals = conj_fn(spec, ts**alpha, sigma_coeff * ts**-eps)
        meas = true_neighborhood_measure(config.cantor, ts / 2.0)
        bands.append(2.0 * dt * float(np.sum(vals * meas)))
    return float(np.sum(bands)) + _geometric_tail(bands)


def conjugate_energy_G_star_b(config: CounterexampleConfig, sigma: float,
                              floor_exp: int | None = None, band_nodes: int = 8):
    """G*(sigma b; Q): one-dimensional, since b depends on (dist, x_n) only.

    Bands down to the 2^-(J+2) floor use the depth-J weight exactly; below
    the floor the depth-J set stops resembling the Cantor set and the
    integral is continued with the true-measure model.
    """
    if config.n != 2:
        raise NotImplementedError("layered certificate quadratures need n = 2")
    spec = config.spec
    eps, alpha = config.cantor.eps, config.alpha
    if floor_exp is None:
        floor_exp = config.cantor.depth + 2

    def compute(nodes):
        bands = []
        for j in range(floor_exp):
            ts, dt = _band_nodes(j, nodes)
            vals = conjugate_G_radial(spec, ts**alpha, sigma * ts**-eps)
            meas = config.approx.neighborhood_measure(ts / 2.0)
            bands.append(2.0 * float(np.sum(vals * meas) * dt))
        return float(np.sum(bands))

    value = compute(band_nodes)
    coarse = compute(max(2, band_nodes // 2))
    below = _true_model_bands(config, conjugate_G_radial, sigma, floor_exp)
    return value + below, abs(value - coarse) + 0.05 * below


# -- H*(sigma z; Q): 2-D cloud down to the 2^-(J+2) floor, analytic
#    true-measure continuation below it ------------------------------------


class _ZQuadratureCloud:
    """Layered quadrature points with |z| values for H*(sigma z; Q).

    Per dyadic band in |x_n| and per t node, the x-bar axis is sampled on the
    union of windows around the atoms (where z can be nonzero) with spacing
    t / points_per_window.  Also records the largest observed ratio |z|/b,
    which calibrates the below-floor continuation.
    """

    def __init__(self, config: CounterexampleConfig, floor_exp: int,
                 band_nodes: int = 6, points_per_window: int = 24):
        if config.n != 2:
            raise NotImplementedError("H* quadrature cloud needs n = 2")
        self.entries = []
        self.floor_exp = floor_exp
        eps = config.cantor.eps
        atoms = config.measure.atoms[:, 0]
        zb_max = 0.0
        for j in range(floor_exp):
            ts_nodes, dt = _band_nodes(j, band_nodes)
            for t in ts_nodes:
                h = t / points_per_window
                segs = _merge_windows(atoms, t / 2.0 + h, -1.0, 1.0)
                xs_list, ws_list = [], []
                for a, b in segs:
                    k = max(1, int(round((b - a) / h)))
                    xs_list.append(a + (np.arange(k) + 0.5) * (b - a) / k)
                    ws_list.append(np.full(k, (b - a) / k))
                xs = np.concatenate(xs_list)
                ws = np.concatenate(ws_list)
                P = np.column_stack([xs, np.full_like(xs, t)])
                z = dual_field_z(config, P)
                znorm = np.sqrt(np.sum(z * z, axis=-1))
                if znorm.size:
                    zb_max = max(zb_max, float(np.max(znorm)) * t**eps)
                self.entries.append((t, dt, ws, znorm, j))
        self.z_scale_at_build = config.z_scale
        self.zb_ratio = zb_max

    def integrate(self, config: CounterexampleConfig, sigma: float):
        """(value, per-band list) of H*(x, sigma z) over the covered bands."""
        spec = config.spec
        alpha = config.alpha
        rescale = config.z_scale / self.z_scale_at_build
        bands = np.zeros(self.floor_exp)
        for t, dt, ws, znorm, j in self.entries:
            wn = sigma * rescale * znorm
            active = wn > 0.0
            if not np.any(active):
                continue
            wa = wn[active]
            grid = np.geomspace(max(wa.min(), 1e-300), wa.max() * (1 + 1e-12), 160)
            table = conjugate_H_radial(spec, t**alpha, grid)
            vals = np.interp(np.log(wa), np.log(grid), table)
            bands[j] += 2.0 * dt * float(np.sum(vals * ws[active]))
        return float(np.sum(bands)), list(bands)


def _merge_windows(centers, half, lo, hi):
    """Merge intervals [c-half, c+half] clipped to [lo, hi]."""
    a = np.clip(centers - half, lo, hi)
    b = np.clip(centers + half, lo, hi)
    segs = []
    cur_a, cur_b = a[0], b[0]
    for aa, bb in zip(a[1:], b[1:]):
        if aa <= cur_b:
            cur_b = max(cur_b, bb)
        else:
            segs.append((cur_a, cur_b))
            cur_a, cur_b = aa, bb
    segs.append((cur_a, cur_b))
    return segs


def conjugate_energy_H_star_z(config: CounterexampleConfig, sigma: float,
                              cloud=None, coarse_cloud=None):
    """H*(sigma z; Q) = layered 2-D quadrature + below-floor continuation.

    Above the 2^-(J+2) floor the atomic field is integrated directly; below
    it the atoms no longer resolve the Cantor measure, so the layer is
    bounded using |z| <= C b (with C the largest observed |z|/b ratio) and
    the true-measure scaling, under which the layer integrals are
    summable.
    Returns (value, error_estimate).
    """
    if config.n != 2:
        raise NotImplementedError("H* quadrature needs n = 2")
    floor_exp = config.cantor.depth + 2
    if cloud is None:
        cloud = _ZQuadratureCloud(config, floor_exp)
    value, _ = cloud.integrate(config, sigma)
    rescale = config.z_scale / cloud.z_scale_at_build
    below = _true_model_bands(
        config, conjugate_H_radial, sigma * cloud.zb_ratio * rescale, floor_exp
    )
    if coarse_cloud is not None:
        coarse_val, _ = coarse_cloud.integrate(config, sigma)
        err = abs(value - coarse_val)
    else:
        err = 0.02 * value
    return value + below, err + 0.05 * below


# ---------------------------------------------------------------------------
# parameter selection


def select_parameters(config: CounterexampleConfig, kappa: float | None = None,
                      margin: float = 0.1, max_power: int = 48):
    """Choose the smallest power-of-two m_* satisfying the smallness and
    duality-margin conditions of the gap certificate.

    All four conditions are monotone in m (the small-multiple conditions
    decay like negative powers of m, the energy conditions improve since the
    right-hand sides grow like m^(1+alpha)), so the smallest admissible
    power of two is located by binary search.  Returns (config with m_star
    set, diagnostics dict).  The constants c_*, c^* are measured from the
    quadrature energies at each candidate; c~ = 2^{q+2} Lambda^2 comes from
    the modular comparison chain.
    """
    if kappa is not None:
        config.kappa = kappa
    kap = config.kappa
    q, alpha, eps = config.q, config.alpha, config.cantor.eps
    qp = q / (q - 1.0)
    if not alpha * qp < 1.0 + alpha:
        raise ValueError("infeasible: needs alpha*q' < 1 + alpha (i.e. q > 1+alpha)")
    c_tilde = 2.0 ** (q + 2.0) * config.spec.Lambda**2
    delta = min(eps, alpha) / 2.0 if config.spec.growth.kind != "one" else 0.0
    if config.pairing_raw is None:
        calibrate_pairing(config)
    floor_exp = config.cantor.depth + 2
    cloud = _ZQuadratureCloud(config, floor_exp)
    coarse = _ZQuadratureCloud(config, floor_exp, points_per_window=12)
    diagnostics = {"candidates": []}

    def evaluate(k: int) -> dict:
        m = 2.0**k
        sigma = m**alpha
        Hu0, eH = energy_H_u0(config, m)
        Gu0, eG = energy_G_u0(config, m)
        Hs, eHs = conjugate_energy_H_star_z(config, sigma, cloud, coarse)
        Gs, eGs = conjugate_energy_G_star_b(config, sigma)
        c_star = (Hs + Gs) / sigma**qp
        c_sup = (Hu0 + Gu0) / m ** (1.0 + delta)
        ok_small_q = m ** (alpha * qp - (1.0 + alpha)) * c_star < kap / (4.0 * c_tilde)
        ok_small_L = 2.0**config.n * m ** (delta - alpha) * (c_sup + 1.0) < kap / (4.0 * c_tilde)
        ok_modular = Gu0 + Gs < kap * m * sigma / (2.0 * c_tilde)
        lhs_duality = Hu0 + Hs + eH + eHs
        ok_duality = lhs_duality < 0.5 * m * sigma * (1.0 - margin)
        cand = dict(
            m=m, sigma=sigma, H_u0=Hu0, G_u0=Gu0, Hstar=Hs, Gstar=Gs,
            c_star=c_star, c_sup=c_sup, ok_small_q=ok_small_q, ok_small_L=ok_small_L,
            ok_modular=ok_modular, ok_duality=ok_duality,
            ok=ok_small_q and ok_small_L and ok_modular and ok_duality,
            errors=dict(H_u0=eH, G_u0=eG, Hstar=eHs, Gstar=eGs),
            duality_margin=1.0 - lhs_duality / (0.5 * m * sigma),
        )
        diagnostics["candidates"].append(cand)
        return cand

    if not evaluate(max_power)["ok"]:
        raise RuntimeError("no admissible m_* found up to 2^%d" % max_power)
    lo, hi = 0, max_power  # smallest admissible power is in (lo, hi]
    best = diagnostics["candidates"][-1]
    while hi - lo > 1:
        mid = (lo + hi) // 2
        cand = evaluate(mid)
        if cand["ok"]:
            hi, best = mid, cand
        else:
            lo = mid
    config.m_star = best["m"]
    diagnostics.update(
        m_star=best["m"], sigma_star=best["sigma"], c_star=best["c_star"],
        c_sup=best["c_sup"], c_tilde=c_tilde, delta=delta,
        H_u0=best["H_u0"], Hstar=best["Hstar"], G_u0=best["G_u0"],
        Gstar=best["Gstar"], errors=best["errors"],
        duality_margin=best["duality_margin"],
    )
    return config, diagnostics
