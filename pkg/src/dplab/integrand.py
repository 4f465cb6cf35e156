"""Integrand models for double-phase functionals at nearly linear growth.

The energy density is

    H(x, z) = L(z) + a(x) * (s^2 + |z|^2)^(q/2),

where L is a convex radial integrand of nearly linear growth, L(z) = f(|z|)
with f(t) = t*g(t) (product kind) or f(t) = (1+t^p)^(1/p) - 1 (area kind),
and g is a slowly growing "growth function" (constant one, log, or iterated
log).  The module exposes the density, its gradient/Hessian, the associated
modular G(x, t) = t*g(t) + a(x)*t^q, the radial primitive E used for
gradient-threshold bounds, the convex conjugate of H(x, .), and the
V-function V_{s,p}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GrowthFunction",
    "IntegrandSpec",
    "SingularGradientError",
    "ConjugateUnboundedError",
    "eval_L",
    "grad_L",
    "hess_L",
    "hessian_eigenvalues",
    "eval_H",
    "eval_modular_G",
    "eval_E_star",
    "conjugate_H",
    "conjugate_H_radial",
    "conjugate_G_radial",
    "V_sp",
]


class SingularGradientError(ValueError):
    """Gradient/Hessian requested at |z| = 0 without smoothing."""


class ConjugateUnboundedError(ValueError):
    """The convex conjugate is +infinity at the requested dual point."""


# ---------------------------------------------------------------------------
# growth functions


@dataclass(frozen=True)
class GrowthFunction:
    """Slowly growing factor g in the nearly linear model f(t) = t*g(t).

    kind = "one":           g(t) = 1
    kind = "log":           g(t) = log(1+t)
    kind = "iterated-log":  g = level-fold iterate, g_{i+1}(t) = log(1+g_i(t)),
                            g_0(t) = t  (so level=1 reproduces "log")
    """

    kind: str = "log"
    level: int = 1

    def __post_init__(self):
        if self.kind not in ("one", "log", "iterated-log"):
            raise ValueError(f"unknown growth kind {self.kind!r}")
        if self.kind == "iterated-log" and self.level < 1:
            raise ValueError("iterated-log level must be >= 1")

    @property
    def _iterations(self) -> int:
        if self.kind == "one":
            return 0
        if self.kind == "log":
            return 1
        return self.level

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "one":
            return np.ones_like(t)
        g = t
        for _ in range(self._iterations):
            g = np.log1p(g)
        return g

    def derivatives(self, t):
        """Return (g, g', g'') evaluated at t >= 0."""
        t = np.asarray(t, dtype=float)
        if self.kind == "one":
            z = np.zeros_like(t)
            return np.ones_like(t), z, z
        g, g1, g2 = t, np.ones_like(t), np.zeros_like(t)
        for _ in range(self._iterations):
            d = 1.0 + g
            g, g1, g2 = np.log1p(g), g1 / d, g2 / d - (g1 / d) ** 2
        return g, g1, g2

    def threshold(self) -> float:
        """Smallest t with g(t) >= 1 (the constant T_g in the linear bound)."""
        if self.kind == "one":
            return 0.0
        t = float(np.e - 1.0)  # exact for a single log
        for _ in range(self._iterations - 1):
            t = math.expm1(t)
        return t


# ---------------------------------------------------------------------------
# integrand specification


@dataclass(frozen=True)
class IntegrandSpec:
    """Structural data of the density H(x,z) = L(z) + a(x)*(s^2+|z|^2)^(q/2).

    kindL = "product":  L(z) = f(|z|),  f(t) = t*g(t)
    kindL = "area":     L(z) = (1+|z|^p)^(1/p) - 1  (then mu = p+1)

    ``delta_moll`` > 0 replaces |z| by (delta^2+|z|^2)^(1/2) inside f and
    shifts s to s+delta in the q-term, keeping the density smooth at the
    origin; the value at z=0 is re-subtracted so L(0) = 0 always.
    """

    growth: GrowthFunction = field(default_factory=GrowthFunction)
    kindL: str = "product"
    q: float = 1.5
    s: float = 0.0
    p: float = 2.0
    Lambda: float | None = None
    delta_moll: float = 0.0
    mu: float | None = None

    def __post_init__(self):
        if self.kindL not in ("product", "area"):
            raise ValueError(f"unknown L kind {self.kindL!r}")
        if not self.q > 1.0:
            raise ValueError("q must exceed 1")
        if not 0.0 <= self.s <= 1.0:
            raise ValueError("s must lie in [0,1]")
        if self.kindL == "area" and not self.p > 1.0:
            raise ValueError("area kind needs p > 1")
        iterated = self.kindL == "product" and self.growth.kind == "iterated-log"
        if self.Lambda is None:
            # smallest powers of two under which the structure sandwiches
            # hold on wide samples; iterated logs flatten slowly and need
            # the larger constant
            object.__setattr__(self, "Lambda", 8.0 if iterated else 4.0)
        if self.mu is None:
            # ellipticity exponent of the lower Hessian bound: the area
            # profile degenerates like (1+t^2)^(-(p+1)/2); iterated logs
            # decay faster than 1/t by log factors, absorbed into a small
            # power that grows with the iteration level
            if self.kindL == "area":
                object.__setattr__(self, "mu", self.p + 1.0)
            elif iterated:
                object.__setattr__(self, "mu", 1.0 + self.growth.level / 8.0)
            else:
                object.__setattr__(self, "mu", 1.0)
        if self.Lambda < 1.0:
            raise ValueError("Lambda must be >= 1")
        if self.mu < 1.0:
            raise ValueError("mu must be >= 1")
        if self.delta_moll < 0.0:
            raise ValueError("delta_moll must be >= 0")

    @property
    def modular_growth(self) -> GrowthFunction:
        """Growth function entering the modular G (g = 1 for area kind)."""
        return self.growth if self.kindL == "product" else GrowthFunction("one")

    # -- radial profile f and its derivatives -------------------------------

    def _area_f(self, u):
        return np.power(1.0 + np.power(u, self.p), 1.0 / self.p)

    def radial_value(self, t, delta=None):
        """f_delta(t) with f_delta(0) = 0."""
        d = self.delta_moll if delta is None else delta
        t = np.asarray(t, dtype=float)
        ell = np.hypot(t, d)
        if self.kindL == "product":
            return ell * self.growth.value(ell) - d * float(self.growth.value(d))
        return self._area_f(ell) - self._area_f(np.asarray(d, dtype=float))

    def _profile_d12(self, u):
        """(F'(u), F''(u)) for the unsmoothed radial profile F."""
        u = np.asarray(u, dtype=float)
        if self.kindL == "product":
            g, g1, g2 = self.growth.derivatives(u)
            return g + u * g1, 2.0 * g1 + u * g2
        p = self.p
        base = 1.0 + np.power(u, p)
        F1 = np.power(u, p - 1.0) * np.power(base, 1.0 / p - 1.0)
        F2 = (p - 1.0) * np.power(u, p - 2.0) * np.power(base, 1.0 / p - 2.0)
        return F1, F2

    def radial_d1(self, t, delta=None):
        d = self.delta_moll if delta is None else delta
        t = np.asarray(t, dtype=float)
        ell = np.hypot(t, d)
        F1, _ = self._profile_d12(ell)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(ell > 0.0, F1 * t / np.where(ell > 0, ell, 1.0), 0.0)
        return out

    def radial_d2(self, t, delta=None):
        d = self.delta_moll if delta is None else delta
        t = np.asarray(t, dtype=float)
        ell = np.hypot(t, d)
        F1, F2 = self._profile_d12(ell)
        with np.errstate(invalid="ignore", divide="ignore"):
            safe = np.where(ell > 0, ell, 1.0)
            return np.where(
                ell > 0.0,
                F2 * (t / safe) ** 2 + F1 * d**2 / safe**3,
                F2,
            )


# ---------------------------------------------------------------------------
# densities, gradients, Hessians


def _norm(z):
    z = np.asarray(z, dtype=float)
    return z, np.sqrt(np.sum(z * z, axis=-1))


def eval_L(spec: IntegrandSpec, z, delta=None):
    """L(z) (with the spec's smoothing folded in); L(0) = 0."""
    _, r = _norm(z)
    return spec.radial_value(r, delta=delta)


def grad_L(spec: IntegrandSpec, z, delta=None):
    d = spec.delta_moll if delta is None else delta
    z, r = _norm(z)
    if d == 0.0 and np.any(r == 0.0):
        raise SingularGradientError("grad_L at z = 0 requires delta_moll > 0")
    slope = spec.radial_d1(r, delta=d)
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(r > 0.0, slope / np.where(r > 0, r, 1.0), spec.radial_d2(0.0, delta=d))
    return scale[..., None] * z


def hess_L(spec: IntegrandSpec, z, delta=None):
    d = spec.delta_moll if delta is None else delta
    z, r = _norm(z)
    if d == 0.0 and np.any(r == 0.0):
        raise SingularGradientError("hess_L at z = 0 requires delta_moll > 0")
    rad = spec.radial_d2(r, delta=d)
    with np.errstate(invalid="ignore", divide="ignore"):
        tan = np.where(r > 0.0, spec.radial_d1(r, delta=d) / np.where(r > 0, r, 1.0), rad)
    n = z.shape[-1]
    eye = np.eye(n)
    with np.errstate(invalid="ignore", divide="ignore"):
        zhat = np.where(r[..., None] > 0.0, z / np.where(r[..., None] > 0, r[..., None], 1.0), 0.0)
    proj = zhat[..., :, None] * zhat[..., None, :]
    return rad[..., None, None] * proj + tan[..., None, None] * (eye - proj)


def hessian_eigenvalues(spec: IntegrandSpec, z, delta=None):
    """Radial and tangential eigenvalues (f''(r), f'(r)/r) of hess_L."""
    d = spec.delta_moll if delta is None else delta
    _, r = _norm(z)
    if d == 0.0 and np.any(r == 0.0):
        raise SingularGradientError("Hessian at z = 0 requires delta_moll > 0")
    rad = spec.radial_d2(r, delta=d)
    with np.errstate(invalid="ignore", divide="ignore"):
        tan = np.where(r > 0.0, spec.radial_d1(r, delta=d) / np.where(r > 0, r, 1.0), rad)
    return rad, tan


def eval_H(spec: IntegrandSpec, a, z, delta=None, sigma=0.0):
    """H(x,z) = L(z) + (a(x)+sigma) * (s_eff^2 + |z|^2)^(q/2).

    ``sigma`` adds the coefficient shift of the regularized problems; the
    smoothing shifts s to s + delta as well.
    """
    d = spec.delta_moll if delta is None else delta
    a = np.asarray(a, dtype=float)
    _, r = _norm(z)
    s_eff = spec.s + d
    return spec.radial_value(r, delta=d) + (a + sigma) * np.power(
        s_eff**2 + r**2, 0.5 * spec.q
    )


def eval_modular_G(spec: IntegrandSpec, a, z):
    """Modular G(x, |z|) = |z| g(|z|) + a(x) |z|^q (growth part only)."""
    a = np.asarray(a, dtype=float)
    _, r = _norm(z)
    return r * spec.modular_growth.value(r) + a * np.power(r, spec.q)


def eval_E_star(spec: IntegrandSpec, a, t):
    """Radial primitive E(x,t) of the gradient-threshold bound.

    E(x,t) = (1/(2-mu)) * ((1+t^2)^((2-mu)/2) - 1)
             + (a(x)/q) * ((s^2+t^2)^(q/2) - s^q),

    defined only in the degenerate-ellipticity range mu < 2.
    """
    mu = spec.mu
    if mu >= 2.0:
        raise ValueError(f"E is defined only for mu < 2 (got mu = {mu})")
    a = np.asarray(a, dtype=float)
    t = np.asarray(t, dtype=float)
    ell1 = np.sqrt(1.0 + t * t)
    ells = np.sqrt(spec.s**2 + t * t)
    return (np.power(ell1, 2.0 - mu) - 1.0) / (2.0 - mu) + (a / spec.q) * (
        np.power(ells, spec.q) - spec.s**spec.q
    )


# ---------------------------------------------------------------------------
# convex conjugates


def _conjugate_radial(value_fn, slope_fn, w, iters=160):
    """Vectorized sup_{t>=0} (w*t - profile(t)) for a convex radial profile.

    ``value_fn``/``slope_fn`` evaluate the profile and its derivative on
    arrays.  Returns the array of conjugate values.  Raises
    ConjugateUnboundedError if the slope never catches up with w.
    """
    w = np.asarray(w, dtype=float)
    hi = np.ones_like(w)
    for _ in range(80):
        active = w - slope_fn(hi) > 0.0
        if not np.any(active):
            break
        hi = np.where(active, 2.0 * hi, hi)
    else:
        raise ConjugateUnboundedError("conjugate is unbounded at the requested point")
    lo = np.zeros_like(w)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    for _ in range(iters):
        h = hi - lo
        c = hi - invphi * h
        d = lo + invphi * h
        fc = w * c - value_fn(c)
        fd = w * d - value_fn(d)
        take_left = fc >= fd
        hi = np.where(take_left, d, hi)
        lo = np.where(take_left, lo, c)
        if np.max(hi - lo) < 1e-14 * (1.0 + np.max(hi)):
            break
    t = 0.5 * (lo + hi)
    val = w * t - value_fn(t)
    return np.maximum(val, -value_fn(np.zeros_like(w)))


def conjugate_H_radial(spec: IntegrandSpec, a, wnorm):
    """H*(x, w) as a function of (a(x), |w|), vectorized over arrays."""
    a = np.asarray(a, dtype=float)
    wnorm = np.asarray(wnorm, dtype=float)
    a, wnorm = np.broadcast_arrays(a, wnorm)
    q, s = spec.q, spec.s + spec.delta_moll

    def value_fn(t):
        return spec.radial_value(t) + a * np.power(s * s + t * t, 0.5 * q)

    def slope_fn(t):
        return spec.radial_d1(t) + a * q * np.power(s * s + t * t, 0.5 * q - 1.0) * t

    return _conjugate_radial(value_fn, slope_fn, np.abs(wnorm))


def conjugate_H(spec: IntegrandSpec, a, w, radial_tol=1e-10):
    """Convex conjugate H*(x, w) = sup_z (<w,z> - H(x,z)) at a single x."""
    _, r = _norm(w)
    out = conjugate_H_radial(spec, a, r)
    return out if out.ndim else float(out)


def conjugate_G_radial(spec: IntegrandSpec, a, wnorm):
    """Conjugate of the modular t -> t g(t) + a t^q, vectorized."""
    a = np.asarray(a, dtype=float)
    wnorm = np.asarray(wnorm, dtype=float)
    a, wnorm = np.broadcast_arrays(a, wnorm)
    q = spec.q
    gf = spec.modular_growth

    def value_fn(t):
        return t * gf.value(t) + a * np.power(t, q)

    def slope_fn(t):
        g, g1, _ = gf.derivatives(t)
        return g + t * g1 + a * q * np.power(t, q - 1.0)

    return _conjugate_radial(value_fn, slope_fn, np.abs(wnorm))


# ---------------------------------------------------------------------------
# V-function


def V_sp(s: float, p: float, z):
    """V_{s,p}(z) = (s^2 + |z|^2)^((p-2)/4) * z."""
    z, r = _norm(z)
    base = s * s + r * r
    if p < 2.0 and s == 0.0:
        scale = np.where(r > 0.0, np.power(np.where(base > 0, base, 1.0), (p - 2.0) / 4.0), 0.0)
    else:
        scale = np.power(base, (p - 2.0) / 4.0)
    return scale[..., None] * z
