"""Discrete function spaces on the cube Q = (-1,1)^n.

Tensor-product grids (uniform, or geometrically graded toward the plane
x_n = 0), nodal grid functions, cell-centered gradients, midpoint
quadrature, finite-difference shift operators, fractional seminorms, a
dyadic-shell Wolff-type potential, and truncation + mollification.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid",
    "GridFunction",
    "gradient",
    "integrate",
    "tau_h",
    "tau2_h",
    "gagliardo_seminorm",
    "nikolskii_seminorm",
    "wolff_potential",
    "mollify_truncate",
]

_BINARY_MAGIC = b"DPGF"


def _uniform_axis(count: int) -> np.ndarray:
    if count < 2:
        raise ValueError("need at least 2 nodes per axis")
    return np.linspace(-1.0, 1.0, count)


def _graded_axis(levels: int, nodes_per_band: int, ratio: float = 0.5) -> np.ndarray:
    """Symmetric axis on [-1,1] geometrically refined toward 0.

    Bands [r^{k+1}, r^k], k = 0..levels-1, each carry nodes_per_band uniform
    cells; the innermost interval [0, r^levels] carries nodes_per_band cells
    as well.  0 is a node, so cell centers never sit on the singular plane.
    """
    if levels < 1 or nodes_per_band < 1:
        raise ValueError("levels and nodes_per_band must be >= 1")
    if not 0.0 < ratio < 1.0:
        raise ValueError("grading ratio must lie in (0,1)")
    pos = [0.0]
    lo = ratio**levels
    pos.extend(np.linspace(0.0, lo, nodes_per_band + 1)[1:])
    for k in range(levels - 1, -1, -1):
        a, b = ratio ** (k + 1), ratio**k
        pos.extend(np.linspace(a, b, nodes_per_band + 1)[1:])
    pos = np.asarray(pos)
    return np.concatenate([-pos[::-1], pos[1:]])


@dataclass(frozen=True)
class Grid:
    """Tensor grid over [-1,1]^n given by per-axis node arrays."""

    axes: tuple

    def __post_init__(self):
        for ax in self.axes:
            if abs(ax[0] + 1.0) > 1e-14 or abs(ax[-1] - 1.0) > 1e-14:
                raise ValueError("axes must span [-1, 1]")
            if np.any(np.diff(ax) <= 0):
                raise ValueError("axis nodes must be strictly increasing")

    # -- constructors -------------------------------------------------------

    @staticmethod
    def uniform(counts) -> "Grid":
        if np.isscalar(counts):
            counts = (counts, counts)
        return Grid(tuple(_uniform_axis(int(c)) for c in counts))

    @staticmethod
    def graded(count_tangential: int, levels: int, nodes_per_band: int = 4,
               ratio: float = 0.5, n: int = 2) -> "Grid":
        """Uniform in the first n-1 axes, graded toward 0 in the last."""
        axes = [_uniform_axis(count_tangential) for _ in range(n - 1)]
        axes.append(_graded_axis(levels, nodes_per_band, ratio))
        return Grid(tuple(axes))

    # -- basic geometry -----------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(len(ax) for ax in self.axes)

    @property
    def cell_shape(self) -> tuple:
        return tuple(len(ax) - 1 for ax in self.axes)

    @property
    def is_uniform(self) -> bool:
        return all(np.allclose(np.diff(ax), ax[1] - ax[0]) for ax in self.axes)

    def spacings(self) -> tuple:
        """Per-axis node spacing arrays (length = nodes - 1)."""
        return tuple(np.diff(ax) for ax in self.axes)

    def cell_volumes(self) -> np.ndarray:
        vols = np.diff(self.axes[0])
        for ax in self.axes[1:]:
            vols = np.multiply.outer(vols, np.diff(ax))
        return vols

    def cell_centers(self) -> tuple:
        """Per-axis cell-center coordinate arrays."""
        return tuple(0.5 * (ax[:-1] + ax[1:]) for ax in self.axes)

    def cell_center_points(self) -> np.ndarray:
        """Cell centers as an array of shape cell_shape + (n,)."""
        mesh = np.meshgrid(*self.cell_centers(), indexing="ij")
        return np.stack(mesh, axis=-1)

    def node_points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for axis in range(self.n):
            idx = [slice(None)] * self.n
            idx[axis] = 0
            mask[tuple(idx)] = True
            idx[axis] = -1
            mask[tuple(idx)] = True
        return mask

    def sample(self, fn) -> "GridFunction":
        """GridFunction from a callable of point arrays (shape (..., n))."""
        return GridFunction(self, np.asarray(fn(self.node_points()), dtype=float))


@dataclass
class GridFunction:
    """Nodal scalar field on a Grid."""

    grid: Grid
    values: np.ndarray
    boundary_trace: bool = field(default=True)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError("values shape %s != grid shape %s"
                             % (self.values.shape, self.grid.shape))
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function values must be finite")

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy(), self.boundary_trace)

    def boundary_values(self) -> np.ndarray:
        return self.values[self.grid.boundary_mask()]

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __add__(self, other):
        return self._binop(other, np.add)

    def __sub__(self, other):
        return self._binop(other, np.subtract)

    def __mul__(self, other):
        return self._binop(other, np.multiply)

    __rmul__ = __mul__

    def _binop(self, other, op):
        ov = other.values if isinstance(other, GridFunction) else other
        return GridFunction(self.grid, op(self.values, ov))

    # -- serialization ------------------------------------------------------

    def to_csv(self) -> str:
        pts = self.grid.node_points().reshape(-1, self.grid.n)
        out = io.StringIO()
        out.write(",".join("x%d" % (i + 1) for i in range(self.grid.n)) + ",value\n")
        for row, v in zip(pts, self.values.ravel()):
            out.write(",".join("%.17g" % c for c in row) + ",%.17g\n" % v)
        return out.getvalue()

    @staticmethod
    def from_csv(text: str) -> "GridFunction":
        lines = [ln for ln in text.strip().splitlines() if ln]
        ncols = len(lines[0].split(","))
        n = ncols - 1
        data = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])
        axes = tuple(np.unique(data[:, i]) for i in range(n))
        grid = Grid(axes)
        values = data[:, n].reshape(grid.shape)
        return GridFunction(grid, values)

    def to_binary(self) -> bytes:
        """Compact dump: magic, n, per-axis counts, axis nodes, row-major values."""
        head = _BINARY_MAGIC + struct.pack("<i", self.grid.n)
        head += struct.pack("<%di" % self.grid.n, *self.grid.shape)
        body = b"".join(np.ascontiguousarray(ax).tobytes() for ax in self.grid.axes)
        return head + body + np.ascontiguousarray(self.values).tobytes()

    @staticmethod
    def from_binary(blob: bytes) -> "GridFunction":
        if blob[:4] != _BINARY_MAGIC:
            raise ValueError("bad grid-function binary header")
        n, = struct.unpack_from("<i", blob, 4)
        counts = struct.unpack_from("<%di" % n, blob, 8)
        off = 8 + 4 * n
        axes = []
        for c in counts:
            axes.append(np.frombuffer(blob, dtype=float, count=c, offset=off).copy())
            off += 8 * c
        values = np.frombuffer(blob, dtype=float, count=int(np.prod(counts)),
                               offset=off).copy().reshape(counts)
        return GridFunction(Grid(tuple(axes)), values)


# ---------------------------------------------------------------------------
# differential / quadrature operators


def gradient(w: GridFunction) -> np.ndarray:
    """Cell-centered gradient, shape cell_shape + (n,); exact on affine data.

    Per axis: difference along that axis, averaged over the remaining node
    directions of the cell (the multilinear interpolant's gradient at the
    cell center), so bilinear data is differentiated exactly at centers.
    """
    g = w.grid
    comps = []
    for axis in range(g.n):
        d = np.diff(w.values, axis=axis)
        h = np.diff(g.axes[axis])
        h = h.reshape([-1 if k == axis else 1 for k in range(g.n)])
        d = d / h
        for other in range(g.n):
            if other != axis:
                d = 0.5 * (np.take(d, np.arange(d.shape[other] - 1), axis=other)
                           + np.take(d, np.arange(1, d.shape[other]), axis=other))
        comps.append(d)
    return np.stack(comps, axis=-1)


def integrate(grid: Grid, density: np.ndarray) -> float:
    """Midpoint quadrature: cell-volume-weighted compensated sum."""
    density = np.asarray(density, dtype=float)
    if density.shape != grid.cell_shape:
        raise ValueError("density must be cellwise (shape %s)" % (grid.cell_shape,))
    return math.fsum((density * grid.cell_volumes()).ravel())


def _shift_to_index(grid: Grid, h) -> tuple:
    """Translate a lattice vector h into per-axis index offsets (uniform grids)."""
    if not grid.is_uniform:
        raise ValueError("shift operators need a uniform grid")
    steps = []
    for ax, hc in zip(grid.axes, np.atleast_1d(h)):
        dx = ax[1] - ax[0]
        k = hc / dx
        if abs(k - round(k)) > 1e-9:
            raise ValueError("h must be a lattice vector")
        steps.append(int(round(k)))
    return tuple(steps)


def tau_h(w: GridFunction, h) -> "ShiftedDifference":
    """tau_h w = w(. + h) - w on the shrunken overlap domain."""
    steps = _shift_to_index(w.grid, h)
    sl_src, sl_dst = [], []
    for k, count in zip(steps, w.grid.shape):
        if abs(k) >= count:
            raise ValueError("|h| too large: empty overlap")
        sl_dst.append(slice(max(0, -k), count - max(0, k)))
        sl_src.append(slice(max(0, k), count + min(0, k)))
    shifted = w.values[tuple(sl_src)]
    base = w.values[tuple(sl_dst)]
    return ShiftedDifference(w.grid, shifted - base, tuple(sl_dst), steps)


def tau2_h(w: GridFunction, h) -> "ShiftedDifference":
    """Second difference tau^2_h w = w(. + 2h) - 2 w(. + h) + w."""
    steps = _shift_to_index(w.grid, h)
    window = []
    for k, count in zip(steps, w.grid.shape):
        if 2 * abs(k) >= count:
            raise ValueError("|h| too large: empty overlap")
        window.append(slice(max(0, -2 * k), count - max(0, 2 * k)))
    v0 = w.values[tuple(window)]
    v1 = _shifted_view(w.values, steps, tuple(window), 1)
    v2 = _shifted_view(w.values, steps, tuple(window), 2)
    return ShiftedDifference(w.grid, v2 - 2.0 * v1 + v0, tuple(window), steps)


def _shifted_view(values: np.ndarray, steps: tuple, window: tuple, mult: int) -> np.ndarray:
    sl = tuple(slice(wn.start + mult * k, wn.stop + mult * k)
               for wn, k in zip(window, steps))
    return values[sl]


@dataclass
class ShiftedDifference:
    """Finite-difference field living on the shrunken overlap domain."""

    grid: Grid
    values: np.ndarray
    window: tuple  # slices into the node array where the difference is defined
    steps: tuple

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


# ---------------------------------------------------------------------------
# fractional seminorms


def _subdomain_mask(grid: Grid, subdomain) -> np.ndarray:
    """Boolean node mask for a box subdomain ((lo,hi) per axis) or None = all."""
    if subdomain is None:
        return np.ones(grid.shape, dtype=bool)
    mask = np.ones(grid.shape, dtype=bool)
    for axis, (lo, hi) in enumerate(subdomain):
        coord = grid.axes[axis].reshape(
            [-1 if k == axis else 1 for k in range(grid.n)])
        mask &= (coord >= lo - 1e-14) & (coord <= hi + 1e-14)
    return mask


def _node_volumes(grid: Grid) -> np.ndarray:
    """Trapezoidal node weights (per-axis half-cell sums)."""
    w = None
    for ax in grid.axes:
        d = np.diff(ax)
        wax = np.concatenate([[d[0] / 2], (d[:-1] + d[1:]) / 2, [d[-1] / 2]])
        w = wax if w is None else np.multiply.outer(w, wax)
    return w


def gagliardo_seminorm(w: GridFunction, alpha0: float, p: float,
                       subdomain=None, cutoff: float | None = None) -> float:
    """Discrete Gagliardo seminorm [w]_{alpha0,p}: double node sum of
    |w(x)-w(y)|^p / |x-y|^{n + alpha0 p} over the subdomain.

    By default all pairs are summed exactly (the pairwise-distance matrix is
    assembled chunkwise either way, so this costs nothing extra at desk
    scale).  With a finite cutoff only pairs within that radius are summed
    and the far field is replaced by its analytic sup-norm bound.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if not 0.0 < alpha0 < 1.0:
        raise ValueError("alpha0 must lie in (0,1)")
    g = w.grid
    mask = _subdomain_mask(g, subdomain)
    pts = g.node_points()[mask]
    vals = w.values[mask]
    wts = _node_volumes(g)[mask]
    total = 0.0
    chunk = 1024
    expo = g.n + alpha0 * p
    rmax = cutoff if cutoff is not None else math.inf
    for i0 in range(0, len(pts), chunk):
        P = pts[i0:i0 + chunk]
        D = P[:, None, :] - pts[None, :, :]
        r = np.sqrt(np.sum(D * D, axis=-1))
        near = (r > 0) & (r <= rmax)
        num = np.abs(vals[i0:i0 + chunk, None] - vals[None, :]) ** p
        contrib = np.where(near, num / np.where(near, r, 1.0) ** expo, 0.0)
        total += float(np.sum(contrib * wts[None, :] * wts[i0:i0 + chunk, None]))
    tail = 0.0
    if cutoff is not None:
        # far field: |w(x)-w(y)| <= 2||w||_inf over cutoff < r <= diameter
        area = 2.0 * math.pi if g.n == 2 else 4.0 * math.pi
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        diam = float(np.sqrt(np.sum((hi - lo) ** 2)))
        vol_sub = float(np.prod(hi - lo))
        if diam > cutoff:
            radial = (cutoff ** (-alpha0 * p) - diam ** (-alpha0 * p)) / (alpha0 * p)
            tail = (2.0 * w.sup_norm()) ** p * vol_sub * area * radial
    return (total + tail) ** (1.0 / p)


def nikolskii_seminorm(w: GridFunction, alpha0: float, p: float,
                       subdomain=None, K: int = 4) -> float:
    """sup over lattice shifts |h| <= margin/K of |h|^{-alpha0} ||tau_h w||_p.

    The subdomain must leave a positive margin to the boundary so every
    admissible shift keeps x + h inside the grid.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    g = w.grid
    if not g.is_uniform:
        raise ValueError("Nikol'skii shifts need a uniform grid")
    mask = _subdomain_mask(g, subdomain)
    wts = _node_volumes(g)
    margin = 2.0  # distance from subdomain to boundary, per axis
    for axis in range(g.n):
        proj = np.any(mask, axis=tuple(a for a in range(g.n) if a != axis))
        lo_i, hi_i = np.argmax(proj), len(proj) - 1 - np.argmax(proj[::-1])
        margin = min(margin, g.axes[axis][lo_i] + 1.0, 1.0 - g.axes[axis][hi_i])
    hmax = margin / K
    dx = g.axes[0][1] - g.axes[0][0]
    kmax = int(hmax / dx)
    if kmax < 1:
        raise ValueError("subdomain margin smaller than one lattice shift")
    best = 0.0
    for steps in np.ndindex(*([2 * kmax + 1] * g.n)):
        k = np.array(steps) - kmax
        hlen = np.sqrt(np.sum((k * dx) ** 2))
        if hlen == 0 or hlen > hmax:
            continue
        diff = tau_h(w, k * dx)
        sub = mask[diff.window]
        lp = math.fsum((np.abs(diff.values[sub]) ** p
                        * wts[diff.window][sub]).ravel()) ** (1.0 / p)
        best = max(best, lp / hlen**alpha0)
    return best


# ---------------------------------------------------------------------------
# Wolff-type potential


def wolff_potential(grid: Grid, f: np.ndarray, x0, r: float,
                    sigma: float, theta: float) -> float:
    """Dyadic-shell discretization of the nonlinear potential
    P(f; x0, r) = integral_0^r rho^sigma (average of f over B_rho)^theta drho/rho.
    """
    if sigma <= 0 or theta <= 0:
        raise ValueError("sigma and theta must be positive")
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ValueError("f must be nonnegative")
    if f.shape != grid.cell_shape:
        raise ValueError("f must be cellwise")
    x0 = np.asarray(x0, dtype=float)
    if np.any(np.abs(x0) + r > 1.0 + 1e-14):
        raise ValueError("ball B_r(x0) must lie inside the cube")
    centers = grid.cell_center_points()
    dist = np.sqrt(np.sum((centers - x0) ** 2, axis=-1))
    vols = grid.cell_volumes()
    min_cell = min(float(np.min(np.diff(ax))) for ax in grid.axes)
    if r < min_cell:
        raise ValueError("radius below grid resolution")
    depth = max(1, int(math.floor(math.log2(r / min_cell))))
    total = 0.0
    for j in range(depth + 1):
        rho = r * 2.0**-j
        rho_next = r * 2.0 ** -(j + 1) if j < depth else 0.0
        inside = dist <= rho
        if not np.any(inside):
            avg = 0.0
        else:
            avg = float(np.sum(f[inside] * vols[inside]) / np.sum(vols[inside]))
        total += avg**theta * (rho**sigma - rho_next**sigma) / sigma
    return total


# ---------------------------------------------------------------------------
# truncation + mollification


def _mollifier_kernel(grid: Grid, eps: float) -> np.ndarray:
    """Normalized radially symmetric C^1 bump sampled on the node lattice."""
    offs = []
    for ax in grid.axes:
        dx = ax[1] - ax[0]
        k = int(math.floor(eps / dx))
        if k < 2:
            raise ValueError("mollification radius below 2 cells")
        offs.append(np.arange(-k, k + 1) * dx)
    mesh = np.meshgrid(*offs, indexing="ij")
    r2 = sum(m * m for m in mesh) / eps**2
    kernel = np.clip(1.0 - r2, 0.0, None) ** 2
    return kernel / kernel.sum()


def mollify_truncate(w: GridFunction, eps: float, theta_exp: float = 0.0) -> GridFunction:
    """Truncate at the level eps^{-theta_exp}, then mollify at radius eps.

    The convolution kernel has unit mass and the boundary is handled by
    nearest-value extension, so constants are reproduced exactly and the
    sup norm never increases.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0,1)")
    g = w.grid
    if not g.is_uniform:
        raise NotImplementedError("mollification needs a uniform grid")
    level = eps**-theta_exp if theta_exp > 0 else math.inf
    vals = np.clip(w.values, -level, level)
    kernel = _mollifier_kernel(g, eps)
    from scipy.ndimage import convolve

    out = convolve(vals, kernel, mode="nearest")
    return GridFunction(g, out)
