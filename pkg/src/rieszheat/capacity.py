"""Riesz-kernel capacities of compact sets by energy minimization.

Conventions (imported from the standard potential-theory framework the
hitting bound delegates to):

* index q > 0:  kernel r^(-q); capacity = 1 / (minimal energy over
  probability measures on the set);
* index q = 0:  logarithmic kernel log_+(e/r);
* index q < 0:  kernel = 1, so every nonempty set has capacity exactly 1.

Discrete measures live on cell centers of a lattice discretization; each
node carries the exact cell-averaged self-energy (closed form for segments,
equal-volume-ball distance-density quadrature for d >= 2 cells), which is
what keeps the minimizer from collapsing onto single nodes.

The energy E(w) = w^T K w is minimized over the probability simplex by
projected gradient with Armijo backtracking until the relative energy
change drops below 1e-8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betainc

from .kernels import surface_area
from .quadrature import gauss_panels, power_panel

__all__ = ["CompactSet", "CapacityResult", "critical_dimension", "energy",
           "capacity", "riesz_kernel", "ball_distance_density"]

LOG_KERNEL_CAP = 1e12
MAX_ITERS = 100_000
CONV_TOL = 1e-8


def critical_dimension(d: int, k: int, beta: float) -> float:
    """Capacity index governing hitting probabilities: d - (4 + 2k)/(2 - beta)."""
    if d < 1 or k < 1:
        raise ValueError("dimensions must be >= 1")
    if not 0.0 < beta < min(2.0, float(k)):
        raise ValueError(f"need 0 < beta < min(2, k), got beta={beta}, k={k}")
    return d - (4.0 + 2.0 * k) / (2.0 - beta)


def riesz_kernel(r, index: float):
    """kappa_index(r): r^-index (q > 0), log_+(e/r) capped (q = 0), 1 (q < 0)."""
    r = np.asarray(r, dtype=float)
    if index > 0:
        with np.errstate(divide="ignore"):
            return r ** (-index)
    if index == 0:
        with np.errstate(divide="ignore"):
            val = np.log(np.minimum(np.e / r, LOG_KERNEL_CAP))
        return np.maximum(val, 0.0)
    return np.ones_like(r)


@dataclass(frozen=True)
class CompactSet:
    """Compact target: point, axis-box, ball, or finite point cloud in R^d.

    ``cells_per_axis`` controls the lattice discretization; ``pitch``
    overrides it with an absolute cell size so that nested sets share a
    lattice (needed for exact monotonicity comparisons).
    """

    kind: str
    dim: int
    center: tuple = ()
    radius: float = 0.0
    halfwidth: tuple = ()
    points: tuple = ()
    cells_per_axis: int = 8
    pitch: float | None = None
    bound: float = 64.0

    def __post_init__(self):
        if self.kind not in ("point", "axis-box", "ball", "finite-point-cloud"):
            raise ValueError(f"unknown set kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")
        center = tuple(float(c) for c in (self.center or (0.0,) * self.dim))
        object.__setattr__(self, "center", center)
        if len(center) != self.dim:
            raise ValueError("center must have dim coordinates")
        if self.kind == "ball" and not self.radius > 0:
            raise ValueError("ball needs a positive radius")
        if self.kind == "axis-box":
            hw = tuple(float(h) for h in self.halfwidth)
            if len(hw) != self.dim or any(h < 0 for h in hw):
                raise ValueError("axis-box needs dim nonnegative half-widths")
            object.__setattr__(self, "halfwidth", hw)
        if self.kind == "finite-point-cloud":
            pts = tuple(tuple(float(x) for x in p) for p in self.points)
            if not pts or any(len(p) != self.dim for p in pts):
                raise ValueError("point cloud needs nonempty dim-points")
            object.__setattr__(self, "points", pts)
        if self.cells_per_axis < 1:
            raise ValueError("cells_per_axis must be >= 1")
        if self.extent() > self.bound:
            raise ValueError(f"set exceeds the declared bound [{-self.bound}, "
                             f"{self.bound}]^d")

    def extent(self) -> float:
        if self.kind == "point":
            return max(abs(c) for c in self.center)
        if self.kind == "ball":
            return max(abs(c) for c in self.center) + self.radius
        if self.kind == "axis-box":
            return max(abs(c) + h for c, h in zip(self.center, self.halfwidth))
        return max(abs(x) for p in self.points for x in p)

    def is_pointlike(self) -> bool:
        if self.kind in ("point", "finite-point-cloud"):
            return True
        if self.kind == "axis-box":
            return all(h == 0 for h in self.halfwidth)
        return False

    def discretize(self):
        """Lattice nodes (m, dim), per-node cell size, effective cell dim."""
        c = np.asarray(self.center)
        if self.kind == "point":
            return c[None, :], 0.0, 0
        if self.kind == "finite-point-cloud":
            return np.asarray(self.points, dtype=float), 0.0, 0
        if self.kind == "ball":
            h = self.pitch or (2.0 * self.radius / self.cells_per_axis)
            axes = [_lattice_axis(ci - self.radius, ci + self.radius, h)
                    for ci in c]
            grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
            nodes = grid.reshape(-1, self.dim)
            keep = np.sum((nodes - c) ** 2, axis=1) <= self.radius ** 2
            return nodes[keep], h, self.dim
        # axis-box, possibly degenerate along some axes
        live = [i for i, hw in enumerate(self.halfwidth) if hw > 0]
        h = self.pitch or (2.0 * max(self.halfwidth) / self.cells_per_axis)
        axes = []
        for i, hw in enumerate(self.halfwidth):
            if hw == 0:
                axes.append(np.array([c[i]]))
            else:
                axes.append(_lattice_axis(c[i] - hw, c[i] + hw, h))
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return grid.reshape(-1, self.dim), h, len(live)


def _lattice_axis(lo, hi, pitch):
    """Cell centers of the global lattice of the given pitch inside [lo, hi].

    The lattice is anchored at 0 so that nested sets discretized with one
    pitch produce nested node sets.
    """
    first = math.ceil((lo - 0.5 * pitch) / pitch)
    last = math.floor((hi - 0.5 * pitch) / pitch)
    if last < first:
        return np.array([0.5 * (lo + hi)])
    return (np.arange(first, last + 1) + 0.5) * pitch


@dataclass
class CapacityResult:
    set: CompactSet
    index: float
    value: float
    measure: np.ndarray
    energy: float
    iterations: int


def ball_distance_density(d: int, r):
    """Density of |X - Y| for X, Y uniform in the unit ball of R^d."""
    r = np.asarray(r, dtype=float)
    x = np.clip(1.0 - 0.25 * r * r, 0.0, 1.0)
    return d * r ** (d - 1) * betainc((d + 1) / 2.0, 0.5, x)


def _cell_self_energy(cell: float, eff_dim: int, index: float) -> float:
    """Cell-averaged self-energy E kappa(|X - Y|) over one lattice cell.

    Exact closed forms for segments; for eff_dim >= 2 the cubic cell is
    replaced by the ball of equal volume and integrated against the exact
    distance density.  Returns inf when the kernel is not integrable on the
    cell (index >= effective dimension), which forces zero capacity.
    """
    if index < 0:
        return 1.0
    if cell == 0.0 or eff_dim == 0:
        return math.inf
    if index >= eff_dim:
        return math.inf
    if eff_dim == 1:
        if index == 0:
            # E log(e/|X-Y|) over a segment: 5/2 - log(cell) for cell <= e
            return 2.5 - math.log(cell)
        return 2.0 * cell ** (-index) / ((1.0 - index) * (2.0 - index))
    r_eq = cell * (eff_dim / surface_area(eff_dim)) ** (1.0 / eff_dim)
    dens = lambda rho: ball_distance_density(eff_dim, rho)
    if index > 0:
        # near 0 the density vanishes like rho^(d-1), so the integrable
        # singular exponent is d - 1 - q > -1
        head = r_eq ** (-index) * power_panel(
            lambda rho: dens(rho) / rho ** (eff_dim - 1), 0.5,
            eff_dim - 1.0 - index, order=32)
        tail = gauss_panels(lambda rho: dens(rho) * (rho * r_eq) ** (-index),
                            np.linspace(0.5, 2.0, 13), order=12)
        return head + tail
    return gauss_panels(lambda rho: dens(rho) * riesz_kernel(rho * r_eq, 0.0),
                        np.geomspace(1e-9, 2.0, 60), order=12)


def energy(nodes, weights, index: float, self_energies=None) -> float:
    """Discrete Riesz energy sum_{i != j} w_i w_j kappa(|x_i - x_j|) plus
    the self terms sum_i w_i^2 self_i (zero when no self energies given)."""
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    w = np.asarray(weights, dtype=float)
    if w.shape[0] != nodes.shape[0]:
        raise ValueError("weights and nodes disagree")
    if abs(w.sum() - 1.0) > 1e-12:
        raise ValueError(f"weights must sum to 1, got {w.sum()}")
    if np.any(w < -1e-15):
        raise ValueError("weights must be nonnegative")
    diff = nodes[:, None, :] - nodes[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    off = ~np.eye(len(w), dtype=bool)
    if index > 0 and np.any(dist[off] == 0.0):
        raise ValueError("coincident distinct nodes with a singular kernel")
    kmat = np.zeros_like(dist)
    kmat[off] = riesz_kernel(dist[off], index)
    total = float(w @ kmat @ w)
    if self_energies is not None:
        total += float(np.sum(w * w * np.asarray(self_energies)))
    return total


def _project_simplex(v):
    """Euclidean projection onto the probability simplex (sort algorithm)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(v) + 1)
    cond = u - css / idx > 0
    rho = idx[cond][-1]
    theta = css[cond][-1] / rho
    return np.maximum(v - theta, 0.0)


def capacity(cs: CompactSet, index: float) -> CapacityResult:
    """Capacity of a compact set at the given kernel index.

    index < 0 short-circuits to 1 for any nonempty set; point-like sets
    (and any set whose effective dimension the kernel index reaches) have
    capacity 0 for index > 0.
    """
    if index < 0:
        nodes, _, _ = cs.discretize()
        w = np.full(len(nodes), 1.0 / len(nodes))
        return CapacityResult(set=cs, index=index, value=1.0, measure=w,
                              energy=1.0, iterations=0)
    nodes, cell, eff_dim = cs.discretize()
    m = len(nodes)
    if index > 0 and (cs.is_pointlike() or index >= eff_dim):
        return CapacityResult(set=cs, index=index, value=0.0,
                              measure=np.zeros(m), energy=math.inf,
                              iterations=0)
    if index == 0 and cs.is_pointlike() and m == 1:
        return CapacityResult(set=cs, index=index, value=0.0,
                              measure=np.ones(1), energy=math.inf,
                              iterations=0)
    self_e = _cell_self_energy(cell, eff_dim, index)
    diff = nodes[:, None, :] - nodes[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    off = ~np.eye(m, dtype=bool)
    kmat = np.empty((m, m))
    kmat[off] = riesz_kernel(dist[off], index)
    kmat[~off] = self_e if math.isfinite(self_e) else LOG_KERNEL_CAP
    w = np.full(m, 1.0 / m)
    e_cur = float(w @ kmat @ w)
    alpha = 1.0 / (2.0 * float(np.abs(kmat).sum(axis=1).max()))
    it = 0
    for it in range(1, MAX_ITERS + 1):
        grad = 2.0 * (kmat @ w)
        w_new = _project_simplex(w - alpha * grad)
        e_new = float(w_new @ kmat @ w_new)
        backtracks = 0
        while e_new > e_cur + 1e-4 * float(grad @ (w_new - w)) and backtracks < 60:
            alpha *= 0.5
            w_new = _project_simplex(w - alpha * grad)
            e_new = float(w_new @ kmat @ w_new)
            backtracks += 1
        if e_new > e_cur:
            break
        done = abs(e_cur - e_new) <= CONV_TOL * abs(e_cur)
        w, e_cur = w_new, e_new
        if done:
            break
        if backtracks == 0:
            alpha *= 1.3
    else:
        raise RuntimeError(
            f"capacity minimization did not converge in {MAX_ITERS} "
            f"iterations; last energy {e_cur}")
    return CapacityResult(set=cs, index=index, value=1.0 / e_cur, measure=w,
                          energy=e_cur, iterations=it)
