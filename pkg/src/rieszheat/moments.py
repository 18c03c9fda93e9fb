"""Monte Carlo L^p moduli of continuity and Holder-exponent regression.

The increment moment targets are power laws in the space-time modulus: at
order p the spatial moment scales like |x - y|^((2-beta) p / 2) and the
temporal one like |t - s|^((2-beta) p / 4), so log-log regression of moment
against lag estimates those exponents.

Variance control: all lags of a study are evaluated on the *same* paths
(common random numbers), which makes neighboring-lag moment errors strongly
correlated and the fitted slope far tighter than independent runs would be.
Lags are dyadic multiples of the lattice spacing starting at 2h (skipping h
avoids the strongest discretization bias); temporal lags are dyadic
multiples of 4 dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gaussian import PairGeometry
from .kernels import KernelParams
from .mc import map_path_chunks
from .noise import GridSpec
from .solver import Coefficients, evolve

__all__ = ["IncrementProbe", "increment_moment", "holder_exponent_fit",
           "exponent_experiment", "dyadic_spatial_lags",
           "dyadic_temporal_lags"]

MIN_PATHS = 100


@dataclass(frozen=True)
class IncrementProbe:
    """One estimated increment moment E |u(t,x) - u(s,y)|^p."""

    pair: PairGeometry
    p: float
    estimate: float
    stderr: float
    n_paths: int

    def __post_init__(self):
        if self.n_paths < MIN_PATHS:
            raise ValueError(f"need at least {MIN_PATHS} paths, got {self.n_paths}")
        if self.estimate < 0 or self.stderr < 0:
            raise ValueError("estimate and stderr must be nonnegative")


def increment_moment(samples_a: np.ndarray, samples_b: np.ndarray, p: float,
                     pair: PairGeometry) -> IncrementProbe:
    """Empirical mean of ||U - V||^p over paired samples of shape (N, d).

    The standard error comes from the sample variance of the p-th powers.
    """
    if p < 2:
        raise ValueError(f"moment order must be >= 2, got {p}")
    a = np.atleast_2d(np.asarray(samples_a, float))
    b = np.atleast_2d(np.asarray(samples_b, float))
    if a.shape != b.shape:
        raise ValueError("paired samples must share a shape")
    n = a.shape[0]
    if n < MIN_PATHS:
        raise ValueError(f"need at least {MIN_PATHS} paths, got {n}")
    powers = np.sum((a - b) ** 2, axis=1) ** (p / 2.0)
    est = float(powers.mean())
    se = float(powers.std(ddof=1) / math.sqrt(n))
    return IncrementProbe(pair=pair, p=p, estimate=est, stderr=se, n_paths=n)


def holder_exponent_fit(lags, moments):
    """OLS slope of log moment on log lag, with its standard error.

    Requires at least 5 lags spanning >= 1.5 decades and positive moments.
    """
    lags = np.asarray(lags, float)
    moments = np.asarray(moments, float)
    if lags.size < 5:
        raise ValueError(f"need >= 5 lags, got {lags.size}")
    if np.log10(lags.max() / lags.min()) < 1.5 - 1e-9:
        raise ValueError("lags must span at least 1.5 decades")
    bad = np.nonzero(moments <= 0)[0]
    if bad.size:
        raise ValueError(f"nonpositive moment at lag {lags[bad[0]]}")
    x = np.log(lags)
    y = np.log(moments)
    xc = x - x.mean()
    slope = float(np.dot(xc, y) / np.dot(xc, xc))
    intercept = float(y.mean() - slope * x.mean())
    resid = y - slope * x - intercept
    dof = max(1, lags.size - 2)
    se = float(math.sqrt(np.dot(resid, resid) / dof / np.dot(xc, xc)))
    return slope, se


def dyadic_spatial_lags(grid: GridSpec, n_lags: int = 6):
    """Cell counts {2, 4, ..., 2^n_lags}; largest must stay within L/8."""
    cells = [2 ** j for j in range(1, n_lags + 1)]
    if cells[-1] * grid.spacing > grid.length / 8.0 + 1e-12:
        raise ValueError(
            f"largest lag {cells[-1]} cells exceeds the L/8 probe region")
    return cells

def dyadic_temporal_lags(n_lags: int = 6):
    """Step counts {4, 8, ..., 4 * 2^(n_lags-1)}."""
    return [4 * 2 ** j for j in range(n_lags)]


def exponent_experiment(grid: GridSpec, params: KernelParams,
                        coeffs: Coefficients, *, p: float = 2.0,
                        n_paths: int = 2000, seed: int = 0,
                        spatial_t: float = 1.0, temporal_t0: float = 0.5,
                        n_spatial_lags: int = 6, n_temporal_lags: int = 6,
                        workers=None):
    """Joint spatial/temporal increment study on common paths.

    Each path is evolved once; the full field at ``spatial_t`` gives all
    spatial increments at the reference cell, and the field value at the
    reference cell at ``temporal_t0 + lag`` gives the temporal ones.
    Returns per-lag probes plus the two fitted exponents.
    """
    if grid.k != 1:
        raise ValueError("exponent studies are defined on k = 1 grids")
    d = coeffs.d
    m_sp = int(round(spatial_t / grid.dt))
    m0 = int(round(temporal_t0 / grid.dt))
    sp_cells = dyadic_spatial_lags(grid, n_spatial_lags)
    tm_steps = dyadic_temporal_lags(n_temporal_lags)
    if m0 + tm_steps[-1] > m_sp:
        raise ValueError("temporal window overruns the spatial snapshot time")
    observe = sorted({m_sp, m0, *(m0 + s for s in tm_steps)})
    x0 = 0

    def chunk_fn(idx):
        field_T = None
        series = {}
        for i, t, u in evolve(grid, params, coeffs, n_steps=m_sp, seed=seed,
                              paths=idx, observe=observe):
            if i == m_sp:
                field_T = u.copy()
            if i == m0 or i - m0 in tm_steps:
                series[i] = u[:, :, x0].copy()
        return field_T, series

    parts = map_path_chunks(chunk_fn, n_paths, workers=workers)
    field = np.concatenate([pt[0] for pt in parts], axis=0)
    series = {i: np.concatenate([pt[1][i] for pt in parts], axis=0)
              for i in parts[0][1]}

    h = grid.spacing
    spatial = {"lags": [], "probes": []}
    base = field[:, :, x0]
    for cells in sp_cells:
        lag = cells * h
        pair = PairGeometry(s=spatial_t, t=spatial_t, y=[x0 * h],
                            x=[(x0 + cells) * h], beta=params.beta)
        probe = increment_moment(base, field[:, :, x0 + cells], p, pair)
        spatial["lags"].append(lag)
        spatial["probes"].append(probe)
    slope, se = holder_exponent_fit(
        spatial["lags"], [q.estimate for q in spatial["probes"]])
    spatial["slope"], spatial["stderr"] = slope, se
    spatial["target"] = (2.0 - params.beta) * p / 2.0

    temporal = {"lags": [], "probes": []}
    anchor = series[m0]
    for steps in tm_steps:
        lag = steps * grid.dt
        pair = PairGeometry(s=temporal_t0, t=temporal_t0 + lag, y=[x0 * h],
                            x=[x0 * h], beta=params.beta)
        probe = increment_moment(series[m0 + steps], anchor, p, pair)
        temporal["lags"].append(lag)
        temporal["probes"].append(probe)
    slope, se = holder_exponent_fit(
        temporal["lags"], [q.estimate for q in temporal["probes"]])
    temporal["slope"], temporal["stderr"] = slope, se
    temporal["target"] = (2.0 - params.beta) * p / 4.0

    return {"spatial": spatial, "temporal": temporal,
            "n_paths": n_paths, "p": p, "seed": seed}
