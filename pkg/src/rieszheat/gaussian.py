"""Exact covariance oracle for the additive-noise (Gaussian) solution.

For sigma = Id, b = 0 the solution is a centered Gaussian field whose
component covariance reduces to radial quadrature:

    Var u_1(t, x)                = variance_rate(t)
    Cov(u_1(s, y), u_1(t, x))    = c omega int_0^inf dr r^(beta-3)
         Lambda_k(r |x-y|) (e^(-(t-s) r^2 / 2) - e^(-(t+s) r^2 / 2)).

From it, the covariance of Z = (u_1(s,y), u_1(t,x) - u_1(s,y)) is assembled
by the linear map (a, b) -> (a, b - a).  The full 2d x 2d matrix is this
2 x 2 pattern tensored with the d-identity (components are i.i.d.), so its
smallest eigenvalue equals the 2 x 2 one for every d.

The deterministic shadow of the inverse-moment eigenvalue bound is the grid
statement lambda_min / Delta >= const > 0, with Delta the natural modulus
|t-s|^((2-beta)/2) + |x-y|^(2-beta); the density-envelope check compares the
explicit Gaussian joint density of (u(s,y), u(t,x)) against
Delta^(-d/2) [Delta^2/|z1-z2|^2 ^ 1]^(p/(2d)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import (KernelParams, sphere_mean_cos, spectral_constant,
                      surface_area, variance_rate)
from .kernels import _osc_tail  # shared oscillatory-tail model
from .quadrature import radial_integral

__all__ = ["PairGeometry", "ZCovariance", "cov_pair",
           "malliavin_matrix_gaussian", "density_envelope_check",
           "eigenvalue_ratio_grid", "density_ratio_grid"]


@dataclass(frozen=True)
class PairGeometry:
    """Space-time pair (s, y), (t, x) with the natural modulus Delta."""

    s: float
    t: float
    y: np.ndarray
    x: np.ndarray
    beta: float
    delta_mod: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.s <= self.t:
            raise ValueError(f"need 0 < s <= t, got s={self.s}, t={self.t}")
        object.__setattr__(self, "y", np.atleast_1d(np.asarray(self.y, float)))
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, float)))
        lag = float(np.linalg.norm(self.x - self.y))
        if self.t == self.s and lag == 0.0:
            raise ValueError("(s, y) and (t, x) must differ")
        mod = (self.t - self.s) ** ((2.0 - self.beta) / 2.0) + \
            lag ** (2.0 - self.beta)
        object.__setattr__(self, "delta_mod", mod)

    @property
    def lag(self) -> float:
        return float(np.linalg.norm(self.x - self.y))


@dataclass
class ZCovariance:
    """2 x 2 covariance pattern of (u_1(s,y), u_1(t,x) - u_1(s,y)) plus its
    smallest eigenvalue (the 2d x 2d matrix is blocks (x) I_d)."""

    blocks: np.ndarray
    lambda_min: float


def _cross_covariance(pair: PairGeometry, params: KernelParams) -> float:
    """Cov(u_1(s,y), u_1(t,x)) by radial quadrature."""
    s, t, lag = pair.s, pair.t, pair.lag
    a = t - s
    c = spectral_constant(params).c_k_beta
    k, b = params.k, params.beta

    def h(r):
        bracket = np.exp(-0.5 * a * r * r) * (-np.expm1(-s * r * r))
        return sphere_mean_cos(k, lag * r) / (r * r) * bracket

    scales = [1.0 / math.sqrt(s)]
    if a > 0:
        scales.append(1.0 / math.sqrt(a))
    if lag > 0:
        scales.append(1.0 / lag)
    if a > 0:
        tail = ("gauss", 1.0 / math.sqrt(a))
    elif lag > 0:
        tail = _osc_tail(k, b, lag)
    else:
        tail = ("power", b - 3.0, 1.0)
    period = 2.0 * math.pi / lag if lag > 0 else None
    integral = radial_integral(h, b - 1.0, scale=min(scales), tail=tail,
                               tol=params.quad_tol, osc_period=period,
                               name="cross-covariance")
    return c * surface_area(k) * integral


def cov_pair(pair: PairGeometry, params: KernelParams) -> np.ndarray:
    """2 x 2 covariance of (u_1(s, y), u_1(t, x)); positive semidefinite."""
    if abs(pair.beta - params.beta) > 1e-12:
        raise ValueError("pair and params disagree on beta")
    v_s = variance_rate(pair.s, params)
    v_t = variance_rate(pair.t, params)
    if pair.t == pair.s and pair.lag == 0.0:
        cross = v_t
    else:
        cross = _cross_covariance(pair, params)
    cov = np.array([[v_s, cross], [cross, v_t]])
    lo = float(np.linalg.eigvalsh(cov)[0])
    if lo < -params.quad_tol * np.trace(cov):
        raise ArithmeticError(f"covariance indefinite: min eigenvalue {lo}")
    return cov


def malliavin_matrix_gaussian(pair: PairGeometry,
                              params: KernelParams) -> ZCovariance:
    """Deterministic covariance of Z = (u_1(s,y), u_1(t,x) - u_1(s,y)).

    Push-forward of cov_pair under (a, b) -> (a, b - a); the eigenvalue
    comes from the closed 2 x 2 formula.  Only pairs with t - s < 1 are
    admitted (the range of the inverse-moment bound being shadowed).
    """
    if not pair.t - pair.s < 1.0:
        raise ValueError("eigenvalue checks require t - s < 1")
    cov = cov_pair(pair, params)
    v_s, cross, v_t = cov[0, 0], cov[0, 1], cov[1, 1]
    blocks = np.array([
        [v_s, cross - v_s],
        [cross - v_s, v_t - 2.0 * cross + v_s]])
    half_tr = 0.5 * (blocks[0, 0] + blocks[1, 1])
    gap = math.hypot(0.5 * (blocks[0, 0] - blocks[1, 1]), blocks[0, 1])
    lam = half_tr - gap
    if lam < -params.quad_tol * 2.0 * half_tr:
        raise ArithmeticError(f"Z-covariance indefinite: lambda_min {lam}")
    return ZCovariance(blocks=blocks, lambda_min=max(lam, 0.0))


def density_envelope_check(pair: PairGeometry, z1, z2, p: float,
                           params: KernelParams, d: int = 1) -> float:
    """Ratio of the exact joint density of (u(s,y), u(t,x)) at (z1, z2) to
    the envelope Delta^(-d/2) [Delta^2/|z1-z2|^2 ^ 1]^(p/(2d)) (c = 1).

    Components are i.i.d., so the 2d-dimensional density is a product of d
    bivariate normal factors sharing one 2 x 2 covariance.
    """
    if p < 1:
        raise ValueError("order p must be >= 1")
    z1 = np.atleast_1d(np.asarray(z1, float))
    z2 = np.atleast_1d(np.asarray(z2, float))
    if z1.shape != (d,) or z2.shape != (d,):
        raise ValueError(f"z1, z2 must be points in R^{d}")
    cov = cov_pair(pair, params)
    det = float(np.linalg.det(cov))
    if det <= 0.0:
        raise ArithmeticError(
            "singular pair covariance; enlarge the space-time modulus Delta")
    inv = np.linalg.inv(cov)
    log_density = 0.0
    for i in range(d):
        v = np.array([z1[i], z2[i]])
        log_density += -0.5 * float(v @ inv @ v) \
            - math.log(2.0 * math.pi) - 0.5 * math.log(det)
    delta = pair.delta_mod
    sep2 = float(np.sum((z1 - z2) ** 2))
    min_term = min(delta * delta / sep2, 1.0) if sep2 > 0 else 1.0
    log_env = -0.5 * d * math.log(delta) + (p / (2.0 * d)) * math.log(min_term)
    return math.exp(log_density - log_env)


def canonical_pair_grid(params: KernelParams, n_dt: int = 5, n_lag: int = 5,
                        s0: float = 0.5, dt_range=(1e-4, 0.5),
                        lag_range=(1e-2, 1.0)):
    """Log grids over t - s and |x - y| anchored at s = s0.

    Default ranges are the eigenvalue-check sweep.  Grids are endpoint
    anchored, so doubling n_* minus one yields a superset of the coarse grid.
    """
    dts = np.geomspace(*dt_range, n_dt)
    lags = np.geomspace(*lag_range, n_lag)
    pairs = []
    for a in dts:
        for lag in lags:
            pairs.append(PairGeometry(
                s=s0, t=s0 + float(a), y=np.zeros(params.k),
                x=np.concatenate([[float(lag)], np.zeros(params.k - 1)]),
                beta=params.beta))
    return pairs


def eigenvalue_ratio_grid(params: KernelParams, n_dt: int = 5, n_lag: int = 5):
    """min over the canonical grid of lambda_min / Delta (positive constant
    is the deterministic shadow of the inverse-moment bound)."""
    rows = []
    for pair in canonical_pair_grid(params, n_dt, n_lag):
        z = malliavin_matrix_gaussian(pair, params)
        rows.append((pair.t - pair.s, pair.lag, z.lambda_min, pair.delta_mod,
                     z.lambda_min / pair.delta_mod))
    ratios = [r[-1] for r in rows]
    return min(ratios), rows


def density_ratio_grid(params: KernelParams, p: float, n_dt: int = 5,
                       n_lag: int = 5, n_z: int = 20, z_max: float = 2.0,
                       d: int = 1, region: str = "all"):
    """sup of the density/envelope ratio over pairs x (z1, z2) grids.

    ``region='separated'`` restricts to |z1 - z2| > Delta (the branch where
    the envelope's min-term is strictly below 1).

    The canonical pair range here keeps Delta above ~0.06 so that the
    ratio's interior peak (width ~ sqrt(Delta)) is resolvable by the
    10^4-configuration z-box; the more degenerate eigenvalue-sweep corner
    would need z-resolution ~ Delta, far beyond that budget, although the
    continuum supremum stays finite for every fixed p.
    """
    if d != 1:
        raise ValueError("the canonical density grid is defined for d = 1")
    zs = np.linspace(-z_max, z_max, n_z)
    sup = 0.0
    for pair in canonical_pair_grid(params, n_dt, n_lag,
                                    dt_range=(1e-2, 0.5),
                                    lag_range=(1e-1, 1.0)):
        cov = cov_pair(pair, params)
        det = float(np.linalg.det(cov))
        inv = np.linalg.inv(cov)
        delta = pair.delta_mod
        zz1, zz2 = np.meshgrid(zs, zs, indexing="ij")
        if region == "separated":
            mask = np.abs(zz1 - zz2) > delta
        elif region == "all":
            mask = np.ones_like(zz1, dtype=bool)
        else:
            raise ValueError(f"unknown region {region!r}")
        if not np.any(mask):
            continue
        quad = (inv[0, 0] * zz1 ** 2 + 2 * inv[0, 1] * zz1 * zz2 +
                inv[1, 1] * zz2 ** 2)
        dens = np.exp(-0.5 * quad) / (2.0 * math.pi * math.sqrt(det))
        sep2 = (zz1 - zz2) ** 2
        min_term = np.where(
            sep2 > 0,
            np.minimum(delta * delta / np.where(sep2 > 0, sep2, 1.0), 1.0),
            1.0)
        env = delta ** (-0.5 * d) * min_term ** (p / (2.0 * d))
        sup = max(sup, float(np.max((dens / env)[mask])))
    return sup
