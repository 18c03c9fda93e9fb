"""Spectral synthesis of the driving noise on a periodic lattice.

The d-component noise is white in time and Riesz-correlated in space.  On a
torus of extent L with n points per axis, one time-step increment is a real
Gaussian field whose spatial covariance is the periodization of the Riesz
kernel, scaled by dt:

    Cov(W(x), W(y)) = dt * sum_j weight(xi_j) cos(xi_j . (x - y)),
    weight(xi_j)    = c_{k,beta} |xi_j|^(beta - k) (2 pi / L)^k,

with lattice frequencies xi_j = 2 pi j / L.  Synthesis filters a white
Gaussian lattice field through sqrt(weight) in Fourier space; filtering a
*real* white field keeps the Hermitian pairing (including self-conjugate
Nyquist modes) exact by construction.

Zero mode: the spectral density diverges at 0; by default the zero weight is
the cell average of the density over the fundamental frequency cell (which
preserves temporal-increment scaling), with ``zero_mode="drop"`` available
to zero it instead.

Wrap-around periodization biases the covariance at separations comparable to
L; experiments keep probe separations below L/8.

RNG streams: path p of a run with master seed m draws from
``Generator(PCG64(SeedSequence(m, spawn_key=(p,))))``; step i consumes
exactly d * n^k standard normals, so a slice is a pure function of
(m, p, i) regardless of the number of worker threads.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .kernels import KernelParams, spectral_constant

__all__ = ["GridSpec", "NoiseSlice", "spectral_weights", "path_stream",
           "sample_noise_increment", "dump_slice", "load_slice"]

_MAGIC = b"RHNS"
_HEADER = struct.Struct("<4sHHIddqqq")  # magic, version, k, n, L, dt, seed, path, step


@dataclass(frozen=True)
class GridSpec:
    """Periodic lattice: k axes, n points per axis, extent ``length``, step dt."""

    k: int
    n: int
    length: float
    dt: float

    def __post_init__(self):
        if self.k < 1 or int(self.k) != self.k:
            raise ValueError(f"dimension must be an integer >= 1, got {self.k}")
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"points per axis must be a power of two >= 8, got {self.n}")
        if not self.length > 0:
            raise ValueError(f"box extent must be positive, got {self.length}")
        if not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        if not self.spacing < self.length / 4:
            raise ValueError("lattice spacing must be finer than length/4")

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.k

    @property
    def cells(self) -> int:
        return self.n ** self.k

    def frequencies(self):
        """Angular frequency arrays per axis (fft order), xi = 2 pi j / L."""
        return [2.0 * math.pi * np.fft.fftfreq(self.n, d=self.spacing)
                for _ in range(self.k)]

    def frequency_norm(self):
        """|xi| on the full lattice, shape ``self.shape``."""
        axes = self.frequencies()
        grids = np.meshgrid(*axes, indexing="ij")
        return np.sqrt(sum(g * g for g in grids))


@dataclass
class NoiseSlice:
    """One time-step noise increment: d real fields plus its RNG lineage."""

    values: np.ndarray            # shape (d,) + grid.shape
    seed_path: str                # "seed/path/step" provenance tag

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("noise slice contains non-finite entries")


def spectral_weights(grid: GridSpec, params: KernelParams,
                     zero_mode: str = "cell") -> np.ndarray:
    """Per-frequency variance weights of the periodized Riesz covariance.

    ``zero_mode='cell'`` (default) integrates the density over the zero
    frequency cell; ``'drop'`` sets it to 0 (differs by a spatially constant
    Gaussian per step).
    """
    if grid.k != params.k:
        raise ValueError(f"grid dimension {grid.k} != kernel dimension {params.k}")
    if zero_mode not in ("cell", "drop"):
        raise ValueError(f"zero_mode must be 'cell' or 'drop', got {zero_mode}")
    c = spectral_constant(params).c_k_beta
    norm = grid.frequency_norm()
    cell = (2.0 * math.pi / grid.length) ** grid.k
    with np.errstate(divide="ignore"):
        w = c * norm ** (params.beta - grid.k) * cell
    if zero_mode == "drop":
        w[(0,) * grid.k] = 0.0
    else:
        w[(0,) * grid.k] = _zero_cell_weight(grid, params, c)
    return w


def _zero_cell_weight(grid: GridSpec, params: KernelParams, c: float) -> float:
    """int over the zero-frequency cell of the spectral density.

    Exact for k = 1; for k >= 2 the cubic cell is replaced by the ball of
    equal volume (radially exact), which only perturbs the one constant mode.
    """
    k, beta = grid.k, params.beta
    half = math.pi / grid.length
    if k == 1:
        return c * 2.0 * half ** beta / beta
    from .kernels import surface_area
    vol = (2.0 * half) ** k
    r_eq = (vol * k / surface_area(k)) ** (1.0 / k)
    return c * surface_area(k) * r_eq ** beta / beta


def path_stream(master_seed: int, path: int) -> np.random.Generator:
    """The documented per-path RNG stream; see the module docstring."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(path,))
    return np.random.Generator(np.random.PCG64(ss))


def sample_noise_increment(grid: GridSpec, params: KernelParams,
                           rng: np.random.Generator, *, d: int = 1,
                           weights: np.ndarray | None = None,
                           seed_path: str = "") -> NoiseSlice:
    """Draw one white-in-time increment for all d components.

    Consumes exactly d * n^k standard normals from ``rng`` in component
    order, then filters each component by sqrt(n^k * dt * weight) in
    Fourier space.
    """
    if weights is None:
        weights = spectral_weights(grid, params)
    amp = np.sqrt(grid.cells * grid.dt * weights)
    out = np.empty((d,) + grid.shape)
    for i in range(d):
        white = rng.standard_normal(grid.shape)
        out[i] = np.fft.ifftn(amp * np.fft.fftn(white)).real
    return NoiseSlice(values=out, seed_path=seed_path)


def lag_covariance(weights: np.ndarray, grid: GridSpec, lag_cells) -> float:
    """Truncated spectral sum: Cov per unit dt at lattice lag ``lag_cells``.

    Direct evaluation of sum_j weight(xi_j) cos(xi_j . r); intentionally
    FFT-free so it can serve as an independent oracle for the sampler.
    """
    axes = grid.frequencies()
    lag_cells = np.atleast_1d(lag_cells)
    phase = np.zeros(grid.shape)
    for ax in range(grid.k):
        shape = [1] * grid.k
        shape[ax] = grid.n
        phase = phase + axes[ax].reshape(shape) * (lag_cells[ax] * grid.spacing)
    return float(np.sum(weights * np.cos(phase)))


def dump_slice(fh, grid: GridSpec, noise: NoiseSlice, *, seed: int,
               path: int, step: int) -> None:
    """Binary export: little-endian header + row-major float64 fields."""
    d = noise.values.shape[0]
    fh.write(_HEADER.pack(_MAGIC, 1, grid.k, grid.n, grid.length, grid.dt,
                          seed, path, step))
    fh.write(struct.pack("<H", d))
    fh.write(np.ascontiguousarray(noise.values, dtype="<f8").tobytes())


def load_slice(fh):
    """Inverse of :func:`dump_slice`; returns (grid-like dict, NoiseSlice)."""
    raw = fh.read(_HEADER.size)
    magic, version, k, n, length, dt, seed, path, step = _HEADER.unpack(raw)
    if magic != _MAGIC:
        raise ValueError("not a noise-slice dump")
    (d,) = struct.unpack("<H", fh.read(2))
    count = d * n ** k
    values = np.frombuffer(fh.read(count * 8), dtype="<f8").reshape(
        (d,) + (n,) * k).copy()
    meta = {"k": k, "n": n, "length": length, "dt": dt, "seed": seed,
            "path": path, "step": step, "version": version}
    return meta, NoiseSlice(values=values, seed_path=f"{seed}/{path}/{step}")
