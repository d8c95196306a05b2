"""Periodic grids on the flat complex torus and Fourier-spectral calculus.

Fields are plain ``float64`` arrays of shape ``grid.shape``. Real axes are
ordered ``(x1, y1, x2, y2, ...)`` with ``z_j = x_j + i y_j``. The flat
Kahler form is identified with the Euclidean volume form, so ``g0 = I/2``
in complex coordinates and

    Delta_0 = g0^{j kbar} d_j d_kbar = 1/2 * (Euclidean Laplacian).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import NonFiniteError, NonZeroMean

__all__ = [
    "Grid",
    "check_finite",
    "laplacian_flat",
    "gradient_flat",
    "gradient_squared_flat",
    "gradient_dot_flat",
    "poisson_solve_flat",
    "integrate",
    "mean",
    "dealias",
    "complex_hessian",
    "band_limited_noise",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic sampling of the flat torus C^n / Z^{2n}."""

    n_complex: int = 1
    N: int = 128
    period: float = 1.0
    workers: int = 1

    def __post_init__(self):
        if self.n_complex not in (1, 2):
            raise ValueError(f"n_complex must be 1 or 2, got {self.n_complex}")
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 8, got {self.N}")
        if not self.period > 0:
            raise ValueError("period must be positive")

    @property
    def ndim(self) -> int:
        return 2 * self.n_complex

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.ndim

    @property
    def point_count(self) -> int:
        return self.N ** self.ndim

    @property
    def spacing(self) -> float:
        return self.period / self.N

    @property
    def volume(self) -> float:
        """Flat volume V = int omega_0^n."""
        return self.period ** self.ndim

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        x = np.arange(self.N) * self.spacing
        return tuple(np.meshgrid(*([x] * self.ndim), indexing="ij"))

    @cached_property
    def _mode_index(self) -> list[np.ndarray]:
        # integer mode numbers, broadcastable to the rfftn output shape
        idx = []
        for a in range(self.ndim):
            if a == self.ndim - 1:
                m = np.arange(self.N // 2 + 1)
            else:
                m = np.fft.fftfreq(self.N, d=1.0 / self.N).astype(int)
            sh = [1] * self.ndim
            sh[a] = m.size
            idx.append(m.reshape(sh))
        return idx

    @cached_property
    def wavenumbers(self) -> list[np.ndarray]:
        return [2 * np.pi * m / self.period for m in self._mode_index]

    @cached_property
    def derivative_wavenumbers(self) -> list[np.ndarray]:
        # Nyquist mode removed for odd derivatives so real fields stay real
        return [np.where(np.abs(m) == self.N // 2, 0.0, k)
                for m, k in zip(self._mode_index, self.wavenumbers)]

    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        return -0.5 * sum(k * k for k in self.wavenumbers)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        cut = self.N // 3
        mask = np.ones(self.spectral_shape, dtype=bool)
        for m in self._mode_index:
            mask &= np.abs(m) <= cut
        return mask

    @cached_property
    def max_retained_symbol(self) -> float:
        """Largest |Delta_0| eigenvalue kept by the 2/3 rule."""
        return float(np.max(np.abs(self.laplacian_symbol[self.dealias_mask])))

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return (self.N,) * (self.ndim - 1) + (self.N // 2 + 1,)

    def fft(self, f: np.ndarray) -> np.ndarray:
        return sfft.rfftn(f, workers=self.workers)

    def ifft(self, fhat: np.ndarray) -> np.ndarray:
        return sfft.irfftn(fhat, s=self.shape, workers=self.workers)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def constant(self, c: float) -> np.ndarray:
        return np.full(self.shape, float(c))


def check_finite(f: np.ndarray, name: str = "field") -> np.ndarray:
    if not np.all(np.isfinite(f)):
        raise NonFiniteError(f"{name} contains non-finite values")
    return f


def laplacian_flat(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Flat Laplacian Delta_0 f = 1/2 nabla^2 f, computed spectrally."""
    check_finite(f)
    return grid.ifft(grid.laplacian_symbol * grid.fft(f))


def gradient_flat(grid: Grid, f: np.ndarray) -> list[np.ndarray]:
    """Euclidean partial derivatives along every real axis."""
    check_finite(f)
    fhat = grid.fft(f)
    return [grid.ifft(1j * k * fhat) for k in grid.derivative_wavenumbers]


def gradient_dot_flat(grid: Grid, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Pointwise <grad f, grad g>_{omega_0} (half the Euclidean dot product)."""
    gf = gradient_flat(grid, f)
    gg = gf if g is f else gradient_flat(grid, g)
    return 0.5 * sum(a * b for a, b in zip(gf, gg))


def gradient_squared_flat(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Pointwise |grad f|^2_{omega_0}; integrates to -int f Delta_0 f."""
    return gradient_dot_flat(grid, f, f)


def poisson_solve_flat(grid: Grid, rhs: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Mean-zero solution u of Delta_0 u = rhs.

    Raises NonZeroMean when the right-hand side has a mean larger than
    ``rtol`` times its RMS norm; no periodic solution exists then.
    """
    check_finite(rhs)
    m = float(np.mean(rhs))
    norm = float(np.sqrt(np.mean(rhs * rhs)))
    if abs(m) > rtol * norm:
        raise NonZeroMean(f"right-hand side has mean {m:.3e} (norm {norm:.3e})")
    rhat = grid.fft(rhs)
    sym = grid.laplacian_symbol.copy()
    sym.flat[0] = 1.0
    uhat = rhat / sym
    uhat.flat[0] = 0.0
    return grid.ifft(uhat)


def integrate(grid: Grid, f: np.ndarray, weight: np.ndarray | None = None) -> float:
    """Uniform quadrature of f against the flat measure, optionally times a density."""
    f = np.asarray(f, dtype=float)
    if f.shape != grid.shape:
        raise ValueError(f"shape mismatch: {f.shape} vs grid {grid.shape}")
    if weight is not None:
        weight = np.asarray(weight, dtype=float)
        if weight.shape != grid.shape:
            raise ValueError(f"weight shape mismatch: {weight.shape} vs grid {grid.shape}")
        f = f * weight
    return float(np.mean(f)) * grid.volume


def mean(grid: Grid, f: np.ndarray) -> float:
    return integrate(grid, f) / grid.volume


def dealias(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Project onto the modes kept by the 2/3 rule."""
    return grid.ifft(np.where(grid.dealias_mask, grid.fft(f), 0.0))


def complex_hessian(grid: Grid, f: np.ndarray):
    """Components of i d dbar f relative to omega_0.

    For n = 1 returns the scalar Delta_0 f. For n = 2 returns ``(a, d, c)``
    where the Hermitian matrix ``[[a, c], [conj(c), d]]`` equals
    ``g0^{-1} (d_j d_kbar f)``; its trace is Delta_0 f.
    """
    check_finite(f)
    fhat = grid.fft(f)
    if grid.n_complex == 1:
        return grid.ifft(grid.laplacian_symbol * fhat)
    kx1, ky1, kx2, ky2 = grid.wavenumbers
    dx1, dy1, dx2, dy2 = grid.derivative_wavenumbers
    a = grid.ifft(-0.5 * (kx1 * kx1 + ky1 * ky1) * fhat)
    d = grid.ifft(-0.5 * (kx2 * kx2 + ky2 * ky2) * fhat)
    re = grid.ifft(-0.5 * (dx1 * dx2 + dy1 * dy2) * fhat)
    im = grid.ifft(-0.5 * (dx1 * dy2 - dy1 * dx2) * fhat)
    return a, d, re + 1j * im


def band_limited_noise(grid: Grid, rng: np.random.Generator, modes: int = 8,
                       amplitude: float = 0.1) -> np.ndarray:
    """Mean-zero random field with Fourier content |m_i| <= modes, scaled to sup-norm ``amplitude``."""
    modes = min(modes, grid.N // 3)
    fhat = np.zeros(grid.spectral_shape, dtype=complex)
    keep = np.ones(grid.spectral_shape, dtype=bool)
    for m in grid._mode_index:
        keep &= np.abs(m) <= modes
    keep.flat[0] = False
    count = int(keep.sum())
    fhat[keep] = rng.standard_normal(count) + 1j * rng.standard_normal(count)
    f = grid.ifft(fhat)
    f -= f.mean()
    peak = np.max(np.abs(f))
    return f * (amplitude / peak) if peak > 0 else f
