"""Periodic spectral grid and the Fourier multipliers used across the package.

Spectral arrays follow the integral convention ``f_hat(xi) = int e^{-i x.xi} f dx``
discretised with the cell volume, so for a box of volume ``V``

    ||f||_{L^2}^2 = (1 / V) * sum_k |f_hat_k|^2

holds exactly (discrete Parseval).  Every multiplier below acts on arrays whose
last three axes are the grid axes; leading axes are components.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft

__all__ = [
    "SpectralGrid",
    "CutoffPair",
    "HodgeSplit",
    "BernsteinItem",
    "fractional_laplacian",
    "frequency_split",
    "bernstein_check",
    "hodge_split",
    "hodge_reconstruct",
    "sobolev_norm",
    "h_norm",
    "inner",
]

_WORKERS: int | None = None


def set_fft_workers(workers: int | None) -> None:
    """Set the thread count used by every transform (None = scipy default)."""
    global _WORKERS
    _WORKERS = workers


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform grid on ``[0, 2*pi*L)^3`` with ``n`` points per axis.

    Wavenumbers are integer multiples of ``1/L``.
    """

    n: int
    box_len: float = 1.0

    def __post_init__(self):
        if self.n < 4 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 4, got {self.n}")
        if not self.box_len > 0:
            raise ValueError(f"box_len must be positive, got {self.box_len}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def spacing(self) -> float:
        return 2 * math.pi * self.box_len / self.n

    @property
    def volume(self) -> float:
        return (2 * math.pi * self.box_len) ** 3

    @cached_property
    def x(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        x1 = np.arange(self.n) * self.spacing
        return tuple(np.meshgrid(x1, x1, x1, indexing="ij", sparse=True))

    @cached_property
    def kint(self) -> np.ndarray:
        """Integer wavenumber index per axis (numpy FFT ordering)."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(int)

    @cached_property
    def k(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Wavenumbers with the Nyquist entry kept (used for |xi| tables)."""
        k1 = self.kint / self.box_len
        return (k1[:, None, None], k1[None, :, None], k1[None, None, :])

    @cached_property
    def nyquist(self) -> np.ndarray:
        """True on modes with any |k_i| equal to n/2."""
        ny = np.abs(self.kint) == self.n // 2
        return ny[:, None, None] | ny[None, :, None] | ny[None, None, :]

    @cached_property
    def kd(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Differentiation wavenumbers, zero on every mode with a Nyquist index."""
        keep = ~self.nyquist
        return tuple(np.where(keep, np.broadcast_to(kk, self.shape), 0.0) for kk in self.k)

    @cached_property
    def k2(self) -> np.ndarray:
        kx, ky, kz = self.kd
        return kx**2 + ky**2 + kz**2

    @cached_property
    def kmag(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @cached_property
    def kmag_full(self) -> np.ndarray:
        """|k| with Nyquist entries kept; used for radial cutoff weights."""
        kx, ky, kz = self.k
        return np.sqrt(kx**2 + ky**2 + kz**2)

    @cached_property
    def zero_mode(self) -> np.ndarray:
        return (self.kint[:, None, None] == 0) & (self.kint[None, :, None] == 0) & (
            self.kint[None, None, :] == 0)

    @cached_property
    def dealias(self) -> np.ndarray:
        """2/3-rule mask: keep modes with every |k_i| < n/3."""
        keep = np.abs(self.kint) < self.n / 3
        return keep[:, None, None] & keep[None, :, None] & keep[None, None, :]

    def to_spectral(self, f: np.ndarray) -> np.ndarray:
        return scipy.fft.fftn(f, axes=(-3, -2, -1), workers=_WORKERS) * self.spacing**3

    def to_physical(self, fh: np.ndarray) -> np.ndarray:
        """Inverse transform of Hermitian data (real result)."""
        m = self.n // 2 + 1
        return scipy.fft.irfftn(fh[..., :m], s=self.shape, axes=(-3, -2, -1),
                                workers=_WORKERS) / self.spacing**3

    def to_physical_complex(self, fh: np.ndarray) -> np.ndarray:
        return scipy.fft.ifftn(fh, axes=(-3, -2, -1), workers=_WORKERS) / self.spacing**3

    def grad(self, fh: np.ndarray) -> np.ndarray:
        """Spectral gradient of a scalar: shape (3, ...)."""
        return np.stack([1j * kk * fh for kk in self.kd])

    def div(self, vh: np.ndarray) -> np.ndarray:
        kx, ky, kz = self.kd
        return 1j * (kx * vh[0] + ky * vh[1] + kz * vh[2])

    def laplacian(self, fh: np.ndarray) -> np.ndarray:
        return -self.k2 * fh

    def symmetry_defect(self, fh: np.ndarray) -> float:
        """max |f_hat(-k) - conj f_hat(k)|, scaled by max |f_hat|."""
        flipped = np.roll(np.flip(fh, axis=(-3, -2, -1)), 1, axis=(-3, -2, -1))
        scale = max(np.abs(fh).max(), 1e-300)
        return float(np.abs(flipped - fh.conj()).max() / scale)


def inner(grid: SpectralGrid, ah: np.ndarray, bh: np.ndarray) -> float:
    """L^2 inner product <a, b> of real fields given spectrally (sums components)."""
    return float(np.vdot(bh, ah).real / grid.volume)


def sobolev_norm(fh: np.ndarray, grid: SpectralGrid, m: int = 0) -> float:
    """||grad^m f||_{L^2}, summing over any leading component axes."""
    if m < 0:
        raise ValueError("derivative order must be non-negative")
    w = np.abs(fh) ** 2
    if m:
        w = w * grid.k2**m
    return math.sqrt(float(w.sum()) / grid.volume)


def h_norm(fh: np.ndarray, grid: SpectralGrid, k: int) -> float:
    """H^k norm as (sum_{m<=k} ||grad^m f||^2)^(1/2)."""
    return math.sqrt(sum(sobolev_norm(fh, grid, m) ** 2 for m in range(k + 1)))


def fractional_laplacian(fh: np.ndarray, grid: SpectralGrid, s: float,
                         strict: bool = True) -> np.ndarray:
    """Apply the multiplier |xi|^s.

    Modes with a Nyquist index are annihilated like derivatives.  For
    ``s < 0`` the zero mode is annihilated too; with ``strict`` a nonzero mean
    raises ``ValueError`` instead.
    """
    if s == 0:
        return fh.copy()
    zero = grid.k2 == 0
    if s < 0 and strict:
        mean = np.abs(fh[..., grid.zero_mode]).max() if fh.size else 0.0
        if mean > 1e-12 * max(np.abs(fh).max(), 1e-300):
            raise ValueError("negative-order multiplier applied to data with nonzero mean")
    mult = np.where(zero, 0.0, grid.kmag ** np.where(zero, 1.0, s))
    return fh * mult


def _smoothstep(x: np.ndarray) -> np.ndarray:
    """C-infinity transition 0 -> 1 on [0, 1] built from exp(-1/x)."""
    x = np.clip(x, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def _cosine_step(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return 0.5 - 0.5 * np.cos(np.pi * x)


_PROFILES = {"smooth": _smoothstep, "cosine": _cosine_step}


@dataclass(frozen=True)
class CutoffPair:
    """Low/high radial cutoffs.

    ``phi0`` is 1 on ``|xi| <= r0/2`` and 0 beyond ``r0``; ``phi1`` is 0 below
    ``R0/2`` and 1 beyond ``R0 + 1``.
    """

    r0: float = 0.2
    R0: float = 2.0
    shape: str = "smooth"

    def __post_init__(self):
        errs = self.validation_errors()
        if errs:
            raise ValueError("; ".join(errs))

    def validation_errors(self) -> list[str]:
        errs = []
        if not 0 < self.r0 < 0.25:
            errs.append(f"r0 must lie in (0, 1/4), got {self.r0}")
        if not self.R0 > 1:
            errs.append(f"R0 must exceed 1, got {self.R0}")
        if self.shape not in _PROFILES:
            errs.append(f"unknown cutoff shape {self.shape!r}")
        return errs

    def phi0(self, r) -> np.ndarray:
        step = _PROFILES[self.shape]
        half = self.r0 / 2
        return 1.0 - step((np.asarray(r, dtype=float) - half) / half)

    def phi1(self, r) -> np.ndarray:
        step = _PROFILES[self.shape]
        lo = self.R0 / 2
        return step((np.asarray(r, dtype=float) - lo) / (self.R0 + 1 - lo))

    def weights(self, r) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        p0, p1 = self.phi0(r), self.phi1(r)
        return p0, 1.0 - p0 - p1, p1


def frequency_split(fh: np.ndarray, grid: SpectralGrid, cut: CutoffPair):
    """Return ``(f_l, f_m, f_h)``; ``f_L = f_l + f_m`` and ``f_H = f_m + f_h``."""
    w0, wm, w1 = cut.weights(grid.kmag_full)
    return fh * w0, fh * wm, fh * w1


@dataclass
class BernsteinItem:
    name: str
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-10) + 1e-300


def bernstein_check(fh: np.ndarray, grid: SpectralGrid, cut: CutoffPair,
                    k: int, k0: int, k1: int, literal: bool = False) -> list[BernsteinItem]:
    """Evaluate the six band-wise Bernstein inequalities.

    By default the radii are the ones the cutoff supports actually guarantee:
    ``r0`` (low band), ``R0/2`` (high band) and ``[r0/2, R0+1]`` (medium band).
    ``literal=True`` uses ``r0`` and ``R0`` throughout instead, which the
    cutoffs above do not guarantee; it is kept for comparison reports.
    """
    if not k0 <= k <= k1:
        raise ValueError("need k0 <= k <= k1")
    fl, fm, fhh = frequency_split(fh, grid, cut)
    hi = cut.R0 if literal else cut.R0 / 2
    med_lo = cut.r0 if literal else cut.r0 / 2
    med_hi = cut.R0 if literal else cut.R0 + 1

    def nrm(a, m):
        return sobolev_norm(a, grid, m)

    return [
        BernsteinItem("low-reverse", nrm(fl, k), cut.r0 ** (k - k0) * nrm(fl, k0)),
        BernsteinItem("low-dominated", nrm(fl, k), nrm(fh, k)),
        BernsteinItem("high-reverse", nrm(fhh, k), hi ** (-(k1 - k)) * nrm(fhh, k1)),
        BernsteinItem("high-dominated", nrm(fhh, k), nrm(fh, k)),
        BernsteinItem("medium-lower", med_lo**k * nrm(fm, 0), nrm(fm, k)),
        BernsteinItem("medium-upper", nrm(fm, k), med_hi**k * nrm(fm, 0)),
        BernsteinItem("medium-dominated", nrm(fm, k), nrm(fh, k)),
    ]


@dataclass
class HodgeSplit:
    """Compressible scalar ``d`` and incompressible part ``pu``.

    ``pu`` stores the antisymmetric ``Lambda^{-1} curl u`` through its axial
    vector ``Lambda^{-1} (curl u)``.
    """

    d: np.ndarray
    pu: np.ndarray
    had_mean: bool = False
    mean: np.ndarray = field(default=None, repr=False)


def hodge_split(uh: np.ndarray, grid: SpectralGrid, strict: bool = False) -> HodgeSplit:
    """``mean`` keeps every coefficient the split annihilates (zero mode and
    Nyquist planes) so that reconstruction is exact."""
    zero = grid.k2 == 0
    mean = uh[:, zero].copy()
    had_mean = bool(np.abs(uh[:, grid.zero_mode]).max()
                    > 1e-12 * max(np.abs(uh).max(), 1e-300))
    if had_mean and strict:
        raise ValueError("velocity has nonzero mean")
    inv = np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, grid.kmag))
    kx, ky, kz = grid.kd
    d = 1j * (kx * uh[0] + ky * uh[1] + kz * uh[2]) * inv
    curl = 1j * np.stack([
        ky * uh[2] - kz * uh[1],
        kz * uh[0] - kx * uh[2],
        kx * uh[1] - ky * uh[0],
    ])
    return HodgeSplit(d=d, pu=curl * inv, had_mean=had_mean, mean=mean)


def hodge_reconstruct(parts: HodgeSplit, grid: SpectralGrid,
                      restore_mean: bool = True) -> np.ndarray:
    """``u = -Lambda^{-1} grad d + Lambda^{-1} curl(pu)`` (plus the stored mean)."""
    zero = grid.k2 == 0
    inv = np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, grid.kmag))
    kx, ky, kz = grid.kd
    d, w = parts.d, parts.pu
    longi = -1j * np.stack([kx * d, ky * d, kz * d]) * inv
    trans = 1j * np.stack([
        ky * w[2] - kz * w[1],
        kz * w[0] - kx * w[2],
        kx * w[1] - ky * w[0],
    ]) * inv
    u = longi + trans
    if restore_mean and parts.mean is not None:
        u[:, zero] = parts.mean
    return u
