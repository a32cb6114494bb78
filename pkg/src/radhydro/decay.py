"""Whole-space linear evolution of isotropic data by radial quadrature.

For isotropic data every Fourier mode with ``|xi| = r`` carries the same
compressible 4-vector ``(rho, d, theta, eta)`` and shear amplitude, so an
``R^3`` integral reduces to ``4 pi int r^2 (...) dr``.  Norms are reported on
the Fourier side, ``||grad^m U||^2 = 4 pi int r^{2+2m} |U(t, r)|^2 dr``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg
import scipy.stats

from .fourier import CutoffPair
from .symbols import EIG_COND_LIMIT, compressible_symbol

__all__ = [
    "RadialQuadrature",
    "Profile",
    "DecayExperimentConfig",
    "DecayTable",
    "DecayFit",
    "QuadratureWarning",
    "evolve_radial",
    "fit_exponent",
    "fit_exponential",
    "lp_rate_table",
    "predicted_slope",
    "BANDS",
    "COMPRESSIBLE",
]

BANDS = ("all", "low", "medium", "high")
COMPRESSIBLE = ("rho", "d", "theta", "eta")
TAIL_TOLERANCE = 1e-8
PROFILE_KINDS = ("gaussian", "r-gaussian", "bump", "zero")


class QuadratureWarning(RuntimeWarning):
    """The truncated radial rule misses a visible part of the initial data."""


@dataclass(frozen=True)
class RadialQuadrature:
    """Composite Gauss-Legendre rule on ``[0, r_max]``.

    The first panel ``[0, breaks[1]]`` is split geometrically ``refine``
    times toward the origin, where late-time integrands concentrate.
    """

    nodes: np.ndarray
    weights: np.ndarray
    r_max: float

    @classmethod
    def composite(cls, breaks=(0.0, 0.25, 4.0, 40.0), order: int = 64,
                  refine: int = 8) -> "RadialQuadrature":
        breaks = [float(b) for b in breaks]
        if len(breaks) < 2 or breaks[0] != 0.0 or any(b >= c for b, c in zip(breaks, breaks[1:])):
            raise ValueError("breaks must start at 0 and increase strictly")
        if order < 1 or refine < 0:
            raise ValueError("order must be positive and refine non-negative")
        first = [breaks[1] * 2.0**-k for k in range(refine, 0, -1)]
        edges = [0.0] + first + breaks[1:]
        x, w = np.polynomial.legendre.leggauss(order)
        nodes, weights = [], []
        for a, b in zip(edges, edges[1:]):
            nodes.append(0.5 * (b - a) * (x + 1) + a)
            weights.append(0.5 * (b - a) * w)
        return cls(np.concatenate(nodes), np.concatenate(weights), breaks[-1])

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def calibration_error(self) -> float:
        """Relative error of the rule on ``int_0^{r_max} r^2 exp(-r^2) dr``."""
        rm = self.r_max
        exact = math.sqrt(math.pi) / 4 * math.erf(rm) - 0.5 * rm * math.exp(-rm * rm)
        approx = self.integrate(self.nodes**2 * np.exp(-self.nodes**2))
        return abs(approx - exact) / exact


@dataclass(frozen=True)
class Profile:
    """Radial initial profile of one unknown.

    ``gaussian``: ``amplitude * exp(-r^2 / (2 width^2))``.
    ``r-gaussian``: ``amplitude * (r / width) * exp(-r^2 / (2 width^2))``,
    vanishing at the origin.
    ``bump``: a smooth bump supported in ``[lo, hi]`` with peak ``amplitude``.
    ``zero``: identically zero.
    """

    kind: str = "gaussian"
    amplitude: float = 1.0
    width: float = 1.0
    lo: float = 0.0
    hi: float = 0.0

    def validation_errors(self, name: str = "profile") -> list[str]:
        errs = []
        if self.kind not in PROFILE_KINDS:
            errs.append(f"{name}: unknown kind {self.kind!r}")
        if self.kind in ("gaussian", "r-gaussian") and not self.width > 0:
            errs.append(f"{name}: width must be positive")
        if self.kind == "bump" and not 0 <= self.lo < self.hi:
            errs.append(f"{name}: need 0 <= lo < hi for a bump")
        return errs

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "gaussian":
            return self.amplitude * np.exp(-0.5 * (r / self.width) ** 2)
        if self.kind == "r-gaussian":
            return self.amplitude * (r / self.width) * np.exp(-0.5 * (r / self.width) ** 2)
        mid, half = 0.5 * (self.lo + self.hi), 0.5 * (self.hi - self.lo)
        z = (r - mid) / half
        inside = np.abs(z) < 1
        out = np.zeros_like(r)
        out[inside] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - z[inside] ** 2))
        return out

    def value_at_origin(self) -> float:
        return float(self(np.array([0.0]))[0])


def _default_profiles() -> dict:
    g = Profile("gaussian", 1.0, 1.0)
    return {"rho": g, "d": g, "theta": g, "eta": g, "shear": g}


@dataclass
class DecayExperimentConfig:
    profiles: dict = field(default_factory=_default_profiles)
    t_grid: np.ndarray = field(
        default_factory=lambda: np.concatenate([[0.0], np.logspace(-1, 4, 121)]))
    orders: tuple = (0, 1, 2)
    fit_window: tuple = (1e2, 1e4)
    cutoffs: CutoffPair = field(default_factory=CutoffPair)
    quadrature: RadialQuadrature = field(default_factory=RadialQuadrature.composite)
    require_l1_type: bool = True

    def validation_errors(self) -> list[str]:
        errs = []
        unknown = set(self.profiles) - set(COMPRESSIBLE) - {"shear"}
        if unknown:
            errs.append(f"unknown profile keys: {sorted(unknown)}")
        for name, prof in sorted(self.profiles.items()):
            errs.extend(prof.validation_errors(name))
        t = np.asarray(self.t_grid, dtype=float)
        if t.ndim != 1 or t.size < 2:
            errs.append("t_grid needs at least two times")
        elif np.any(t < 0) or np.any(np.diff(t) <= 0):
            errs.append("t_grid must be non-negative and strictly increasing")
        if not set(self.orders) <= {0, 1, 2} or not self.orders:
            errs.append("orders must be a non-empty subset of {0, 1, 2}")
        t1, t2 = self.fit_window
        if not 0 <= t1 < t2:
            errs.append(f"fit window must satisfy 0 <= T1 < T2, got {self.fit_window}")
        if self.require_l1_type and not errs:
            at0 = [abs(p.value_at_origin()) for p in self.profiles.values()]
            if not any(v > 0 for v in at0):
                errs.append("profiles vanish at the origin; the sharp rate needs "
                            "|U(0, r -> 0)| nonzero")
        return errs

    def validate(self):
        errs = self.validation_errors()
        if errs:
            raise ValueError("; ".join(errs))


@dataclass
class DecayTable:
    """Norm series; ``norms[(m, band)]`` is aligned with ``t``."""

    t: np.ndarray
    norms: dict
    shear: np.ndarray
    tail_fraction: float

    def series(self, m: int = 0, band: str = "all") -> np.ndarray:
        return self.norms[(m, band)]

    def rows(self):
        """Yield ``(t, m, band, norm)`` in a fixed order."""
        for (m, band), vals in sorted(self.norms.items(), key=lambda kv: (kv[0][0], BANDS.index(kv[0][1]))):
            for t, v in zip(self.t, vals):
                yield float(t), m, band, float(v)


def _node_solutions(r: np.ndarray, u0: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Compressible solution at every (node, time): shape ``(nodes, times, 4)``."""
    out = np.empty((r.size, t.size, 4))
    for j, x in enumerate(r):
        mat = compressible_symbol(x)
        w, v = np.linalg.eig(mat)
        if np.linalg.cond(v) < EIG_COND_LIMIT:
            c = np.linalg.solve(v, u0[j])
            out[j] = ((np.exp(-np.outer(t, w)) * c) @ v.T).real
        else:
            out[j] = [scipy.linalg.expm(-tk * mat) @ u0[j] for tk in t]
    return out


def evolve_radial(config: DecayExperimentConfig) -> DecayTable:
    """Evolve isotropic data on every quadrature node and assemble norms."""
    config.validate()
    quad = config.quadrature
    r, w = quad.nodes, quad.weights
    t = np.asarray(config.t_grid, dtype=float)
    zero = Profile("zero")
    u0 = np.stack([config.profiles.get(c, zero)(r) for c in COMPRESSIBLE], axis=1)
    sh0 = config.profiles.get("shear", zero)(r)

    sol = _node_solutions(r, u0, t)
    dens = (sol**2).sum(-1) + (np.exp(-np.outer(r**2, t)) * sh0[:, None]) ** 2
    dens_shear = (np.exp(-np.outer(r**2, t)) * sh0[:, None]) ** 2
    low, med, high = config.cutoffs.weights(r)
    band_w = {"all": np.ones_like(r), "low": low, "medium": med, "high": high}

    norms = {}
    for m in config.orders:
        base = 4 * math.pi * w * r ** (2 + 2 * m)
        for band in BANDS:
            norms[(m, band)] = np.sqrt((base * band_w[band] ** 2) @ dens)
    shear = np.sqrt((4 * math.pi * w * r**2) @ dens_shear)

    tail = _tail_fraction(config, quad)
    if tail > TAIL_TOLERANCE:
        warnings.warn(f"radial truncation at r_max={quad.r_max} misses a fraction "
                      f"{tail:.2e} of the m=2 norm at t=0", QuadratureWarning)
    return DecayTable(t=t, norms=norms, shear=shear, tail_fraction=tail)


def _tail_fraction(config: DecayExperimentConfig, quad: RadialQuadrature) -> float:
    """Share of the initial ``m = 2`` norm squared lying beyond ``r_max``."""
    zero = Profile("zero")
    x, wx = np.polynomial.legendre.leggauss(64)
    rt = 0.5 * quad.r_max * (x + 1) + quad.r_max
    wt = 0.5 * quad.r_max * wx

    def mass(r, w):
        sq = sum(config.profiles.get(c, zero)(r) ** 2 for c in COMPRESSIBLE + ("shear",))
        return float(np.dot(w, r**6 * sq))

    inside = mass(quad.nodes, quad.weights)
    outside = mass(rt, wt)
    total = inside + outside
    return outside / total if total > 0 else 0.0


@dataclass(frozen=True)
class DecayFit:
    order: int
    slope: float
    intercept: float
    r_squared: float
    window: tuple

    @property
    def conclusive(self) -> bool:
        return self.r_squared >= 0.999


def _window(t, norms, window, min_points=8):
    t = np.asarray(t, dtype=float)
    norms = np.asarray(norms, dtype=float)
    if t.shape != norms.shape:
        raise ValueError("time and norm series differ in length")
    t1, t2 = window
    if not t1 < t2:
        raise ValueError(f"degenerate fit window {window}")
    sel = (t >= t1) & (t <= t2)
    if sel.sum() < min_points:
        raise ValueError(f"only {int(sel.sum())} points in window {window}, need {min_points}")
    if np.any(norms[sel] <= 0):
        raise ValueError("norm series has non-positive values in the fit window")
    return t[sel], norms[sel]


def fit_exponent(t, norms, window=(1e2, 1e4), order: int = 0) -> DecayFit:
    """Least-squares slope of ``log norm`` against ``log(1 + t)``."""
    tw, nw = _window(t, norms, window)
    fit = scipy.stats.linregress(np.log1p(tw), np.log(nw))
    r2 = 1.0 if fit.rvalue != fit.rvalue else fit.rvalue**2
    return DecayFit(order, float(fit.slope), float(fit.intercept), float(r2), tuple(window))


def fit_exponential(t, norms, window) -> DecayFit:
    """Least-squares slope of ``log norm`` against ``t``."""
    tw, nw = _window(t, norms, window)
    fit = scipy.stats.linregress(tw, np.log(nw))
    return DecayFit(0, float(fit.slope), float(fit.intercept), float(fit.rvalue**2), tuple(window))


def predicted_slope(m: int) -> Fraction:
    return Fraction(-3, 4) - Fraction(m, 2)


def _as_quarter(x) -> Fraction:
    return Fraction(round(4 * float(x)), 4) if not isinstance(x, Fraction) else x


def lp_rate_table(slopes, p_values=(2, 3, 4, 6, 12, math.inf),
                  grad_p_values=(2, 3, 4, 6)) -> dict:
    """Exponents implied by the ``L^2`` slopes for ``m = 0, 1, 2``.

    Slopes are rounded to the nearest quarter and combined with exact
    rational arithmetic.  Returns a dict with keys ``("Lp", p)``,
    ``("grad_Lp", p)``, ``("dt", "rho,u")`` and ``("dt", "theta,eta")``.
    ``L^p`` rates follow from interpolating ``L^2`` and ``L^6`` (Sobolev
    gives ``||U||_6 <= C ||grad U||_2``) for ``p <= 6``, and ``L^6`` with
    ``L^inf`` (bounded by ``||grad U||^{1/2} ||grad^2 U||^{1/2}``) beyond.
    """
    try:
        a0, a1, a2 = (_as_quarter(slopes[m]) for m in (0, 1, 2))
    except (KeyError, IndexError, TypeError) as exc:
        raise ValueError("slopes for m = 0, 1, 2 are required") from exc
    a_inf = (a1 + a2) / 2
    table = {}
    for p in p_values:
        if p == math.inf:
            table[("Lp", "inf")] = a_inf
            continue
        p = Fraction(p)
        if p < 2:
            raise ValueError(f"L^p rates need p >= 2, got {p}")
        if p <= 6:
            zeta = (6 - p) / (2 * p)
            table[("Lp", int(p) if p.denominator == 1 else p)] = zeta * a0 + (1 - zeta) * a1
        else:
            zeta = 6 / p
            table[("Lp", int(p) if p.denominator == 1 else p)] = zeta * a1 + (1 - zeta) * a_inf
    for p in grad_p_values:
        p = Fraction(p)
        if not 2 <= p <= 6:
            raise ValueError(f"gradient L^p rates need 2 <= p <= 6, got {p}")
        eta = (6 - p) / (2 * p)
        table[("grad_Lp", int(p) if p.denominator == 1 else p)] = eta * a1 + (1 - eta) * a2
    table[("dt", "rho,u")] = max(a1, a2)
    table[("dt", "theta,eta")] = a0
    return table
