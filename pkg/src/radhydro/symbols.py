"""Per-frequency analysis of the linearised system.

The compressible block ``J(|xi|)`` acts on ``(rho, d, theta, eta)`` and the full
symbol ``A_xi`` on ``(rho, u1, u2, u3, theta, eta)``; each Fourier mode evolves
by ``d/dt U = -A_xi U``.  Stability is certified twice: through the Hurwitz
minors of the characteristic polynomial and through the eigenvalues of the
matrix itself.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np
import scipy.linalg

__all__ = [
    "compressible_symbol",
    "full_symbol",
    "characteristic_coefficients",
    "coefficients_by_expansion",
    "hurwitz_minors",
    "hurwitz_closed_form",
    "HurwitzReport",
    "hurwitz_determinants",
    "eigenvalues",
    "polynomial_roots",
    "propagator",
    "full_propagator",
    "full_propagators_batch",
    "full_symbols_batch",
    "EnvelopeFit",
    "decay_envelope",
    "to_q_variables",
    "lyapunov_value",
    "lyapunov_dissipation",
    "lyapunov_rate_constant",
]

EIG_COND_LIMIT = 1e6


def compressible_symbol(xi_mag: float) -> np.ndarray:
    x = float(xi_mag)
    s = x * x
    return np.array([
        [0.0, x, 0.0, 0.0],
        [-x, 3 * s, -x, -x],
        [0.0, x, s + 4, -1.0],
        [0.0, 0.0, -4.0, s + 1],
    ])


def full_symbol(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    s = float(xi @ xi)
    a = np.zeros((6, 6), dtype=complex)
    a[0, 1:4] = 1j * xi
    a[1:4, 0] = 1j * xi
    a[1:4, 1:4] = s * np.eye(3) + 2 * np.outer(xi, xi)
    a[1:4, 4] = 1j * xi
    a[1:4, 5] = 1j * xi
    a[4, 1:4] = 1j * xi
    a[4, 4] = s + 4
    a[4, 5] = -1
    a[5, 4] = -4
    a[5, 5] = s + 1
    return a


def _square(xi_mag):
    if isinstance(xi_mag, Rational):
        return Fraction(xi_mag) ** 2
    return float(xi_mag) ** 2


def characteristic_coefficients(xi_mag):
    """``(a0, .., a4)`` with ``det(lam I - J) = a0 lam^4 - a1 lam^3 + a2 lam^2 - a3 lam + a4``.

    Integer or Fraction input keeps exact rational arithmetic.
    """
    s = _square(xi_mag)
    return (1 + 0 * s, 5 * s + 5, 7 * s**2 + 22 * s, 3 * s**3 + 18 * s**2 + 10 * s,
            s**3 + 5 * s**2)


def _poly_mul(p, q):
    out = [0 * p[0]] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] = out[i + j] + a * b
    return out


def _poly_add(p, q):
    n = max(len(p), len(q))
    p = list(p) + [0] * (n - len(p))
    q = list(q) + [0] * (n - len(q))
    return [a + b for a, b in zip(p, q)]


def _perm_sign(perm) -> int:
    sign, seen = 1, list(perm)
    for i in range(len(seen)):
        while seen[i] != i:
            j = seen[i]
            seen[i], seen[j] = seen[j], seen[i]
            sign = -sign
    return sign


def coefficients_by_expansion(xi_mag):
    """Same coefficients, from a Leibniz expansion of ``det(lam I - J)``.

    Entries are polynomials in ``lam`` (ascending coefficient lists); nothing
    here touches the closed forms.
    """
    exact = isinstance(xi_mag, Rational)
    x = Fraction(xi_mag) if exact else float(xi_mag)
    s = x * x
    one, zero = (Fraction(1), Fraction(0)) if exact else (1.0, 0.0)
    jm = [
        [zero, x, zero, zero],
        [-x, 3 * s, -x, -x],
        [zero, x, s + 4, -one],
        [zero, zero, -4 * one, s + one],
    ]
    # lam I - J as polynomial entries
    ent = [[[-jm[i][j], one] if i == j else [-jm[i][j]] for j in range(4)] for i in range(4)]
    det = [zero]
    for perm in itertools.permutations(range(4)):
        term = [one * _perm_sign(perm)]
        for i, j in enumerate(perm):
            term = _poly_mul(term, ent[i][j])
        det = _poly_add(det, term)
    det = (list(det) + [zero] * 5)[:5]
    # det = sum c_k lam^k; a_i = (-1)^i c_{4-i}
    return tuple((-1) ** i * det[4 - i] for i in range(5))


def hurwitz_minors(a):
    a0, a1, a2, a3, a4 = a
    m1 = a1
    m2 = a1 * a2 - a0 * a3
    m3 = a1 * a2 * a3 - a1 * a1 * a4 - a0 * a3 * a3
    m4 = a4 * m3
    return (m1, m2, m3, m4)


def hurwitz_closed_form(xi_mag):
    """Closed polynomial forms of A1..A3 in ``s = |xi|^2``."""
    s = _square(xi_mag)
    return (5 * s + 5,
            32 * s**3 + 127 * s**2 + 100 * s,
            96 * s**6 + 932 * s**5 + 2731 * s**4 + 2795 * s**3 + 875 * s**2)


def eigenvalues(xi_mag: float) -> np.ndarray:
    """Eigenvalues of ``J(|xi|)`` from the matrix, sorted by real part."""
    ev = np.linalg.eigvals(compressible_symbol(xi_mag))
    return ev[np.lexsort((ev.imag, ev.real))]


def polynomial_roots(a) -> np.ndarray:
    """Roots of ``a0 lam^4 - a1 lam^3 + ...`` through the companion matrix."""
    c = np.array([float(v) * (-1) ** i for i, v in enumerate(a)])
    comp = np.zeros((4, 4))
    comp[0, :] = -c[1:] / c[0]
    comp[1:, :-1] = np.eye(3)
    ev = np.linalg.eigvals(comp)
    return ev[np.lexsort((ev.imag, ev.real))]


@dataclass
class HurwitzReport:
    xi_mag: float
    coefficients: tuple
    minors: tuple
    eigenvalues: np.ndarray
    kappa_gap: float
    verdict: str

    def row(self) -> dict:
        return {
            "xi_mag": float(self.xi_mag),
            **{f"a{i}": float(self.coefficients[i]) for i in range(1, 5)},
            **{f"A{i + 1}": float(self.minors[i]) for i in range(4)},
            "min_re_lambda": float(self.kappa_gap),
            "verdict": self.verdict,
        }


def hurwitz_determinants(xi_mag) -> HurwitzReport:
    """Hurwitz report at one frequency.

    The verdict comes from the minors and is cross-checked against the
    eigenvalue real parts; a disagreement raises ``ArithmeticError``.
    """
    a = characteristic_coefficients(xi_mag)
    minors = hurwitz_minors(a)
    ev = eigenvalues(float(xi_mag))
    gap = float(ev.real.min())
    if all(m > 0 for m in minors):
        verdict = "stable"
    elif any(m < 0 for m in minors):
        verdict = "unstable"
    else:
        verdict = "marginal"
    tol = 1e-12 * max(1.0, float(abs(a[1])))
    eig_verdict = "stable" if gap > tol else ("unstable" if gap < -tol else "marginal")
    if (verdict == "stable") != (eig_verdict == "stable"):
        raise ArithmeticError(f"minors and eigenvalues disagree at |xi|={xi_mag}")
    return HurwitzReport(xi_mag=xi_mag, coefficients=a, minors=minors,
                         eigenvalues=ev, kappa_gap=gap, verdict=verdict)


def _expm_minus(t: float, mat: np.ndarray) -> np.ndarray:
    """``exp(-t M)`` via eigendecomposition when well conditioned, else Pade."""
    if t == 0:
        return np.eye(mat.shape[0], dtype=mat.dtype)
    w, v = np.linalg.eig(mat)
    if np.linalg.cond(v) < EIG_COND_LIMIT:
        out = (v * np.exp(-t * w)) @ np.linalg.inv(v)
        return out.real if np.isrealobj(mat) else out
    return scipy.linalg.expm(-t * mat)


def propagator(t: float, xi_mag: float) -> np.ndarray:
    if t < 0:
        raise ValueError("t must be non-negative")
    return _expm_minus(t, compressible_symbol(xi_mag))


def full_propagator(t: float, xi) -> np.ndarray:
    if t < 0:
        raise ValueError("t must be non-negative")
    return _expm_minus(t, full_symbol(xi))


def full_symbols_batch(kx, ky, kz) -> np.ndarray:
    """``A_xi`` for every mode of a grid, shape ``(..., 6, 6)``."""
    kx, ky, kz = np.broadcast_arrays(kx, ky, kz)
    xi = np.stack([kx, ky, kz], axis=-1)
    s = (xi**2).sum(-1)
    a = np.zeros(s.shape + (6, 6), dtype=complex)
    a[..., 0, 1:4] = 1j * xi
    a[..., 1:4, 0] = 1j * xi
    a[..., 1:4, 1:4] = s[..., None, None] * np.eye(3) + 2 * xi[..., :, None] * xi[..., None, :]
    a[..., 1:4, 4] = 1j * xi
    a[..., 1:4, 5] = 1j * xi
    a[..., 4, 1:4] = 1j * xi
    a[..., 4, 4] = s + 4
    a[..., 4, 5] = -1
    a[..., 5, 4] = -4
    a[..., 5, 5] = s + 1
    return a


def full_propagators_batch(t: float, kx, ky, kz) -> np.ndarray:
    """``exp(-t A_xi)`` for every mode, assembled from the 4x4 block.

    One compressible propagator is computed per distinct ``|xi|^2``; the
    direction enters only through ``d = i xi_hat . u`` and the transverse
    projector, on which the flow is the scalar heat factor ``exp(-|xi|^2 t)``.
    """
    kx, ky, kz = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (kx, ky, kz)))
    xi = np.stack([kx, ky, kz], axis=-1)
    s = (xi**2).sum(-1)
    s_round = np.round(s, 12)
    uniq, inv = np.unique(s_round, return_inverse=True)
    e4u = np.stack([propagator(t, math.sqrt(v)) for v in uniq])
    e4 = e4u[inv.reshape(s.shape)]
    mag = np.sqrt(s)
    safe = np.where(mag > 0, mag, 1.0)
    xh = xi / safe[..., None]
    xh[mag == 0] = (1.0, 0.0, 0.0)

    sh = s.shape
    lmap = np.zeros(sh + (4, 6), dtype=complex)
    lmap[..., 0, 0] = 1
    lmap[..., 1, 1:4] = 1j * xh
    lmap[..., 2, 4] = 1
    lmap[..., 3, 5] = 1
    rmap = np.zeros(sh + (6, 4), dtype=complex)
    rmap[..., 0, 0] = 1
    rmap[..., 1:4, 1] = -1j * xh
    rmap[..., 4, 2] = 1
    rmap[..., 5, 3] = 1
    out = rmap @ e4 @ lmap
    proj = np.eye(3) - xh[..., :, None] * xh[..., None, :]
    out[..., 1:4, 1:4] += np.exp(-t * s)[..., None, None] * proj
    return out


@dataclass
class EnvelopeFit:
    C_fit: float
    kappa_fit: float
    kappa_min_eig: float
    envelope: np.ndarray
    t_grid: np.ndarray


def decay_envelope(r: float, R: float, t_grid, xi_samples) -> EnvelopeFit:
    """Fit ``sup_xi ||exp(-t J)|| <= C exp(-kappa t)`` over a band of frequencies.

    ``kappa_fit`` is the least-squares log-slope over the later half of
    ``t_grid``; ``C_fit`` is the smallest constant that makes the fitted rate
    an upper bound on every sampled time.
    """
    if not 0 < r <= R:
        raise ValueError("need 0 < r <= R")
    xs = np.asarray([x for x in np.atleast_1d(xi_samples) if r <= x <= R], dtype=float)
    if xs.size == 0:
        raise ValueError("no frequency samples inside the band")
    t_grid = np.asarray(t_grid, dtype=float)
    env = np.array([max(np.linalg.norm(propagator(t, x), 2) for x in xs) for t in t_grid])
    kmin = min(float(eigenvalues(x).real.min()) for x in xs)
    late = t_grid >= t_grid[len(t_grid) // 2]
    slope = np.polyfit(t_grid[late], np.log(env[late]), 1)[0]
    kappa = float(-slope)
    c_fit = float(np.max(env * np.exp(kappa * t_grid)))
    return EnvelopeFit(C_fit=c_fit, kappa_fit=kappa, kappa_min_eig=kmin,
                       envelope=env, t_grid=t_grid)


# change of unknowns (rho, d, theta, eta) -> (rho, d, f, g) with f = theta + eta,
# g = 4 theta - eta
_Q = np.array([
    [1.0, 0, 0, 0],
    [0, 1.0, 0, 0],
    [0, 0, 1.0, 1.0],
    [0, 0, 4.0, -1.0],
])


def to_q_variables(v) -> np.ndarray:
    return _Q @ np.asarray(v)


def from_q_variables(w) -> np.ndarray:
    return np.linalg.solve(_Q, np.asarray(w))


def _lyapunov_form(xi_mag: float) -> np.ndarray:
    k = np.eye(4)
    k[0, 1] = k[1, 0] = -xi_mag / 2
    return k


def lyapunov_value(xi_mag: float, w) -> float:
    """``|rho|^2+|d|^2+|f|^2+|g|^2 - |xi| Re(rho conj(d))`` for ``w = (rho, d, f, g)``."""
    w = np.asarray(w, dtype=complex)
    return float((np.sum(np.abs(w) ** 2) - xi_mag * (w[0] * w[1].conjugate()).real))


def _q_generator(xi_mag: float) -> np.ndarray:
    """Generator in q-variables: ``d/dt w = -M w``."""
    return _Q @ compressible_symbol(xi_mag) @ np.linalg.inv(_Q)


def lyapunov_dissipation(xi_mag: float, w) -> tuple[float, float]:
    """Return ``(L, dL/dt)`` along the linear flow for ``w = (rho, d, f, g)``."""
    w = np.asarray(w, dtype=complex)
    m = _q_generator(xi_mag)
    k = _lyapunov_form(xi_mag)
    rate = -float((w.conj() @ (m.T @ k + k @ m) @ w).real)
    return lyapunov_value(xi_mag, w), rate


def lyapunov_rate_constant(xi_mag: float) -> float:
    """Largest ``c`` with ``dL/dt <= -c |xi|^2 L`` for every mode at this frequency."""
    if xi_mag <= 0:
        raise ValueError("needs |xi| > 0")
    m = _q_generator(xi_mag)
    k = _lyapunov_form(xi_mag)
    sym = m.T @ k + k @ m
    lmin = scipy.linalg.eigh(sym, k, eigvals_only=True).min()
    return float(lmin / xi_mag**2)
