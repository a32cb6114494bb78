"""Perturbation variables, nonlinear right-hand sides and the (G, F) variable change.

The perturbation ``(rho, u, theta, eta)`` is taken around the equilibrium
``(1, 0, 1, 1)`` with all physical constants normalised to one.  Each Fourier
mode obeys ``d/dt U + A_xi U = N(U)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .fourier import SpectralGrid

__all__ = [
    "AdmissibilityError",
    "ModelParameters",
    "PerturbationState",
    "NonlinearTerms",
    "DiagonalizedPair",
    "EPS_POS",
    "coeff_functions",
    "nonlinear_terms",
    "linear_rhs",
    "rhs_full",
    "diagonalize",
    "undiagonalize",
]

EPS_POS = 0.25
COMPONENTS = ("rho", "u1", "u2", "u3", "theta", "eta")


class AdmissibilityError(ValueError):
    """The state left the tube ``1 + rho >= eps_pos``."""

    def __init__(self, message, min_density=None):
        super().__init__(message)
        self.min_density = min_density


@dataclass(frozen=True)
class ModelParameters:
    mu: float = 1.0
    lambda_visc: float = 1.0
    kappa: float = 1.0
    gas_const: float = 1.0
    c_v: float = 1.0
    light_speed: float = 1.0
    allow_unnormalized: bool = False

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not 3 * self.lambda_visc + 2 * self.mu > 0:
            raise ValueError("need 3*lambda_visc + 2*mu > 0")
        if not self.light_speed > 0:
            raise ValueError("light_speed must be positive")
        if not (self.normalized or self.allow_unnormalized):
            raise ValueError("non-normalised parameters must be flagged with allow_unnormalized=True")

    @property
    def normalized(self) -> bool:
        return all(getattr(self, f.name) == 1.0 for f in fields(self)
                   if f.name != "allow_unnormalized")

    def require_normalized(self):
        if not self.normalized:
            raise NotImplementedError("only the normalised parameter regime is implemented")


@dataclass(frozen=True, eq=False)
class PerturbationState:
    """Spectral coefficients of ``(rho, u1, u2, u3, theta, eta)``, shape ``(6, n, n, n)``.

    The spectral array is the stored representation; physical values are
    computed on demand and cached.
    """

    grid: SpectralGrid
    spec: np.ndarray
    _phys: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_physical(cls, grid: SpectralGrid, rho, vel, theta, eta) -> "PerturbationState":
        phys = np.empty((6,) + grid.shape)
        phys[0] = rho
        phys[1:4] = vel
        phys[4] = theta
        phys[5] = eta
        return cls(grid, grid.to_spectral(phys))

    @classmethod
    def zeros(cls, grid: SpectralGrid) -> "PerturbationState":
        return cls(grid, np.zeros((6,) + grid.shape, dtype=complex))

    def physical(self) -> np.ndarray:
        if "all" not in self._phys:
            self._phys["all"] = self.grid.to_physical(self.spec)
        return self._phys["all"]

    @property
    def rho(self):
        return self.spec[0]

    @property
    def vel(self):
        return self.spec[1:4]

    @property
    def theta(self):
        return self.spec[4]

    @property
    def eta(self):
        return self.spec[5]

    def min_density(self) -> float:
        return float(1.0 + self.physical()[0].min())

    def check_admissible(self, eps_pos: float = EPS_POS):
        md = self.min_density()
        if md < eps_pos:
            raise AdmissibilityError(f"min(1+rho) = {md:.4g} < {eps_pos}", md)

    def replace(self, spec: np.ndarray) -> "PerturbationState":
        return PerturbationState(self.grid, spec)


@dataclass
class NonlinearTerms:
    n1: np.ndarray
    n2: np.ndarray
    n3: np.ndarray
    n4: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.n1[None], self.n2, self.n3[None], self.n4[None]])


@dataclass
class DiagonalizedPair:
    g_var: np.ndarray
    f_var: np.ndarray


def coeff_functions(rho_value, eps_pos: float = EPS_POS):
    """``g = 1/(1+rho) - 1`` and ``h = 1/(1+rho)``; arrays are accepted."""
    r = np.asarray(rho_value, dtype=float)
    if np.any(1.0 + r < eps_pos):
        raise AdmissibilityError(f"1 + rho below {eps_pos}", float(np.min(1.0 + r)))
    h = 1.0 / (1.0 + r)
    g = h - 1.0
    if r.ndim == 0:
        return float(g), float(h)
    return g, h


def nonlinear_terms(state: PerturbationState, params: ModelParameters | None = None,
                    eps_pos: float = EPS_POS, dealias: bool = True) -> NonlinearTerms:
    """Spectral ``N1..N4``; products are formed on the collocation grid.

    With ``dealias`` the results are truncated by the 2/3 mask.
    """
    (params or ModelParameters()).require_normalized()
    grid = state.grid
    sp = state.spec
    kx, ky, kz = grid.kd
    ks = (kx, ky, kz)
    phys = grid.to_physical

    uh = sp[1:4]
    rho, theta, eta = phys(sp[0]), phys(sp[4]), phys(sp[5])
    if np.any(1.0 + rho < eps_pos):
        raise AdmissibilityError(f"min(1+rho) = {1 + rho.min():.4g} < {eps_pos}",
                                 float(1 + rho.min()))
    g, h = coeff_functions(rho, eps_pos)
    u = phys(uh)
    grad_u = phys(np.stack([[1j * ks[j] * uh[i] for j in range(3)] for i in range(3)]))
    div_u = grad_u[0, 0] + grad_u[1, 1] + grad_u[2, 2]
    grad_rho = phys(grid.grad(sp[0]))
    grad_theta = phys(grid.grad(sp[4]))
    divh = grid.div(uh)
    visc = phys(np.stack([-grid.k2 * uh[i] + 2j * ks[i] * divh - 1j * ks[i] * sp[5]
                          for i in range(3)]))
    heat = phys(-grid.k2 * sp[4] + sp[5] - 4 * sp[4])

    def adv(grad_f):
        return u[0] * grad_f[0] + u[1] * grad_f[1] + u[2] * grad_f[2]

    # (D.D) with D = sym(grad u); grad_u[i, j] = d_j u_i
    sym = 0.5 * (grad_u + grad_u.transpose(1, 0, 2, 3, 4))
    dd = (sym**2).sum(axis=(0, 1))
    rad = theta**4 + 4 * theta**3 + 6 * theta**2

    n1 = -rho * div_u - adv(grad_rho)
    u_grad_u = np.stack([adv(grad_u[i]) for i in range(3)])
    n2 = -u_grad_u - (g + h * theta) * grad_rho + g * visc
    n3 = g * heat - theta * div_u - adv(grad_theta) + h * (div_u**2 + 2 * dd - rad)
    n4 = rad

    out = grid.to_spectral(np.concatenate([n1[None], n2, n3[None], n4[None]]))
    if dealias:
        out *= grid.dealias
    return NonlinearTerms(out[0], out[1:4], out[4], out[5])


def linear_rhs(spec: np.ndarray, grid: SpectralGrid) -> np.ndarray:
    """``-A_xi U`` mode by mode."""
    kx, ky, kz = grid.kd
    k2 = grid.k2
    rho, uh, th, et = spec[0], spec[1:4], spec[4], spec[5]
    divh = grid.div(uh)
    out = np.empty_like(spec, dtype=complex)
    out[0] = -divh
    for i, ki in enumerate((kx, ky, kz)):
        out[1 + i] = -1j * ki * (rho + th + et) - k2 * uh[i] + 2j * ki * divh
    out[4] = -divh - k2 * th - 4 * th + et
    out[5] = -k2 * et - et + 4 * th
    return out


def rhs_full(state: PerturbationState, params: ModelParameters | None = None,
             eps_pos: float = EPS_POS, nonlinear: bool = True) -> np.ndarray:
    """Spectral time derivative of ``(rho, u, theta, eta)``."""
    out = linear_rhs(state.spec, state.grid)
    if nonlinear:
        out += nonlinear_terms(state, params, eps_pos).stacked()
    return out


def diagonalize(theta, eta) -> DiagonalizedPair:
    return DiagonalizedPair(g_var=4 * theta - eta, f_var=theta + eta)


def undiagonalize(pair: DiagonalizedPair):
    return (pair.g_var + pair.f_var) / 5, (4 * pair.f_var - pair.g_var) / 5
