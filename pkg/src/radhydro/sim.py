"""Pseudo-spectral integration of the full perturbation system on a periodic box.

The linear part is propagated exactly, mode by mode, with ``exp(-dt A_xi)``;
the nonlinear terms are explicit (second-order Runge-Kutta in the
integrating-factor frame, or first-order IMEX Euler).
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import struct
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .fourier import CutoffPair, SpectralGrid, frequency_split, h_norm, inner, sobolev_norm
from .model import (
    EPS_POS,
    AdmissibilityError,
    ModelParameters,
    PerturbationState,
    diagonalize,
    nonlinear_terms,
)
from .symbols import eigenvalues, full_propagators_batch, full_symbols_batch

log = logging.getLogger(__name__)

INTEGRATORS = ("ifrk2", "imex-euler")
CHECKPOINT_MAGIC = b"RHCKPT01"
COMPONENT_ORDER = "rho,u1,u2,u3,theta,eta"


@dataclass
class SimConfig:
    n: int = 32
    box_len: float = 4.0
    dt: float = 0.05
    t_end: float = 50.0
    integrator: str = "ifrk2"
    amplitude: float = 1e-3
    r0: float = 0.2
    R0: float = 2.0
    cutoff_shape: str = "smooth"
    monitor_every: int = 10
    seed: int = 0
    coupling_coeff: float = 0.05
    eps_pos: float = EPS_POS
    linear_only: bool = False

    def validation_errors(self) -> list[str]:
        errs = []
        if self.n < 8 or self.n & (self.n - 1):
            errs.append(f"n must be a power of two >= 8, got {self.n}")
        if not self.box_len > 0:
            errs.append("box_len must be positive")
        if not self.dt > 0:
            errs.append("dt must be positive")
        if not self.t_end >= 0:
            errs.append("t_end must be non-negative")
        if self.integrator not in INTEGRATORS:
            errs.append(f"integrator must be one of {INTEGRATORS}")
        if not self.amplitude >= 0:
            errs.append("amplitude must be non-negative")
        if not 0 < self.r0 < 0.25:
            errs.append(f"r0 must lie in (0, 1/4), got {self.r0}")
        if not self.R0 > 1:
            errs.append(f"R0 must exceed 1, got {self.R0}")
        if self.monitor_every < 1:
            errs.append("monitor_every must be >= 1")
        if not 0 < self.eps_pos < 1:
            errs.append("eps_pos must lie in (0, 1)")
        return errs

    def validate(self):
        errs = self.validation_errors()
        if errs:
            raise ValueError("; ".join(errs))

    @property
    def grid(self) -> SpectralGrid:
        return SpectralGrid(self.n, self.box_len)

    @property
    def cutoffs(self) -> CutoffPair:
        return CutoffPair(self.r0, self.R0, self.cutoff_shape)

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def random_initial_state(grid: SpectralGrid, amplitude: float, seed: int = 0,
                         kmax_frac: float = 0.25) -> PerturbationState:
    """Mean-free random fields with support in ``|k| <= kmax_frac * n``.

    ``amplitude`` is the volume-normalised ``H^2`` norm
    ``||U||_{H^2} / sqrt(|box|)``, so it measures the pointwise size of the
    perturbation independently of the box length.
    """
    rng = np.random.default_rng(seed)
    white = rng.standard_normal((6,) + grid.shape)
    spec = grid.to_spectral(white)
    kint = np.sqrt(grid.k2) * grid.box_len
    spec *= (kint <= kmax_frac * grid.n) & (grid.k2 > 0)
    spec *= grid.dealias
    nrm = h_norm(spec, grid, 2)
    if nrm > 0:
        spec *= amplitude * math.sqrt(grid.volume) / nrm
    return PerturbationState(grid, spec)


def single_mode_state(grid: SpectralGrid, kvec, amplitudes, phase: float = 0.0) -> PerturbationState:
    """Real state ``a_c cos(k.x + phase)`` for each of the six components."""
    x = grid.x
    arg = sum(ki / grid.box_len * xi for ki, xi in zip(kvec, x)) + phase
    phys = np.stack([a * np.cos(arg) * np.ones(grid.shape) for a in amplitudes])
    return PerturbationState(grid, grid.to_spectral(phys))


# -- energy bookkeeping ------------------------------------------------------

def energy_functionals(state: PerturbationState, cutoffs: CutoffPair,
                       coupling_coeff: float = 0.05) -> tuple[float, float]:
    """Return the high-order functional and the zero-order functional.

    high = ||grad^2 U||^2 - c <grad div u, grad rho^h>
    zero = ||(rho, u, F)||^2 + 1/2 ||G||^2 + 1/4 <u, grad rho^l>
    """
    grid = state.grid
    sp = state.spec
    kx, ky, kz = grid.kd
    _, _, rho_h = frequency_split(sp[0], grid, cutoffs)
    rho_l, _, _ = frequency_split(sp[0], grid, cutoffs)
    divh = grid.div(sp[1:4])
    grad_div = np.stack([1j * k * divh for k in (kx, ky, kz)])
    high = sobolev_norm(sp, grid, 2) ** 2 - coupling_coeff * inner(grid, grad_div, grid.grad(rho_h))
    pair = diagonalize(sp[4], sp[5])
    zero = (sobolev_norm(sp[0:4], grid) ** 2 + sobolev_norm(pair.f_var, grid) ** 2
            + 0.5 * sobolev_norm(pair.g_var, grid) ** 2
            + 0.25 * inner(grid, sp[1:4], grid.grad(rho_l)))
    return float(high), float(zero)


_ENERGY_WEIGHTS = np.array([4.0, 4.0, 4.0, 4.0, 4.0, 1.0])


def weighted_energy(state: PerturbationState) -> float:
    """``1/2 (|2 rho|^2 + |2 u|^2 + |2 theta|^2 + |eta|^2)`` integrated."""
    sp = state.spec
    return 0.5 * float(sum(w * sobolev_norm(sp[i], state.grid) ** 2
                           for i, w in enumerate(_ENERGY_WEIGHTS)))


def dissipation(state: PerturbationState) -> float:
    g, sp = state.grid, state.spec
    div_u = g.div(sp[1:4])
    return (4 * sobolev_norm(sp[1:4], g, 1) ** 2 + 4 * sobolev_norm(sp[4], g, 1) ** 2
            + sobolev_norm(sp[5], g, 1) ** 2 + 8 * sobolev_norm(div_u, g) ** 2
            + sobolev_norm(4 * sp[4] - sp[5], g) ** 2)


def energy_source(state: PerturbationState, nl: np.ndarray | None) -> float:
    """Right side of the weighted balance: coupling through grad eta plus the
    weighted nonlinear work.

    With weights (4, 4, 4, 1) the velocity/radiation coupling enters as
    ``-4 <u, grad eta>``.
    """
    g, sp = state.grid, state.spec
    src = -4 * inner(g, sp[1:4], g.grad(sp[5]))
    if nl is not None:
        src += sum(w * inner(g, sp[i], nl[i]) for i, w in enumerate(_ENERGY_WEIGHTS))
    return float(src)


# -- integrator --------------------------------------------------------------

class Simulator:
    """Holds the grid, cached per-mode propagators and the integrator."""

    def __init__(self, config: SimConfig, params: ModelParameters | None = None):
        config.validate()
        self.config = config
        self.params = params or ModelParameters()
        self.params.require_normalized()
        self.grid = config.grid
        self.cutoffs = config.cutoffs
        self._props: dict[float, np.ndarray] = {}
        self._imex: dict[float, np.ndarray] = {}

    def propagator(self, h: float) -> np.ndarray:
        key = round(h, 15)
        if key not in self._props:
            kx, ky, kz = self.grid.kd
            p = full_propagators_batch(h, kx, ky, kz)
            self._props[key] = np.ascontiguousarray(p)
        return self._props[key]

    def _imex_solve(self, h: float) -> np.ndarray:
        key = round(h, 15)
        if key not in self._imex:
            kx, ky, kz = self.grid.kd
            a = full_symbols_batch(kx, ky, kz)
            self._imex[key] = np.linalg.inv(np.eye(6) + h * a)
        return self._imex[key]

    def drop_cache(self, keep: float | None = None):
        for cache in (self._props, self._imex):
            for key in list(cache):
                if keep is None or key != round(keep, 15):
                    del cache[key]

    @staticmethod
    def _apply(mats: np.ndarray, spec: np.ndarray) -> np.ndarray:
        return np.einsum("xyzij,jxyz->ixyz", mats, spec, optimize=True)

    def nonlinear(self, spec: np.ndarray) -> np.ndarray | None:
        if self.config.linear_only:
            return None
        st = PerturbationState(self.grid, spec)
        return nonlinear_terms(st, self.params, self.config.eps_pos).stacked()

    def step(self, state: PerturbationState, h: float | None = None) -> PerturbationState:
        h = self.config.dt if h is None else h
        u0 = state.spec
        if self.config.integrator == "imex-euler":
            nl = self.nonlinear(u0)
            rhs = u0 if nl is None else u0 + h * nl
            return state.replace(self._apply(self._imex_solve(h), rhs))
        e = self.propagator(h)
        eu = self._apply(e, u0)
        n0 = self.nonlinear(u0)
        if n0 is None:
            return state.replace(eu)
        en0 = self._apply(e, n0)
        pred = eu + h * en0
        n1 = self.nonlinear(pred)
        return state.replace(eu + 0.5 * h * (en0 + n1))

    def stability_bound(self, state: PerturbationState) -> float:
        """Advisory explicit step limit from the strongest nonlinear multiplier."""
        phys = state.physical()
        rho, u, theta = phys[0], phys[1:4], phys[4]
        kmax2 = float((self.grid.k2 * self.grid.dealias).max())
        g_max = float(np.abs(1.0 / (1.0 + rho) - 1.0).max()) if rho.min() > -1 else np.inf
        u_max = float(np.sqrt((u**2).sum(0)).max())
        th_max = float(np.abs(theta).max())
        rate = 3 * g_max * kmax2 + u_max * math.sqrt(kmax2) + 12 * th_max * (1 + th_max) ** 2
        return math.inf if rate == 0 else 2.0 / rate


# -- monitors ----------------------------------------------------------------

def _monitor_sample(sim: Simulator, t: float, state: PerturbationState) -> dict:
    g, sp = sim.grid, state.spec
    nl = sim.nonlinear(sp)
    high, zero = energy_functionals(state, sim.cutoffs, sim.config.coupling_coeff)
    norms = [sobolev_norm(sp, g, m) for m in range(3)]
    gvar = 4 * sp[4] - sp[5]
    imag = float(np.abs(g.to_physical_complex(sp).imag).max())
    diss_n = (h_norm(g.grad(sp[0]), g, 1) ** 2 + h_norm(
        np.concatenate([g.grad(sp[i]) for i in range(1, 6)]), g, 2) ** 2
        + h_norm(gvar, g, 2) ** 2)
    return {
        "t": t,
        "norm0": norms[0], "norm1": norms[1], "norm2": norms[2],
        "h2": h_norm(sp, g, 2),
        "rho": sobolev_norm(sp[0], g), "u": sobolev_norm(sp[1:4], g),
        "theta": sobolev_norm(sp[4], g), "eta": sobolev_norm(sp[5], g),
        "g_relax": sobolev_norm(gvar, g),
        "H": high, "L": zero,
        "H_ratio": high / norms[2] ** 2 if norms[2] > 0 else 1.0,
        "L_ratio": zero / norms[0] ** 2 if norms[0] > 0 else 1.0,
        "energy": weighted_energy(state),
        "dissipation": dissipation(state),
        "source": energy_source(state, nl),
        "n_dissipation": diss_n,
        "min_density": state.min_density(),
        "max_imag": imag,
        "dominant": lowest_shell_compressible(state),
    }


def lowest_shell_compressible(state: PerturbationState) -> float:
    """L^2 norm of ``(rho, d, theta, eta)`` restricted to the shell ``|xi| = 1/L``.

    ``d = Lambda^{-1} div u`` is the compressible part of the velocity, so the
    incompressible modes (decaying at ``|xi|^2``) are excluded.  At late times
    this is the component carrying the slowest linear mode.
    """
    g, sp = state.grid, state.spec
    shell = np.rint(g.k2 * g.box_len**2) == 1
    kx, ky, kz = (np.broadcast_to(k, g.shape)[shell] for k in g.kd)
    kmag = np.sqrt(kx**2 + ky**2 + kz**2)
    d = (kx * sp[1][shell] + ky * sp[2][shell] + kz * sp[3][shell]) / kmag
    tot = (np.abs(sp[[0, 4, 5]][:, shell]) ** 2).sum() + (np.abs(d) ** 2).sum()
    return math.sqrt(float(tot) / g.volume)


def balance_residual(sim: Simulator, times, states, nodes: int = 3):
    """Residual of the weighted zero-order energy balance between samples.

    For each interval ``[t_k, t_{k+1}]`` returns
    ``(E_{k+1} - E_k + int (D - S) dt) / (t_{k+1} - t_k)``; the integral uses
    Gauss-Legendre nodes whose states come from one integrator step out of
    ``t_k``.  Also returns the energy at the left end of each interval.
    """
    times = np.asarray(times, dtype=float)
    if len(times) < 2:
        raise ValueError("need at least two samples")
    x, w = np.polynomial.legendre.leggauss(nodes)
    res, scale = [], []
    for k in range(len(times) - 1):
        dt = times[k + 1] - times[k]
        acc = 0.0
        for xj, wj in zip(x, w):
            tau = 0.5 * dt * (1 + xj)
            sub = sim.step(states[k], tau)
            acc += 0.5 * dt * wj * (dissipation(sub) - energy_source(sub, sim.nonlinear(sub.spec)))
        e0, e1 = weighted_energy(states[k]), weighted_energy(states[k + 1])
        res.append((e1 - e0 + acc) / dt)
        scale.append(e0)
    sim.drop_cache(keep=sim.config.dt)
    return np.array(res), np.array(scale)


# -- runs ----------------------------------------------------------------------

@dataclass
class RunRecord:
    config: dict
    config_hash: str
    series: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    abort: dict | None = None
    version: str = __version__

    @property
    def aborted(self) -> bool:
        return self.abort is not None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=1, default=_json_default)

    def csv_rows(self) -> tuple[list[str], list[list]]:
        cols = list(self.series)
        rows = [list(r) for r in zip(*(self.series[c] for c in cols))]
        return cols, rows


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj))


def linear_gap(box_len: float) -> float:
    """Smallest decay rate of the linear flow at the lowest nonzero wavenumber."""
    xi = 1.0 / box_len
    return min(float(eigenvalues(xi).real.min()), xi * xi)


def run(config: SimConfig, initial: PerturbationState | None = None,
        params: ModelParameters | None = None, keep_states: bool = False):
    """Integrate to ``t_end`` and return a ``RunRecord`` (and the sampled states
    when ``keep_states``)."""
    sim = Simulator(config, params)
    state = initial if initial is not None else random_initial_state(
        sim.grid, config.amplitude, config.seed)
    record = RunRecord(config=asdict(config), config_hash=config.digest())
    bound = sim.stability_bound(state)
    record.constants["dt_advisory_bound"] = 0.5 * bound if math.isfinite(bound) else None
    if math.isfinite(bound) and config.dt > 0.5 * bound:
        warnings.warn(f"dt={config.dt} exceeds advisory bound {0.5 * bound:.3g}", RuntimeWarning)

    nsteps = int(round(config.t_end / config.dt))
    samples, states = [], []
    t = 0.0
    try:
        for k in range(nsteps + 1):
            if k % config.monitor_every == 0 or k == nsteps:
                state.check_admissible(config.eps_pos)
                samples.append(_monitor_sample(sim, t, state))
                if keep_states:
                    states.append(state)
                if not all(math.isfinite(v) for v in samples[-1].values()):
                    raise FloatingPointError("non-finite monitor value")
            if k == nsteps:
                break
            state = sim.step(state)
            t = (k + 1) * config.dt
    except (AdmissibilityError, FloatingPointError) as exc:
        record.abort = {"time": t, "reason": str(exc),
                        "min_density": getattr(exc, "min_density", None)}
        log.warning("run aborted at t=%g: %s", t, exc)
    _finalise(record, samples)
    if keep_states:
        return record, states
    return record


def _finalise(record: RunRecord, samples: list[dict]):
    if not samples:
        return
    record.series = {key: [s[key] for s in samples] for key in samples[0]}
    ser = record.series
    t = np.array(ser["t"])
    h2sq = np.array(ser["h2"]) ** 2
    diss = np.array(ser["n_dissipation"])
    integral = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (diss[1:] + diss[:-1]))])
    n_func = np.maximum.accumulate(h2sq) + integral
    ser["N_functional"] = n_func.tolist()
    energy = np.array(ser["energy"])
    net = np.array(ser["dissipation"]) - np.array(ser["source"])
    with np.errstate(invalid="ignore", divide="ignore"):
        trap = np.diff(energy) / np.diff(t) + 0.5 * (net[1:] + net[:-1])
    ser["balance_trapezoid"] = [0.0] + np.nan_to_num(trap).tolist()
    c = record.constants
    c["N_ratio_max"] = float(n_func.max() / n_func[0]) if n_func[0] > 0 else 0.0
    c["H_ratio_min"], c["H_ratio_max"] = float(min(ser["H_ratio"])), float(max(ser["H_ratio"]))
    c["L_ratio_min"], c["L_ratio_max"] = float(min(ser["L_ratio"])), float(max(ser["L_ratio"]))
    c["min_density"] = float(min(ser["min_density"]))
    c["max_imag"] = float(max(ser["max_imag"]))
    c["h2_final_over_initial"] = float(np.sqrt(h2sq[-1] / h2sq[0])) if h2sq[0] > 0 else 0.0
    c["linear_gap"] = linear_gap(record.config["box_len"])
    n0 = np.array(ser["norm0"])
    late = t >= 0.5 * t[-1]
    if late.sum() >= 3 and np.all(n0[late] > 0):
        c["late_slope"] = float(np.polyfit(t[late], np.log(n0[late]), 1)[0])
    else:
        c["late_slope"] = None
    dom = np.array(ser["dominant"])
    if late.sum() >= 3 and np.all(dom[late] > 0):
        c["dominant_slope"] = float(np.polyfit(t[late], np.log(dom[late]), 1)[0])
    else:
        c["dominant_slope"] = None


# -- spot checks ---------------------------------------------------------------

def linear_limit_error(config: SimConfig, steps: int = 100, amplitude: float = 1e-8,
                       n: int | None = None) -> float:
    """Relative gap between ``steps`` integrator steps and the exact linear
    propagator, for random data of the given (tiny) amplitude."""
    cfg = SimConfig(**{**asdict(config), "n": n or config.n, "linear_only": False})
    sim = Simulator(cfg)
    state = random_initial_state(sim.grid, amplitude, cfg.seed)
    u0 = state.spec
    for _ in range(steps):
        state = sim.step(state)
    kx, ky, kz = sim.grid.kd
    ref = Simulator._apply(full_propagators_batch(steps * cfg.dt, kx, ky, kz), u0)
    return float(np.linalg.norm(state.spec - ref) / np.linalg.norm(ref))


def _integrate(sim: Simulator, state: PerturbationState, h: float, t_end: float):
    for _ in range(int(round(t_end / h))):
        state = sim.step(state, h)
    return state


def step_convergence(config: SimConfig, t_end: float = 1.0, dt: float = 0.1,
                     amplitude: float = 0.01, n: int = 16) -> dict:
    """Self-convergence of the integrator against a ``dt/8`` reference.

    Returns the terminal errors at ``dt`` and ``dt/2`` and their ratio
    (about 4 for a second-order scheme).
    """
    cfg = SimConfig(**{**asdict(config), "n": n, "dt": dt, "linear_only": False})
    sim = Simulator(cfg)
    u0 = random_initial_state(sim.grid, amplitude, cfg.seed, kmax_frac=0.125)
    ref = _integrate(sim, u0, dt / 8, t_end).spec
    errs = [float(np.linalg.norm(_integrate(sim, u0, h, t_end).spec - ref) / np.linalg.norm(ref))
            for h in (dt, dt / 2)]
    sim.drop_cache()
    return {"error_dt": errs[0], "error_half": errs[1], "ratio": errs[0] / errs[1]}


def balance_convergence(config: SimConfig, t_end: float = 1.0, dt: float = 0.05,
                        amplitude: float = 0.01, n: int = 16) -> dict:
    """Largest balance residual over ``[t_end/2, t_end]`` at ``dt`` and ``dt/2``.

    The first half is excluded so that both resolutions are compared on the
    same time window after the initial transient.
    """
    out = []
    for h in (dt, dt / 2):
        cfg = SimConfig(**{**asdict(config), "n": n, "dt": h, "linear_only": False})
        sim = Simulator(cfg)
        state = random_initial_state(sim.grid, amplitude, cfg.seed, kmax_frac=0.125)
        times, states = [0.0], [state]
        for k in range(int(round(t_end / h))):
            state = sim.step(state)
            times.append((k + 1) * h)
            states.append(state)
        res, scale = balance_residual(sim, times, states)
        late = np.asarray(times[:-1]) >= 0.5 * t_end - 1e-12
        out.append(float(np.abs(res[late]).max() / max(scale.max(), 1e-300)))
    return {"residual_dt": out[0], "residual_half": out[1], "ratio": out[0] / out[1]}


# -- checkpoints ---------------------------------------------------------------

def save_checkpoint(path, state: PerturbationState, t: float):
    """Binary restart file: magic, version, n, L, t, component order, then
    row-major complex128 pairs (little endian)."""
    order = COMPONENT_ORDER.encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<IIdd", 1, state.grid.n, state.grid.box_len, t))
        fh.write(struct.pack("<I", len(order)))
        fh.write(order)
        fh.write(np.ascontiguousarray(state.spec, dtype="<c16").tobytes())


def load_checkpoint(path) -> tuple[PerturbationState, float]:
    with open(path, "rb") as fh:
        if fh.read(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
            raise ValueError("not a checkpoint file")
        version, n, box_len, t = struct.unpack("<IIdd", fh.read(24))
        if version != 1:
            raise ValueError(f"unsupported checkpoint version {version}")
        (olen,) = struct.unpack("<I", fh.read(4))
        if fh.read(olen).decode() != COMPONENT_ORDER:
            raise ValueError("unexpected component order")
        data = np.frombuffer(fh.read(), dtype="<c16")
    grid = SpectralGrid(n, box_len)
    return PerturbationState(grid, data.reshape((6,) + grid.shape).astype(complex)), t
