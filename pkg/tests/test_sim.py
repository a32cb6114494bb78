import math

import numpy as np
import pytest

from radhydro.fourier import h_norm, sobolev_norm
from radhydro.model import PerturbationState
from radhydro.sim import (
    SimConfig,
    Simulator,
    balance_convergence,
    balance_residual,
    energy_functionals,
    linear_gap,
    linear_limit_error,
    load_checkpoint,
    lowest_shell_compressible,
    random_initial_state,
    run,
    save_checkpoint,
    single_mode_state,
    step_convergence,
)
from radhydro.symbols import full_propagator

from conftest import random_real_spec

SMALL = dict(n=16, box_len=2.0, dt=0.05, monitor_every=5)


def test_config_validation_collects_everything():
    errs = SimConfig(n=12, dt=0, r0=0.3, R0=1.0, integrator="rk4").validation_errors()
    assert len(errs) == 5
    with pytest.raises(ValueError):
        Simulator(SimConfig(n=6))


def test_zero_state_stays_zero():
    cfg = SimConfig(**SMALL, t_end=0.5, amplitude=0.0)
    rec = run(cfg)
    assert not rec.aborted
    assert max(rec.series["norm0"]) == 0.0
    assert rec.constants["min_density"] == 1.0


def test_amplitude_is_volume_normalised():
    for box in (1.0, 4.0):
        cfg = SimConfig(n=16, box_len=box)
        st = random_initial_state(cfg.grid, 0.3, seed=2)
        assert h_norm(st.spec, cfg.grid, 2) / math.sqrt(cfg.grid.volume) == pytest.approx(0.3)


def test_single_mode_linear_oracle():
    cfg = SimConfig(**SMALL, t_end=2.0, linear_only=True)
    sim = Simulator(cfg)
    kvec = (1, 2, 0)
    state = single_mode_state(sim.grid, kvec, [1e-3, 2e-3, -1e-3, 5e-4, 1e-3, -2e-3])
    u0 = state.spec.copy()
    for _ in range(40):
        state = sim.step(state)
    xi = np.array(kvec) / cfg.box_len
    idx = tuple(k % cfg.n for k in kvec)
    expect = full_propagator(2.0, xi) @ u0[(slice(None),) + idx]
    got = state.spec[(slice(None),) + idx]
    assert np.linalg.norm(got - expect) <= 1e-6 * np.linalg.norm(expect)


def test_single_mode_weak_nonlinearity_close_to_linear():
    cfg = SimConfig(**SMALL, t_end=1.0)
    sim = Simulator(cfg)
    kvec = (1, 0, 0)
    state = single_mode_state(sim.grid, kvec, [1e-7] * 6)
    u0 = state.spec.copy()
    for _ in range(20):
        state = sim.step(state)
    idx = (1, 0, 0)
    expect = full_propagator(1.0, np.array(kvec) / cfg.box_len) @ u0[(slice(None),) + idx]
    got = state.spec[(slice(None),) + idx]
    assert np.linalg.norm(got - expect) <= 1e-6 * np.linalg.norm(expect)


def test_linear_limit_error_small():
    assert linear_limit_error(SimConfig(**SMALL), steps=100) <= 1e-6


@pytest.mark.slow
def test_step_convergence_second_order():
    conv = step_convergence(SimConfig(**SMALL))
    assert 3.2 <= conv["ratio"] <= 5.0


def test_imex_is_first_order():
    conv = step_convergence(SimConfig(**{**SMALL, "integrator": "imex-euler"}), t_end=0.5)
    assert 1.6 <= conv["ratio"] <= 2.8


@pytest.mark.slow
def test_balance_residual_converges():
    bal = balance_convergence(SimConfig(**SMALL))
    assert 3.2 <= bal["ratio"] <= 5.0


def test_linear_balance_closes():
    cfg = SimConfig(**{**SMALL, "dt": 1e-3}, t_end=0.02, linear_only=True)
    sim = Simulator(cfg)
    state = random_initial_state(sim.grid, 1e-2, seed=1)
    times, states = [0.0], [state]
    for k in range(20):
        state = sim.step(state)
        times.append((k + 1) * cfg.dt)
        states.append(state)
    res, scale = balance_residual(sim, times, states)
    assert np.abs(res).max() / scale.max() < 1e-10


def test_energy_functionals_zero_state(grid16):
    cfg = SimConfig(n=16, box_len=1.0)
    assert energy_functionals(PerturbationState.zeros(grid16), cfg.cutoffs) == (0.0, 0.0)


def test_high_functional_without_density(grid16, rng):
    cfg = SimConfig(n=16, box_len=1.0)
    spec = random_real_spec(grid16, rng, comps=6)
    spec[0] = 0
    high, _ = energy_functionals(PerturbationState(grid16, spec), cfg.cutoffs)
    assert high == pytest.approx(sobolev_norm(spec, grid16, 2) ** 2, rel=1e-12)


def test_high_functional_equivalence_random(grid16, rng):
    cfg = SimConfig(n=16, box_len=1.0)
    for _ in range(100):
        spec = random_real_spec(grid16, rng, comps=6)
        spec *= rng.uniform(0.1, 10) ** np.arange(6)[:, None, None, None] / 10
        st = PerturbationState(grid16, spec)
        high, zero = energy_functionals(st, cfg.cutoffs)
        ratio = high / sobolev_norm(spec, grid16, 2) ** 2
        assert 1 / 1.2 <= ratio <= 1.2
        assert zero > 0


def test_amplitude_ten_aborts():
    with pytest.warns(RuntimeWarning, match="advisory bound"):
        rec = run(SimConfig(**SMALL, t_end=1.0, amplitude=10.0))
    assert rec.aborted
    assert rec.abort["min_density"] is not None and rec.abort["min_density"] < 0.25


def test_short_run_monitors():
    rec = run(SimConfig(**SMALL, t_end=2.0, amplitude=1e-3))
    c = rec.constants
    assert not rec.aborted
    assert 0.8 <= c["H_ratio_min"] <= c["H_ratio_max"] <= 1.2
    assert c["max_imag"] < 1e-10
    assert c["min_density"] > 0.99
    assert rec.series["balance_trapezoid"][0] == 0.0
    assert len(rec.series["t"]) == 9
    cols, rows = rec.csv_rows()
    assert cols[0] == "t" and len(rows) == 9


def test_radiation_relaxation_decays_faster():
    rec = run(SimConfig(**SMALL, t_end=5.0, amplitude=1e-3))
    g = np.array(rec.series["g_relax"])
    n0 = np.array(rec.series["norm0"])
    # the G = 4 theta - eta combination is damped at rate ~5 and becomes a
    # small fraction of the whole state
    assert g[-1] / n0[-1] < 0.5 * g[0] / n0[0]


def test_lowest_shell_ignores_shear():
    cfg = SimConfig(n=16, box_len=1.0)
    # u = (0, cos x1, 0) is divergence free on the lowest shell
    st = single_mode_state(cfg.grid, (1, 0, 0), [0, 0, 1.0, 0, 0, 0])
    assert lowest_shell_compressible(st) < 1e-12
    st = single_mode_state(cfg.grid, (1, 0, 0), [1.0, 0, 0, 0, 0, 0])
    assert lowest_shell_compressible(st) == pytest.approx(math.sqrt(cfg.grid.volume / 2), rel=1e-12)


def test_linear_gap_value():
    assert linear_gap(4.0) == pytest.approx(0.0300216, abs=1e-6)
    assert linear_gap(1.0) == pytest.approx(0.24512233, abs=1e-7)


def test_checkpoint_round_trip(tmp_path, grid16, rng):
    st = PerturbationState(grid16, random_real_spec(grid16, rng, comps=6))
    path = tmp_path / "state.ckpt"
    save_checkpoint(path, st, 3.25)
    back, t = load_checkpoint(path)
    assert t == 3.25 and back.grid == grid16
    assert np.array_equal(back.spec, st.spec)
    path.write_bytes(b"garbage")
    with pytest.raises(ValueError):
        load_checkpoint(path)


def test_restart_matches_continuous_run(tmp_path):
    cfg = SimConfig(**SMALL, t_end=0.5)
    sim = Simulator(cfg)
    st = random_initial_state(sim.grid, 1e-3, seed=4)
    a = st
    for _ in range(10):
        a = sim.step(a)
    b = st
    for _ in range(5):
        b = sim.step(b)
    save_checkpoint(tmp_path / "c", b, 0.25)
    b, _ = load_checkpoint(tmp_path / "c")
    for _ in range(5):
        b = sim.step(b)
    assert np.array_equal(a.spec, b.spec)
