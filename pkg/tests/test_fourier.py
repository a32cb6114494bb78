import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from radhydro.fourier import (
    CutoffPair,
    SpectralGrid,
    bernstein_check,
    fractional_laplacian,
    frequency_split,
    h_norm,
    hodge_reconstruct,
    hodge_split,
    inner,
    sobolev_norm,
)

from conftest import random_real_spec


def test_grid_rejects_bad_sizes():
    with pytest.raises(ValueError):
        SpectralGrid(12, 1.0)
    with pytest.raises(ValueError):
        SpectralGrid(16, 0.0)


def test_parseval_matches_physical_quadrature(grid16, rng):
    f = rng.standard_normal(grid16.shape)
    fh = grid16.to_spectral(f)
    phys = math.sqrt((f**2).sum() * grid16.spacing**3)
    assert sobolev_norm(fh, grid16) == pytest.approx(phys, rel=1e-12)


def test_round_trip_is_identity(grid16, rng):
    f = rng.standard_normal((3,) + grid16.shape)
    back = grid16.to_physical(grid16.to_spectral(f))
    assert np.abs(back - f).max() < 1e-13


def test_nyquist_zeroed_on_differentiation(grid16):
    ones = np.ones(grid16.shape, complex)
    assert np.all(grid16.grad(ones)[:, grid16.nyquist] == 0)
    assert np.all(grid16.laplacian(ones)[grid16.nyquist] == 0)
    assert np.any(grid16.grad(ones)[:, ~grid16.nyquist] != 0)


def test_dealias_mask_idempotent(grid16):
    m = grid16.dealias
    assert np.array_equal(m & m, m)
    assert not m[grid16.n // 3 + 1, 0, 0]


# fractional Laplacian ---------------------------------------------------------

def test_fractional_identity_and_single_mode(grid16):
    x1 = grid16.x[0] * np.ones(grid16.shape)
    fh = grid16.to_spectral(np.sin(x1))
    assert np.array_equal(fractional_laplacian(fh, grid16, 0), fh)
    out = grid16.to_physical(fractional_laplacian(fh, grid16, 2))
    assert np.abs(out - np.sin(x1)).max() < 1e-12


def test_fractional_inverse_on_mean_free(grid16, rng):
    fh = random_real_spec(grid16, rng)
    back = fractional_laplacian(fractional_laplacian(fh, grid16, -1), grid16, 1)
    assert np.abs(back - fh).max() < 1e-12 * np.abs(fh).max()


def test_fractional_negative_rejects_mean(grid16, rng):
    fh = random_real_spec(grid16, rng, mean_free=False)
    with pytest.raises(ValueError):
        fractional_laplacian(fh, grid16, -1)
    out = fractional_laplacian(fh, grid16, -1, strict=False)
    assert out[0, 0, 0] == 0


# cutoffs and splitting -----------------------------------------------------------

def test_cutoff_validation_is_exhaustive():
    with pytest.raises(ValueError) as exc:
        CutoffPair(0.3, 0.5, "square")
    msg = str(exc.value)
    assert "r0" in msg and "R0" in msg and "shape" in msg


@pytest.mark.parametrize("shape", ["smooth", "cosine"])
def test_cutoff_plateaus(shape):
    cut = CutoffPair(0.2, 2.0, shape)
    r = np.linspace(0, 5, 2001)
    p0, pm, p1 = cut.weights(r)
    assert np.all(p0[r <= 0.1] == 1) and np.all(p0[r > 0.2] == 0)
    assert np.all(p1[r < 1.0] == 0) and np.all(p1[r > 3.0] == 1)
    assert np.all((pm >= 0) & (pm <= 1))
    assert np.all(p0 + p1 <= 1)


def _cos_mode(grid, k):
    fh = np.zeros(grid.shape, complex)
    fh[k, 0, 0] = fh[-k, 0, 0] = 0.5 * grid.volume
    return fh


def test_split_plateau_examples():
    cut = CutoffPair()
    grid = SpectralGrid(32, 40.0)
    low = _cos_mode(grid, 2)  # |xi| = 0.05 <= r0/2
    fl, fm, fh = frequency_split(low, grid, cut)
    assert np.array_equal(fl, low) and not fm.any() and not fh.any()
    grid2 = SpectralGrid(32, 1.0)
    high = _cos_mode(grid2, 5)  # |xi| = 5 > R0 + 1
    hl, hm, hh = frequency_split(high, grid2, cut)
    assert np.array_equal(hh, high) and not hl.any() and not hm.any()


@given(seed=st.integers(0, 2**31 - 1), L=st.sampled_from([1.0, 4.0, 20.0]),
       shape=st.sampled_from(["smooth", "cosine"]))
def test_partition_of_unity(seed, L, shape):
    grid = SpectralGrid(16, L)
    f = np.random.default_rng(seed).standard_normal(grid.shape)
    parts = frequency_split(grid.to_spectral(f), grid, CutoffPair(shape=shape))
    total = sum(grid.to_physical(p) for p in parts)
    assert np.abs(total - f).max() < 1e-13 * max(1.0, np.abs(f).max())


def test_split_commutes_with_multiplier(rng):
    grid = SpectralGrid(16, 10.0)
    fh = random_real_spec(grid, rng)
    cut = CutoffPair()
    a = frequency_split(fractional_laplacian(fh, grid, 1.5), grid, cut)
    b = [fractional_laplacian(p, grid, 1.5) for p in frequency_split(fh, grid, cut)]
    for x, y in zip(a, b):
        assert np.abs(x - y).max() <= 1e-13 * np.abs(fh).max()


def test_low_projection_idempotent_on_plateaus(rng):
    grid = SpectralGrid(16, 40.0)
    cut = CutoffPair()
    fh = random_real_spec(grid, rng)
    once, _, _ = frequency_split(fh, grid, cut)
    twice, _, _ = frequency_split(once, grid, cut)
    p0 = cut.phi0(grid.kmag)
    plateau = (p0 == 0) | (p0 == 1)
    assert np.array_equal(twice[plateau], once[plateau])
    assert np.all(np.abs(twice) <= np.abs(once) + 1e-300)


# Bernstein ----------------------------------------------------------------------

def test_bernstein_single_low_mode():
    grid = SpectralGrid(16, 20.0)  # |xi| = 1/20 = r0/4
    cut = CutoffPair()
    x1 = grid.x[0] * np.ones(grid.shape)
    fh = grid.to_spectral(np.cos(x1 / grid.box_len))
    items = {b.name: b for b in bernstein_check(fh, grid, cut, 1, 0, 2)}
    fl, _, _ = frequency_split(fh, grid, cut)
    assert sobolev_norm(fl, grid, 1) == pytest.approx(0.05 * sobolev_norm(fl, grid), rel=1e-12)
    assert items["low-reverse"].holds


def test_bernstein_zero_field(grid16):
    items = bernstein_check(np.zeros(grid16.shape, complex), grid16, CutoffPair(), 1, 0, 2)
    assert len(items) == 7
    assert all(b.holds and b.lhs == 0 for b in items)


def test_bernstein_requires_ordered_orders(grid16):
    with pytest.raises(ValueError):
        bernstein_check(np.zeros(grid16.shape, complex), grid16, CutoffPair(), 3, 0, 2)


@given(seed=st.integers(0, 2**31 - 1), k=st.integers(0, 2), L=st.sampled_from([2.0, 8.0, 30.0]))
def test_bernstein_random_band_limited(seed, k, L):
    grid = SpectralGrid(16, L)
    fh = random_real_spec(grid, np.random.default_rng(seed), band=5.0)
    items = bernstein_check(fh, grid, CutoffPair(), k, 0, 2)
    assert all(b.holds for b in items), [b for b in items if not b.holds]


def test_bernstein_literal_constants_can_fail():
    # A mode in the high band at |xi| = 1.25 < R0: the literal high-band radius
    # R0 overstates what the cutoff support guarantees.
    grid = SpectralGrid(16, 4.0)
    x1 = grid.x[0] * np.ones(grid.shape)
    fh = grid.to_spectral(np.cos(5 * x1 / grid.box_len))
    sharp = {b.name: b.holds for b in bernstein_check(fh, grid, CutoffPair(), 0, 0, 2)}
    lit = {b.name: b.holds for b in bernstein_check(fh, grid, CutoffPair(), 0, 0, 2, literal=True)}
    assert sharp["high-reverse"] and not lit["high-reverse"]


# Hodge --------------------------------------------------------------------------

def test_hodge_gradient_has_no_curl(grid16):
    x1, x2 = (grid16.x[i] * np.ones(grid16.shape) for i in (0, 1))
    uh = grid16.to_spectral(np.stack([-np.sin(x1 + x2), -np.sin(x1 + x2), 0 * x1]))
    parts = hodge_split(uh, grid16)
    assert np.abs(parts.pu).max() < 1e-12 * np.abs(uh).max()


def test_hodge_solenoidal_has_no_divergence(grid16):
    x1, x2 = (grid16.x[i] * np.ones(grid16.shape) for i in (0, 1))
    uh = grid16.to_spectral(np.stack([-np.sin(x2), np.sin(x1), 0 * x1]))
    parts = hodge_split(uh, grid16)
    assert np.abs(parts.d).max() < 1e-12 * np.abs(uh).max()


@given(seed=st.integers(0, 2**31 - 1))
def test_hodge_reconstruction(seed):
    grid = SpectralGrid(16, 1.0)
    uh = random_real_spec(grid, np.random.default_rng(seed), comps=3)
    back = hodge_reconstruct(hodge_split(uh, grid), grid)
    err = sobolev_norm(back - uh, grid) / sobolev_norm(uh, grid)
    assert err < 1e-12


def test_hodge_orthogonality(grid16, rng):
    uh = random_real_spec(grid16, rng, comps=3)
    parts = hodge_split(uh, grid16)
    longi = hodge_reconstruct(type(parts)(parts.d, 0 * parts.pu), grid16, restore_mean=False)
    trans = hodge_reconstruct(type(parts)(0 * parts.d, parts.pu), grid16, restore_mean=False)
    scale = sobolev_norm(longi, grid16) * sobolev_norm(trans, grid16)
    assert abs(inner(grid16, longi, trans)) < 1e-12 * scale


def test_hodge_mean_flag(grid16, rng):
    uh = random_real_spec(grid16, rng, comps=3, mean_free=False)
    parts = hodge_split(uh, grid16)
    assert parts.had_mean
    with pytest.raises(ValueError):
        hodge_split(uh, grid16, strict=True)
    back = hodge_reconstruct(parts, grid16)
    assert np.abs(back - uh).max() < 1e-12 * np.abs(uh).max()


# norms ----------------------------------------------------------------------------

def test_sobolev_examples(grid16):
    assert sobolev_norm(np.zeros(grid16.shape, complex), grid16, 2) == 0
    x1 = grid16.x[0] * np.ones(grid16.shape)
    fh = grid16.to_spectral(np.sin(x1))
    assert sobolev_norm(fh, grid16, 1) == pytest.approx(sobolev_norm(fh, grid16), rel=1e-13)
    with pytest.raises(ValueError):
        sobolev_norm(fh, grid16, -1)


def test_sobolev_m2_against_finite_differences():
    # smooth random field: compare spectral ||grad^2 f|| with second differences
    errs = []
    for n in (32, 64):
        grid = SpectralGrid(n, 1.0)
        x = grid.x
        f = (np.sin(x[0]) * np.cos(2 * x[1]) + np.cos(x[2] + x[0]) ** 2
             + 0.3 * np.sin(x[1] - x[2]) * np.ones(grid.shape))
        h = grid.spacing
        hess = []
        for i in range(3):
            for j in range(3):
                if i == j:
                    d2 = (np.roll(f, -1, i) - 2 * f + np.roll(f, 1, i)) / h**2
                else:
                    d2 = (np.roll(np.roll(f, -1, i), -1, j) - np.roll(np.roll(f, -1, i), 1, j)
                          - np.roll(np.roll(f, 1, i), -1, j) + np.roll(np.roll(f, 1, i), 1, j)) / (4 * h * h)
                hess.append(d2)
        fd = math.sqrt(sum((a**2).sum() for a in hess) * h**3)
        exact = sobolev_norm(grid.to_spectral(f), grid, 2)
        errs.append(abs(fd - exact) / exact)
    assert errs[1] < errs[0] / 3.5  # O(h^2)
    assert errs[1] < 1e-2


def test_h_norm_sums_orders(grid16, rng):
    fh = random_real_spec(grid16, rng)
    expect = math.sqrt(sum(sobolev_norm(fh, grid16, m) ** 2 for m in range(3)))
    assert h_norm(fh, grid16, 2) == pytest.approx(expect)
