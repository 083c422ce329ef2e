import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import fracspde.solver as solver_mod
from fracspde.fields import ForcingSpec, GridSpec, NoiseSpec, sample_bm
from fracspde.kernel import KernelSpec
from fracspde.regularity import dirichlet_smoothing_fit, spatial_smoothing_fit
from fracspde.solver import (
    SolveConfig,
    bm_variance_exact,
    dirichlet_grid,
    dirichlet_semigroup,
    evolve_deterministic,
    run_ensemble,
    solve_mild_bm,
    solve_mild_stwn,
    stwn_variance_exact,
)


def _cfg(kind="spacetime_white", alpha=1.0, family="constant", params=(), nt=100, nx=32, T=1.0, L=4.0,
         seed=1, store_every=1):
    return SolveConfig(KernelSpec(alpha), GridSpec(T, nt, L, nx), NoiseSpec(kind, seed),
                       ForcingSpec(family, params), store_every)


# ---------------------------------------------------------------- deterministic


@pytest.mark.parametrize("alpha", [0.3, 0.75, 1.0])
def test_plane_wave_decay(alpha):
    grid = GridSpec(2.0, 8, 2 * math.pi, 64)
    k = 3.0
    rho = evolve_deterministic(np.cos(k * grid.x), KernelSpec(alpha), grid)
    expect = np.exp(-grid.t[:, None] * k ** (2 * alpha)) * np.cos(k * grid.x)[None, :]
    np.testing.assert_allclose(rho.values, expect, atol=1e-14)


def test_mass_conserved(rng):
    grid = GridSpec(5.0, 10, 8.0, 128)
    rho0 = rng.standard_normal(128) ** 2
    rho = evolve_deterministic(rho0, KernelSpec(0.6), grid)
    np.testing.assert_allclose(rho.values.sum(axis=1), rho0.sum(), rtol=1e-13)


def test_nan_datum_rejected():
    grid = GridSpec(1.0, 4, 1.0, 8)
    with pytest.raises(ValueError):
        evolve_deterministic(np.full(8, np.nan), KernelSpec(0.5), grid)


def test_rough_datum_smoothing_slope():
    fit = spatial_smoothing_fit(KernelSpec(0.5), 0.2, 4.0)
    assert fit.slope == pytest.approx(-0.2 / 1.0 - 1 / 4.0, abs=0.1)


# ---------------------------------------------------------------- stochastic


@pytest.mark.parametrize("kind", ["single_bm", "spacetime_white"])
def test_zero_forcing_zero_solution(kind):
    cfg = _cfg(kind, params=(0.0,))
    u = (solve_mild_bm if kind == "single_bm" else solve_mild_stwn)(cfg)
    assert np.all(u.values == 0.0)


def test_flat_forcing_gives_brownian_motion():
    cfg = _cfg("single_bm", alpha=0.75, nt=400, nx=64)
    u = solve_mild_bm(cfg)
    spread = u.values.max(axis=1) - u.values.min(axis=1)
    assert spread.max() < 1e-10
    w = np.concatenate([[0.0], np.cumsum(sample_bm(cfg.noise, cfg.grid))])
    np.testing.assert_allclose(u.values[:, 0], w, atol=1e-12)


def test_lp_decay_moment_stable_under_refinement():
    moments = []
    for nx in (128, 256):
        cfg = SolveConfig(KernelSpec(0.75), GridSpec(1.0, 200, 32.0, nx), NoiseSpec("single_bm", 3),
                          ForcingSpec("lp_decay"), 200)
        u = run_ensemble(cfg, 2000)
        j = nx // 2  # x = 0
        moments.append(np.mean(u[:, -1, j] ** 4))
    assert np.isfinite(moments).all()
    assert abs(moments[1] / moments[0] - 1) < 0.1


def _real_space_variance(alpha, grid, n):
    # oracle: sum_m sum_j K_grid(t_n - t_m, x_j)^2 dx dt with K_grid built by an
    # explicit cosine sum over the torus modes
    k = 2 * math.pi * np.arange(-(grid.nx // 2), grid.nx // 2) / grid.domain_len
    xj = grid.dx * np.arange(grid.nx)
    phase = np.cos(np.outer(xj, k))
    total = 0.0
    for m in range(n):
        tau = grid.dt * (n - m)
        kern = phase @ np.exp(-tau * np.abs(k) ** (2 * alpha)) / grid.domain_len
        total += np.sum(kern**2) * grid.dx * grid.dt
    return total


@pytest.mark.parametrize("alpha", [0.75, 1.0])
def test_white_noise_variance_formula(alpha):
    grid = GridSpec(0.5, 50, 4.0, 32)
    assert stwn_variance_exact(KernelSpec(alpha), grid, 50) == pytest.approx(
        _real_space_variance(alpha, grid, 50), rel=1e-11)


def test_white_noise_variance_growth():
    grid = GridSpec(1.0, 2000, 16.0, 512)
    steps = np.unique(np.geomspace(200, 2000, 8).astype(int))
    var = [stwn_variance_exact(KernelSpec(1.0), grid, int(n)) for n in steps]
    slope = np.polyfit(np.log(grid.t[steps]), np.log(var), 1)[0]
    assert slope == pytest.approx(0.5, abs=0.05)


def test_white_noise_gaussian_kurtosis():
    cfg = _cfg(nt=100, nx=32, seed=8, store_every=100)
    u = run_ensemble(cfg, 10_000, threads=4)[:, -1, 7]
    kurt = np.mean((u - u.mean()) ** 4) / np.var(u) ** 2
    assert kurt == pytest.approx(3.0, abs=0.15)


def test_grid_refinement_second_moment():
    coarse = stwn_variance_exact(KernelSpec(1.0), GridSpec(0.5, 500, 4.0, 128), 500)
    fine = stwn_variance_exact(KernelSpec(1.0), GridSpec(0.5, 1000, 4.0, 256), 1000)
    assert abs(fine / coarse - 1) < 0.1
    cfg_c = SolveConfig(KernelSpec(0.75), GridSpec(0.5, 500, 16.0, 128), NoiseSpec("single_bm"),
                        ForcingSpec("lp_decay"))
    cfg_f = SolveConfig(KernelSpec(0.75), GridSpec(0.5, 1000, 16.0, 256), NoiseSpec("single_bm"),
                        ForcingSpec("lp_decay"))
    vc = bm_variance_exact(cfg_c, 500)[64]
    vf = bm_variance_exact(cfg_f, 1000)[128]
    assert abs(vf / vc - 1) < 0.1


def test_linearity_in_forcing(monkeypatch):
    cfg = _cfg("spacetime_white", alpha=0.8, nt=60, nx=32)
    grid = cfg.grid
    g1 = np.sin(grid.x)[None, :] * np.ones((grid.nt, 1))
    g2 = np.exp(-grid.x**2)[None, :] * np.linspace(0, 1, grid.nt)[:, None]
    out = {}
    for name, table in (("a", g1), ("b", g2), ("ab", g1 + g2)):
        monkeypatch.setattr(solver_mod, "_forcing_table", lambda c, t=table: t)
        out[name] = solve_mild_stwn(cfg).values
    np.testing.assert_allclose(out["ab"], out["a"] + out["b"], atol=1e-13)


@settings(max_examples=10, deadline=None)
@given(c=st.floats(-5, 5), seed=st.integers(0, 1000))
def test_scaling_in_forcing_constant(c, seed):
    base = solve_mild_stwn(_cfg(nt=20, nx=16, seed=seed)).values
    scaled = solve_mild_stwn(_cfg(nt=20, nx=16, seed=seed, params=(c,))).values
    np.testing.assert_allclose(scaled, c * base, atol=1e-13, rtol=1e-12)


def test_bm_exact_variance_matches_monte_carlo():
    cfg = _cfg("single_bm", alpha=0.75, family="lp_decay", nt=50, nx=32, L=8.0, store_every=50)
    u = run_ensemble(cfg, 4000)[:, -1, :]
    exact = bm_variance_exact(cfg, 50)
    for j in (0, 8, 16):
        sample = u[:, j] ** 2
        assert abs(sample.mean() - exact[j]) < 3 * sample.std() / math.sqrt(sample.size)


def test_ensemble_thread_invariance():
    cfg = _cfg(nt=40, nx=16)
    a = run_ensemble(cfg, 20, threads=1)
    b = run_ensemble(cfg, 20, threads=4)
    assert np.array_equal(a, b)
    single = solve_mild_stwn(cfg.for_replicate(13)).values
    assert np.array_equal(a[13], single)


def test_admissibility_flags():
    cfg = SolveConfig(KernelSpec(0.4), GridSpec(1.0, 10, 1.0, 8), NoiseSpec("spacetime_white"),
                      ForcingSpec("constant"))
    assert "alpha_in_half_one" in cfg.warnings
    bm = SolveConfig(KernelSpec(0.2), GridSpec(1.0, 10, 1.0, 8), NoiseSpec("single_bm"),
                     ForcingSpec("constant"), moment_p=2.0)
    assert bm.warnings == ["alpha_p_exceeds_d"]
    solve_mild_bm(bm)  # a warning, not a failure


def test_white_noise_rejects_two_dimensions():
    cfg = SolveConfig(KernelSpec(0.8, dim=2), GridSpec(1.0, 10, 1.0, 8), NoiseSpec("spacetime_white"),
                      ForcingSpec("constant"))
    with pytest.raises(ValueError):
        solve_mild_stwn(cfg)


def test_store_every_must_divide():
    with pytest.raises(ValueError):
        SolveConfig(KernelSpec(0.8), GridSpec(1.0, 10, 1.0, 8), NoiseSpec("single_bm"), ForcingSpec("constant"), 3)


# ---------------------------------------------------------------- Dirichlet


def test_dirichlet_eigenfunction():
    x = dirichlet_grid(255)
    v = dirichlet_semigroup(np.sin(x), [0.1, 1.0])
    np.testing.assert_allclose(v, np.exp(-np.array([[0.1], [1.0]])) * np.sin(x)[None, :], atol=1e-14)
    w = dirichlet_semigroup(np.sin(3 * x), 0.2)
    np.testing.assert_allclose(w, math.exp(-1.8) * np.sin(3 * x), atol=1e-14)


def test_dirichlet_bounded_datum_slope():
    x = dirichlet_grid(1024)
    F = (x < math.pi / 2).astype(float)
    fit = dirichlet_smoothing_fit(F, 0.5)
    assert fit.slope >= -0.25 - 0.1


def test_dirichlet_lp_datum_slope():
    x = dirichlet_grid(1023)
    F = np.abs(x - math.pi / 3) ** -0.25
    fit = dirichlet_smoothing_fit(F, 0.5)
    assert fit.slope >= -0.25 - 1 / 8 - 0.1


def test_dirichlet_rejects_nonfinite():
    with pytest.raises(ValueError):
        dirichlet_semigroup(np.array([1.0, np.inf, 0.0]), 0.1)
