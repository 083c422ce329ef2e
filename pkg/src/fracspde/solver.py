"""Spectral solvers on the torus and the Dirichlet sine-series semigroup.

All convolutions use the band-limited periodised kernel, whose Fourier
coefficients on the nx grid modes are exactly exp(-t |k|^(2 alpha)).  The
stochastic convolution is the left-endpoint (Itô) sum

    u(t_n) = sum_{m < n} K(t_n - t_m) * g(t_m) dW_m,

advanced by the recursion u_n = S_dt (u_{n-1} + g_{n-1} dW_{n-1}).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .fields import (
    STREAM_TAGS,
    FieldSample,
    ForcingSpec,
    GridSpec,
    NoiseSpec,
    make_forcing,
    noise_stream,
)
from .kernel import KernelSpec

__all__ = [
    "DEFAULT_CHUNK",
    "SolveConfig",
    "bm_variance_exact",
    "dirichlet_grid",
    "dirichlet_semigroup",
    "evolve_deterministic",
    "run_ensemble",
    "solve_mild_bm",
    "solve_mild_stwn",
    "stwn_covariance_exact",
    "stwn_variance_exact",
]

# replicates per work unit; fixed so results never depend on the thread count
DEFAULT_CHUNK = 8


@dataclass(frozen=True)
class SolveConfig:
    kernel: KernelSpec
    grid: GridSpec
    noise: NoiseSpec
    forcing: ForcingSpec
    store_every: int = 1
    moment_p: float | None = None  # integrability index the run is meant to probe
    store_start: int = 0  # first step kept in the output

    def __post_init__(self):
        if self.store_every < 1 or self.grid.nt % self.store_every:
            raise ValueError(f"store_every={self.store_every} must divide nt={self.grid.nt}")
        if not (0 <= self.store_start <= self.grid.nt):
            raise ValueError("store_start must lie in [0, nt]")

    @property
    def stored_steps(self) -> np.ndarray:
        steps = np.arange(0, self.grid.nt + 1, self.store_every)
        return steps[steps >= self.store_start]

    @property
    def admissibility(self) -> dict:
        """Flags for the hypotheses of the regularity results (informational)."""
        a, d = self.kernel.alpha, self.kernel.dim
        flags = {}
        if self.noise.kind == "single_bm":
            if self.moment_p is not None:
                flags["alpha_p_exceeds_d"] = bool(a * self.moment_p > d)
        else:
            flags["dim_is_one"] = d == 1
            flags["alpha_in_half_one"] = bool(0.5 < a <= 1.0)
            if self.moment_p is not None and a > 0.5:
                flags["p_exceeds_2_over_2alpha_minus_1"] = bool(self.moment_p > 2.0 / (2.0 * a - 1.0))
        return flags

    @property
    def warnings(self) -> list:
        return [name for name, ok in self.admissibility.items() if not ok]

    def provenance(self) -> dict:
        return {
            "kernel": {"alpha": self.kernel.alpha, "dim": self.kernel.dim},
            "grid": self.grid.to_dict(),
            "noise": self.noise.to_dict(),
            "forcing": self.forcing.to_dict(),
            "store_every": self.store_every,
            "admissibility": self.admissibility,
            "warnings": self.warnings,
        }

    def for_replicate(self, replicate_id: int) -> "SolveConfig":
        return SolveConfig(self.kernel, self.grid, self.noise.for_replicate(replicate_id),
                           self.forcing, self.store_every, self.moment_p, self.store_start)


def _symbol(kernel: KernelSpec, grid: GridSpec) -> np.ndarray:
    """|k|^(2 alpha) on the rfft half-spectrum."""
    k = 2.0 * np.pi * np.fft.rfftfreq(grid.nx, d=grid.dx)
    return np.abs(k) ** kernel.stable_index


def _check_dim(kernel: KernelSpec):
    if kernel.dim != 1:
        raise ValueError("the torus solvers work in d = 1 only")


def evolve_deterministic(rho0, kernel: KernelSpec, grid: GridSpec, times=None) -> FieldSample:
    """rho(t) = exp(t Delta^alpha) rho0 at the grid times (or ``times``)."""
    _check_dim(kernel)
    rho0 = np.asarray(rho0, dtype=float)
    if rho0.shape != (grid.nx,):
        raise ValueError(f"rho0 must have shape ({grid.nx},)")
    if not np.all(np.isfinite(rho0)):
        raise ValueError("rho0 contains non-finite values")
    times = grid.t if times is None else np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("times must be non-negative")
    sym = _symbol(kernel, grid)
    spec = np.fft.rfft(rho0)
    vals = np.fft.irfft(np.exp(-np.outer(times, sym)) * spec[None, :], n=grid.nx, axis=1)
    return FieldSample(grid, vals, times, {"kind": "deterministic", "alpha": kernel.alpha})


def _forcing_table(config: SolveConfig) -> np.ndarray:
    """g(t_m, x_j) for m < nt."""
    g = make_forcing(config.forcing)
    t = config.grid.t[:-1]
    return np.asarray(g(t[:, None], config.grid.x[None, :]), dtype=float)


# time steps of noise drawn per block; only affects memory, never the values
_BLOCK = 256


def _integrate(config: SolveConfig, replicate_ids, g_table) -> np.ndarray:
    """Run u_n = S_dt(u_{n-1} + g_{n-1} dW_{n-1}) for a stack of replicates.

    Noise is drawn block by block from each replicate's own stream; sequential
    draws from one generator give the same numbers however they are split.
    Returns (R, n_stored, nx).
    """
    grid = config.grid
    kind = config.noise.kind
    prop = np.exp(-grid.dt * _symbol(config.kernel, grid))
    steps = config.stored_steps
    slot_of = {int(n): i for i, n in enumerate(steps)}
    n_rep = len(replicate_ids)
    stored = np.zeros((n_rep, steps.size, grid.nx))
    rngs = [noise_stream(config.noise.seed, r, STREAM_TAGS[kind]) for r in replicate_ids]
    u_hat = np.zeros((n_rep, prop.size), dtype=complex)
    if kind == "single_bm":
        scale = math.sqrt(grid.dt)
    else:
        # discrete convolution sum_j K(x_i - x_j) f_j has symbol K_hat / dx
        scale = math.sqrt(grid.dt * grid.dx) / grid.dx
    for b0 in range(0, grid.nt, _BLOCK):
        nb = min(_BLOCK, grid.nt - b0)
        if kind == "single_bm":
            dw = np.stack([rng.standard_normal(nb) for rng in rngs])[:, :, None]
        else:
            dw = np.stack([rng.standard_normal((nb, grid.nx)) for rng in rngs])
        src_hat = np.fft.rfft(g_table[None, b0:b0 + nb, :] * (scale * dw), axis=-1)
        for j in range(nb):
            n = b0 + j + 1
            u_hat = prop * (u_hat + src_hat[:, j, :])
            slot = slot_of.get(n)
            if slot is not None:
                stored[:, slot, :] = np.fft.irfft(u_hat, n=grid.nx, axis=-1)
    return stored


def _validate(config: SolveConfig, kind: str):
    if config.noise.kind != kind:
        raise ValueError(f"config noise kind is {config.noise.kind!r}, this solver needs {kind!r}")
    if kind == "spacetime_white" and config.kernel.dim != 1:
        raise ValueError("space-time white noise is supported in d = 1 only")
    _check_dim(config.kernel)


def _sample(config: SolveConfig, values: np.ndarray) -> FieldSample:
    times = config.grid.t[config.stored_steps]
    return FieldSample(config.grid, values, times, config.provenance())


def solve_mild_bm(config: SolveConfig) -> FieldSample:
    """Mild solution driven by one scalar Brownian motion."""
    _validate(config, "single_bm")
    return _sample(config, _integrate(config, [config.noise.replicate_id], _forcing_table(config))[0])


def solve_mild_stwn(config: SolveConfig) -> FieldSample:
    """Mild solution driven by space-time white noise (d = 1)."""
    _validate(config, "spacetime_white")
    return _sample(config, _integrate(config, [config.noise.replicate_id], _forcing_table(config))[0])


def run_ensemble(config: SolveConfig, replicates: int, threads: int = 1, chunk: int = DEFAULT_CHUNK,
                 first_replicate: int = 0, reducer=None):
    """Solve replicates first_replicate .. first_replicate+replicates-1.

    Work is cut into fixed chunks of replicate ids, so the floating-point work
    per replicate is identical for any thread count.  Without a ``reducer``
    the stacked (R, n_stored, nx) array is returned in replicate order;
    otherwise ``reducer(block)`` is applied per chunk and the list of chunk
    results is returned in order.
    """
    _validate(config, config.noise.kind)
    if replicates < 0:
        raise ValueError("replicates must be non-negative")
    if threads < 1:
        raise ValueError("threads must be positive")
    g_table = _forcing_table(config)
    ids = list(range(first_replicate, first_replicate + replicates))
    chunks = [ids[i:i + chunk] for i in range(0, len(ids), chunk)]

    def work(c):
        block = _integrate(config, c, g_table)
        return block if reducer is None else reducer(block)

    if threads == 1:
        parts = [work(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    if reducer is not None:
        return parts
    if not parts:
        return np.zeros((0, config.stored_steps.size, config.grid.nx))
    return np.concatenate(parts, axis=0)


# --------------------------------------------------------------------------
# exact discrete second moments


def stwn_covariance_exact(kernel: KernelSpec, grid: GridSpec, n1: int, n2: int, lag_x: float = 0.0) -> float:
    """Cov(u(t_n1, x), u(t_n2, x + lag_x)) of the discrete white-noise solution, g = 1.

    Only common noise cells m < min(n1, n2) contribute:
    sum_m dt (1/L) sum_k exp(-(t_n1 - t_m + t_n2 - t_m)|k|^2a) cos(k lag_x).
    """
    sym = np.abs(grid.wavenumbers) ** kernel.stable_index
    n = min(n1, n2)
    if n == 0:
        return 0.0
    m = np.arange(n)
    tau = grid.dt * ((n1 - m) + (n2 - m))
    phase = np.cos(grid.wavenumbers * lag_x)
    total = np.exp(-np.outer(tau, sym)) @ phase
    return float(grid.dt * total.sum() / grid.domain_len)


def stwn_variance_exact(kernel: KernelSpec, grid: GridSpec, n: int) -> float:
    """Var u(t_n, x) for the discrete white-noise solution with g = 1."""
    return stwn_covariance_exact(kernel, grid, n, n)


def bm_variance_exact(config: SolveConfig, n: int) -> np.ndarray:
    """Var u(t_n, x_j) = sum_{m<n} dt ((K(t_n - t_m) * g(t_m))(x_j))^2 for the BM solver."""
    _validate(config, "single_bm")
    grid = config.grid
    sym = _symbol(config.kernel, grid)
    g_hat = np.fft.rfft(_forcing_table(config)[:n], axis=1)
    tau = grid.dt * (n - np.arange(n))
    conv = np.fft.irfft(np.exp(-np.outer(tau, sym)) * g_hat, n=grid.nx, axis=1)
    return grid.dt * np.sum(conv**2, axis=0)


# --------------------------------------------------------------------------
# Dirichlet Laplacian on (0, pi)


def dirichlet_grid(n: int) -> np.ndarray:
    """Interior nodes j*pi/(n+1), j = 1..n."""
    if n < 2:
        raise ValueError("need at least 2 interior nodes")
    return np.pi * np.arange(1, n + 1) / (n + 1)


def dirichlet_semigroup(F, t) -> np.ndarray:
    """Heat semigroup of the Dirichlet Laplacian on (0, pi) via the sine series.

    ``F`` is sampled on :func:`dirichlet_grid`; ``t`` may be a scalar (returns
    one profile) or an array (returns one row per time).
    """
    F = np.asarray(F, dtype=float)
    if F.ndim != 1:
        raise ValueError("F must be one-dimensional")
    if not np.all(np.isfinite(F)):
        raise ValueError("F contains non-finite values")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise ValueError("t must be non-negative")
    k = np.arange(1, F.size + 1)
    coef = sfft.dst(F, type=1)
    rows = sfft.idst(np.exp(-np.outer(t_arr, k**2)) * coef[None, :], type=1, axis=1)
    return rows[0] if np.ndim(t) == 0 else rows
