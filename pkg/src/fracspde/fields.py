"""Space-time grids, reproducible Gaussian noise, forcing families, field storage."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "FieldSample",
    "ForcingSpec",
    "GridSpec",
    "NoiseSpec",
    "field_from_function",
    "make_forcing",
    "noise_stream",
    "rough_initial_datum",
    "sample_bm",
    "sample_stwn",
]

NOISE_KINDS = ("single_bm", "spacetime_white")
FORCING_FAMILIES = ("constant", "holder_vanishing", "lp_decay")

# stream tags keep the increment streams of different noise kinds disjoint
STREAM_TAGS = {"single_bm": 1, "spacetime_white": 2}


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on [0, T] x torus of length L.

    Spatial nodes are x_j = x_min + j*dx, j < nx; ``x_min`` defaults to -L/2
    so the torus is centred on the origin.
    """

    t_max: float
    nt: int
    domain_len: float
    nx: int
    x_min: float | None = None

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if not self.domain_len > 0:
            raise ValueError("domain_len must be positive")
        if self.nt < 2:
            raise ValueError("nt must be at least 2")
        if self.nx < 4 or self.nx & (self.nx - 1):
            raise ValueError(f"nx must be a power of two >= 4, got {self.nx}")

    @property
    def dt(self) -> float:
        return self.t_max / self.nt

    @property
    def dx(self) -> float:
        return self.domain_len / self.nx

    @property
    def origin(self) -> float:
        return -0.5 * self.domain_len if self.x_min is None else self.x_min

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(self.nt + 1)

    @property
    def x(self) -> np.ndarray:
        return self.origin + self.dx * np.arange(self.nx)

    @property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers of the torus in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.nx, d=self.dx)

    def to_dict(self) -> dict:
        return {"t_max": self.t_max, "nt": self.nt, "domain_len": self.domain_len,
                "nx": self.nx, "x_min": self.origin}


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    seed: int = 0
    replicate_id: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.replicate_id < 0:
            raise ValueError("replicate_id must be non-negative")

    def for_replicate(self, replicate_id: int) -> "NoiseSpec":
        return NoiseSpec(self.kind, self.seed, replicate_id)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "seed": int(self.seed), "replicate_id": int(self.replicate_id)}


def noise_stream(seed: int, replicate_id: int, tag: int) -> np.random.Generator:
    """Counter-based Philox generator keyed by (seed, replicate, tag).

    The key depends only on its arguments, so a replicate's increments are the
    same whatever thread or order produces them.
    """
    key = np.random.SeedSequence([int(seed), int(replicate_id), int(tag)]).generate_state(2, np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _check_kind(noise: NoiseSpec, want: str):
    if noise.kind != want:
        raise ValueError(f"noise kind {noise.kind!r} does not match the requested sampler ({want})")


def sample_bm(noise: NoiseSpec, grid: GridSpec) -> np.ndarray:
    """nt independent N(0, dt) Brownian increments."""
    _check_kind(noise, "single_bm")
    rng = noise_stream(noise.seed, noise.replicate_id, STREAM_TAGS["single_bm"])
    return rng.standard_normal(grid.nt) * math.sqrt(grid.dt)


def sample_stwn(noise: NoiseSpec, grid: GridSpec) -> np.ndarray:
    """(nt, nx) array of independent N(0, dt*dx) white-noise cell masses."""
    _check_kind(noise, "spacetime_white")
    rng = noise_stream(noise.seed, noise.replicate_id, STREAM_TAGS["spacetime_white"])
    return rng.standard_normal((grid.nt, grid.nx)) * math.sqrt(grid.dt * grid.dx)


@dataclass(frozen=True)
class ForcingSpec:
    """Coefficient family for g(t, x).

    constant          params [c]        g = c (default 1)
    holder_vanishing  params [beta, R]  g = min(max(|t|^(1/2), |x|), R)^beta
    lp_decay          params [k]        g = (1 + |x|^2)^(-k/2)
    """

    family: str
    params: tuple = ()

    def __post_init__(self):
        if self.family not in FORCING_FAMILIES:
            raise ValueError(f"unknown forcing family {self.family!r}; expected one of {FORCING_FAMILIES}")
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        if self.family == "holder_vanishing":
            beta = self.resolved()[0]
            if not (0.0 < beta < 1.0):
                raise ValueError(f"holder_vanishing needs beta in (0, 1), got {beta}")
            if self.resolved()[1] <= 0:
                raise ValueError("holder_vanishing radius must be positive")
        if self.family == "lp_decay" and self.resolved()[0] <= 0:
            raise ValueError("lp_decay power must be positive")

    def resolved(self) -> tuple:
        """Parameters with defaults filled in."""
        defaults = {"constant": (1.0,), "holder_vanishing": (0.5, 1.0), "lp_decay": (2.0,)}[self.family]
        given = self.params
        return tuple(given) + defaults[len(given):]

    @property
    def holder_constant(self) -> float | None:
        """Hölder constant in the parabolic metric, where one is known."""
        if self.family == "holder_vanishing":
            return 1.0
        if self.family == "constant":
            return 0.0
        return None

    def to_dict(self) -> dict:
        return {"family": self.family, "params": list(self.resolved())}


def make_forcing(spec: ForcingSpec) -> Callable:
    """Vectorised g(t, x) for the given family (d=1 points, or (..., 2) arrays)."""
    vals = spec.resolved()

    def _norm(x):
        x = np.asarray(x, dtype=float)
        return np.abs(x) if x.ndim == 0 or x.shape[-1:] != (2,) else np.linalg.norm(x, axis=-1)

    if spec.family == "constant":
        c = vals[0]

        def g(t, x):
            return np.full(np.broadcast(np.asarray(t), _norm(x)).shape, c)

    elif spec.family == "holder_vanishing":
        beta, radius = vals

        def g(t, x):
            # max(sqrt|t|, |x|) is the parabolic distance to the origin; clipping
            # at R and raising to beta keeps the Hölder constant at 1
            rho = np.maximum(np.sqrt(np.abs(np.asarray(t, dtype=float))), _norm(x))
            return np.minimum(rho, radius) ** beta

    else:
        k = vals[0]

        def g(t, x):
            r = _norm(x)
            return np.broadcast_to((1.0 + r**2) ** (-0.5 * k), np.broadcast(np.asarray(t), r).shape).copy()

    return g


def rough_initial_datum(grid: GridSpec, p: float, dim: int = 1, center: float = 0.0) -> np.ndarray:
    """|x - center|^(-d/p) on the grid, the singular node replaced by its cell average.

    Its scaling makes the smoothing estimates exact power laws while
    dx << t^(1/2a) << L.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    s = dim / p
    if s >= 1:
        raise ValueError("need d/p < 1 for a locally integrable datum")
    dist = np.abs(grid.x - center)
    dist = np.minimum(dist, grid.domain_len - dist)  # torus distance
    half = 0.5 * grid.dx
    out = np.empty_like(dist)
    near = dist < half
    out[~near] = dist[~near] ** (-s)
    out[near] = half ** (-s) / (1.0 - s)
    return out


@dataclass(frozen=True)
class FieldSample:
    """Realised u(t_i, x_j); ``values`` is read-only with one row per stored time."""

    grid: GridSpec
    values: np.ndarray
    times: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        times = self.grid.t if self.times is None else np.array(self.times, dtype=float)
        if vals.ndim != 2 or vals.shape != (times.size, self.grid.nx):
            raise ValueError(f"values shape {vals.shape} does not match ({times.size}, {self.grid.nx})")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        times.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "times", times)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def shape(self):
        return self.values.shape

    def at_time(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        return self.values[i]

    def scaled(self, factor: float) -> "FieldSample":
        return FieldSample(self.grid, factor * self.values, self.times, dict(self.provenance))

    def metadata(self) -> dict:
        return {"grid": self.grid.to_dict(), "n_times": int(self.times.size), "provenance": self.provenance}

    def to_csv(self, path) -> None:
        """Long-format (t, x, u) rows plus a ``.meta.json`` sidecar."""
        path = str(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "u"])
            x = self.x
            for ti, row in zip(self.times, self.values):
                for xj, u in zip(x, row):
                    w.writerow([repr(float(ti)), repr(float(xj)), repr(float(u))])
        with open(path.rsplit(".", 1)[0] + ".meta.json", "w") as fh:
            json.dump(self.metadata(), fh, indent=2, sort_keys=True)


def field_from_function(func, grid: GridSpec, label: str = "synthetic") -> FieldSample:
    """Tabulate u = func(t, x) on the grid (used for synthetic test fields)."""
    vals = np.asarray(func(grid.t[:, None], grid.x[None, :]), dtype=float)
    vals = np.broadcast_to(vals, (grid.nt + 1, grid.nx))
    return FieldSample(grid, vals, None, {"kind": label})
