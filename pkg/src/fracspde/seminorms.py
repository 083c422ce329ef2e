"""Parabolic geometry, Campanato and Hölder seminorms, A-type certification."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .fields import FieldSample

__all__ = [
    "Cylinder",
    "DomainSpec",
    "ParabolicPoint",
    "SeminormReport",
    "atype_constant",
    "campanato_holder_ratio",
    "campanato_seminorm",
    "cylinder",
    "diverges",
    "embedding_gamma",
    "holder_seminorm",
    "parabolic_dist",
    "spatial_holder_seminorm",
]


@dataclass(frozen=True)
class ParabolicPoint:
    t: float
    x: tuple

    def __post_init__(self):
        x = tuple(float(v) for v in np.atleast_1d(self.x))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", float(self.t))
        if not (math.isfinite(self.t) and all(math.isfinite(v) for v in x)):
            raise ValueError("coordinates must be finite")

    @property
    def dim(self) -> int:
        return len(self.x)


def _coords(X):
    if isinstance(X, ParabolicPoint):
        return X.t, np.asarray(X.x)
    t, x = X
    return float(t), np.atleast_1d(np.asarray(x, dtype=float))


def parabolic_dist(X, Y) -> float:
    """max(|x - y|, |t - s|^(1/2)); points are ParabolicPoint or (t, x) pairs."""
    t, x = _coords(X)
    s, y = _coords(Y)
    return max(float(np.linalg.norm(x - y)), math.sqrt(abs(t - s)))


def parabolic_dist_array(t1, x1, t2, x2):
    """Vectorised metric for d = 1 coordinates."""
    return np.maximum(np.abs(np.asarray(x1) - x2), np.sqrt(np.abs(np.asarray(t1) - t2)))


@dataclass(frozen=True)
class Cylinder:
    """Q_c(X) = (t - c^2, t + c^2) x B_c(x)."""

    center: ParabolicPoint
    c: float

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("cylinder radius must be positive")

    def contains(self, Y) -> bool:
        return parabolic_dist(self.center, Y) < self.c

    @property
    def measure(self) -> float:
        d = self.center.dim
        ball = math.pi ** (d / 2) / math.gamma(d / 2 + 1) * self.c**d
        return 2.0 * self.c**2 * ball


def cylinder(X, c: float) -> Cylinder:
    t, x = _coords(X)
    return Cylinder(ParabolicPoint(t, tuple(x)), c)


@dataclass
class DomainSpec:
    """D_T = (t_min, t_max) x box, the box given by per-axis (lo, hi) pairs."""

    t_max: float
    box: tuple
    t_min: float = 0.0
    atype_constant_hat: float | None = None

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        if any(hi <= lo for lo, hi in box):
            raise ValueError("every box side needs lo < hi")
        if not self.t_max > self.t_min:
            raise ValueError("need t_max > t_min")
        self.box = box

    @classmethod
    def from_field(cls, sample: FieldSample) -> "DomainSpec":
        """Hull of the sampled nodes."""
        return cls(float(sample.times[-1]), ((float(sample.x[0]), float(sample.x[-1])),),
                   float(sample.times[0]))

    @property
    def dim(self) -> int:
        return len(self.box)

    @property
    def diameter(self) -> float:
        """Spatial diameter d(D)."""
        return math.sqrt(sum((hi - lo) ** 2 for lo, hi in self.box))

    def to_dict(self) -> dict:
        return {"t_min": self.t_min, "t_max": self.t_max, "box": [list(b) for b in self.box],
                "diameter": self.diameter, "atype_constant_hat": self.atype_constant_hat}


@dataclass
class SeminormReport:
    kind: str  # "campanato" or "holder"
    p: float
    exponent: float  # theta for Campanato, gamma for Hölder
    value: float
    witness: dict
    resolution: tuple
    samples: int = 0
    skipped: int = 0
    contributions: list = field(default_factory=list)

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("seminorm values are non-negative")

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "p": self.p,
            "exponent": self.exponent,
            "value": self.value,
            "witness": self.witness,
            "resolution": list(self.resolution),
            "samples": self.samples,
            "skipped": self.skipped,
        }


# --------------------------------------------------------------------------
# Campanato


def _time_weights(times: np.ndarray, lo: float, hi: float, t0: float, t1: float) -> np.ndarray:
    """Length of each node's time cell inside (lo, hi) clipped to [t0, t1]."""
    mids = 0.5 * (times[1:] + times[:-1])
    left = np.concatenate([[t0], mids])
    right = np.concatenate([mids, [t1]])
    a = np.maximum(left, max(lo, t0))
    b = np.minimum(right, min(hi, t1))
    return np.clip(b - a, 0.0, None)


def _cell_widths(x: np.ndarray) -> np.ndarray:
    if x.size == 1:
        return np.ones(1)
    mids = 0.5 * (x[1:] + x[:-1])
    left = np.concatenate([[x[0]], mids])
    right = np.concatenate([mids, [x[-1]]])
    return right - left


def _cylinder_stat(u, times, x, tw_cache, p, theta, tc, xc, rho, domain):
    tw = _time_weights(times, tc - rho**2, tc + rho**2, domain.t_min, domain.t_max)
    sx = np.abs(x - xc) < rho
    if not np.any(sx) or not np.any(tw > 0):
        return None
    w = tw[:, None] * tw_cache[None, sx]
    vol = w.sum()
    if vol <= 0:
        return None
    block = u[:, sx]
    mean = float((w * block).sum() / vol)
    osc = float((w * np.abs(block - mean) ** p).sum())
    return (vol ** (-theta) * osc) ** (1.0 / p), vol, mean


def campanato_seminorm(sample: FieldSample, domain: DomainSpec | None, p: float, theta: float,
                       centers=None, radii=None, center_stride: int = 4, levels: int | None = None) -> SeminormReport:
    """sup over sampled (X, rho) of (|D(X,rho)|^-theta int_{D(X,rho)} |u - u_{X,rho}|^p)^(1/p).

    Integrals are midpoint-cell sums: time cells by fractional overlap, space
    cells whole when their node lies in the ball.  Default centres are every
    ``center_stride``-th node; default radii are d(D) 2^-j, j = 0..levels-1,
    where ``levels`` defaults to the finest level still spanning two cells.
    Pairs whose intersection with D_T is empty are skipped and counted.
    """
    if p < 1:
        raise ValueError("p must be at least 1")
    if theta < 0:
        raise ValueError("theta must be non-negative")
    domain = DomainSpec.from_field(sample) if domain is None else domain
    if domain.dim != 1:
        raise ValueError("field seminorms are implemented for d = 1 samples")
    times, x, u = sample.times, sample.x, sample.values
    inside_t = (times >= domain.t_min) & (times <= domain.t_max)
    inside_x = (x >= domain.box[0][0]) & (x <= domain.box[0][1])
    times, x = times[inside_t], x[inside_x]
    u = u[np.ix_(inside_t, inside_x)]
    if radii is None:
        if levels is None:
            cell = max(float(np.max(np.diff(x))) if x.size > 1 else 0.0, 1e-300)
            levels = max(1, int(math.floor(math.log2(domain.diameter / (2.0 * cell)))) + 1)
        radii = domain.diameter * 2.0 ** -np.arange(levels)
    radii = np.asarray(radii, dtype=float)
    if np.any(radii > domain.diameter * (1 + 1e-12)) or np.any(radii <= 0):
        raise ValueError("radii must lie in (0, d(D)]")
    if centers is None:
        ti = np.arange(0, times.size, center_stride)
        xi = np.arange(0, x.size, center_stride)
        centers = [(float(times[i]), float(x[j])) for i in ti for j in xi]
    dxw = _cell_widths(x)

    best, witness, skipped, rows = 0.0, {}, 0, []
    for tc, xc in centers:
        for rho in radii:
            got = _cylinder_stat(u, times, x, dxw, p, theta, tc, xc, float(rho), domain)
            if got is None:
                skipped += 1
                continue
            val, vol, mean = got
            rows.append([tc, xc, float(rho), vol, mean, val])
            if val > best:
                best, witness = val, {"t": tc, "x": xc, "radius": float(rho)}
    return SeminormReport("campanato", float(p), float(theta), best, witness,
                          (times.size, x.size), len(rows), skipped, rows)


def campanato_at(sample: FieldSample, domain: DomainSpec | None, p: float, theta: float, witness: dict) -> float:
    """Re-evaluate one cylinder, e.g. a reported witness."""
    rep = campanato_seminorm(sample, domain, p, theta, centers=[(witness["t"], witness["x"])],
                             radii=[witness["radius"]])
    return rep.value


# --------------------------------------------------------------------------
# Hölder


def _pair_quotients(u, times, x, it1, ix1, it2, ix2, gamma):
    dist = parabolic_dist_array(times[it1], x[ix1], times[it2], x[ix2])
    diff = np.abs(u[it1, ix1] - u[it2, ix2])
    ok = dist > 0
    q = np.zeros(dist.shape)
    q[ok] = diff[ok] / dist[ok] ** gamma
    return q


def holder_seminorm(sample: FieldSample, domain: DomainSpec | None, gamma_exp: float,
                    random_pairs: int = 20000, seed: int = 0) -> SeminormReport:
    """sup |u(X) - u(Y)| / delta(X, Y)^gamma over sampled pairs.

    Pairs are every node pair whose index offsets in time and space are zero
    or a power of two, plus ``random_pairs`` uniform pairs from a fixed seed.
    """
    if not (0.0 < gamma_exp <= 1.0):
        raise ValueError("gamma_exp must lie in (0, 1]")
    times, x, u = sample.times, sample.x, sample.values
    if domain is not None:
        keep_t = (times >= domain.t_min) & (times <= domain.t_max)
        keep_x = (x >= domain.box[0][0]) & (x <= domain.box[0][1])
        times, x, u = times[keep_t], x[keep_x], u[np.ix_(keep_t, keep_x)]
    nt, nx = u.shape

    def offsets(n):
        out = [0]
        k = 1
        while k < n:
            out.append(k)
            k *= 2
        return out

    best, witness, count = 0.0, {}, 0
    for a in offsets(nt):
        for b in offsets(nx):
            if a == 0 and b == 0:
                continue
            for sb in ((1, -1) if b and a else (1,)):
                it1, ix1 = np.meshgrid(np.arange(nt - a), np.arange(nx - b), indexing="ij")
                it2 = it1 + a
                ix2 = ix1 + b if sb == 1 else ix1
                ix1 = ix1 if sb == 1 else ix1 + b
                q = _pair_quotients(u, times, x, it1.ravel(), ix1.ravel(), it2.ravel(), ix2.ravel(), gamma_exp)
                count += q.size
                k = int(np.argmax(q)) if q.size else 0
                if q.size and q[k] > best:
                    best = float(q[k])
                    witness = {"X": (float(times[it1.ravel()[k]]), float(x[ix1.ravel()[k]])),
                               "Y": (float(times[it2.ravel()[k]]), float(x[ix2.ravel()[k]]))}
    if random_pairs:
        rng = np.random.default_rng(seed)
        it1, it2 = rng.integers(0, nt, (2, random_pairs))
        ix1, ix2 = rng.integers(0, nx, (2, random_pairs))
        q = _pair_quotients(u, times, x, it1, ix1, it2, ix2, gamma_exp)
        count += q.size
        k = int(np.argmax(q))
        if q[k] > best:
            best = float(q[k])
            witness = {"X": (float(times[it1[k]]), float(x[ix1[k]])), "Y": (float(times[it2[k]]), float(x[ix2[k]]))}
    return SeminormReport("holder", 1.0, float(gamma_exp), best, witness, (nt, nx), count)


def holder_at(sample: FieldSample, gamma_exp: float, witness: dict) -> float:
    """Quotient of the stored witness pair."""
    (t1, x1), (t2, x2) = witness["X"], witness["Y"]
    i1, i2 = int(np.argmin(np.abs(sample.times - t1))), int(np.argmin(np.abs(sample.times - t2)))
    j1, j2 = int(np.argmin(np.abs(sample.x - x1))), int(np.argmin(np.abs(sample.x - x2)))
    d = parabolic_dist((t1, x1), (t2, x2))
    return abs(sample.values[i1, j1] - sample.values[i2, j2]) / d**gamma_exp


def spatial_holder_seminorm(values, dx: float, gamma_exp: float, max_lag: int | None = None,
                            periodic: bool = True, window=None) -> float:
    """sup_{x != y} |u(x) - u(y)| / |x - y|^gamma for a 1-d profile.

    All lags up to ``max_lag`` (default half the array) are scanned; ``window``
    is an optional index slice restricting the base points.
    """
    u = np.asarray(values, dtype=float)
    n = u.size
    max_lag = n // 2 if max_lag is None else min(max_lag, n - 1)
    base = np.arange(n) if window is None else np.arange(n)[window]
    best = 0.0
    for lag in range(1, max_lag + 1):
        if periodic:
            other = (base + lag) % n
            b = base
        else:
            b = base[base + lag < n]
            other = b + lag
        if b.size == 0:
            break
        dist = lag * dx
        if periodic:
            dist = min(dist, n * dx - dist)
        best = max(best, float(np.max(np.abs(u[other] - u[b]))) / dist**gamma_exp)
    return best


# --------------------------------------------------------------------------
# A-type constant


def _interval_overlap(lo, hi, a, b):
    return max(0.0, min(hi, b) - max(lo, a))


def _disc_rect_area(cx, cy, c, box):
    (x0, x1), (y0, y1) = box

    def chord(x):
        h = math.sqrt(max(c * c - (x - cx) ** 2, 0.0))
        return _interval_overlap(cy - h, cy + h, y0, y1)

    a, b = max(x0, cx - c), min(x1, cx + c)
    if b <= a:
        return 0.0
    val, _ = integrate.quad(chord, a, b, epsabs=1e-13, epsrel=1e-11, limit=200)
    return val


def atype_constant(domain: DomainSpec, centers, radii) -> float:
    """min over (X, rho) of |D_T cap Q_rho(X)| / |Q_rho(X)|, measured exactly.

    Centres are (t, x) with x a scalar (d = 1) or a pair (d = 2).  The result
    is also stored on ``domain.atype_constant_hat``.
    """
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0) or np.any(radii > domain.diameter * (1 + 1e-12)):
        raise ValueError("radii must lie in (0, d(D)]")
    worst = 1.0
    for center in centers:
        t, x = _coords(center)
        if x.size != domain.dim:
            raise ValueError("centre dimension does not match the domain")
        for rho in radii:
            q = cylinder((t, x), float(rho))
            tlen = _interval_overlap(t - rho**2, t + rho**2, domain.t_min, domain.t_max)
            if domain.dim == 1:
                space = _interval_overlap(x[0] - rho, x[0] + rho, *domain.box[0])
            elif domain.dim == 2:
                space = _disc_rect_area(x[0], x[1], rho, domain.box)
            else:
                raise ValueError("A-type measurement supports d = 1, 2")
            worst = min(worst, tlen * space / q.measure)
    domain.atype_constant_hat = worst
    return worst


# --------------------------------------------------------------------------
# embedding bookkeeping


def embedding_gamma(p: float, theta: float, d: int) -> float:
    """Hölder index (d + 2)(theta - 1)/p of the Campanato space L^{p,theta}."""
    if p < 1:
        raise ValueError("p must be at least 1")
    top = 1.0 + p / (d + 2)
    if not (1.0 < theta <= top):
        raise ValueError(f"theta must lie in (1, {top:g}] for p={p}, d={d}; got {theta}")
    return min((d + 2) * (theta - 1.0) / p, 1.0)


def diverges(values, factor: float = 2.0) -> bool:
    """True if a seminorm sequence grows by more than ``factor`` overall.

    ``values`` are ordered by resolution, typically after two doublings.
    """
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise ValueError("need values at two or more resolutions")
    if values[0] == 0:
        return bool(values[-1] > 0)
    return bool(values[-1] / values[0] > factor)


def campanato_holder_ratio(sample: FieldSample, domain: DomainSpec | None, p: float, gamma: float, **kw):
    """Campanato value at theta = 1 + gamma p/(d+2) over the direct Hölder seminorm.

    The embedding bounds the Hölder seminorm by a constant times the Campanato
    value; the ratio tracks that constant.
    """
    d = 1
    theta = 1.0 + gamma * p / (d + 2)
    camp = campanato_seminorm(sample, domain, p, theta, **kw)
    hold = holder_seminorm(sample, domain, gamma)
    ratio = camp.value / hold.value if hold.value > 0 else float("nan")
    return ratio, camp, hold
