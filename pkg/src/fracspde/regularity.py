"""Exponent bookkeeping, moment-scaling fits, chaining bounds and tail splits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .fields import GridSpec, rough_initial_datum
from .kernel import KernelSpec
from .seminorms import spatial_holder_seminorm
from .solver import dirichlet_grid, dirichlet_semigroup, evolve_deterministic

__all__ = [
    "ChainingReport",
    "ExponentFit",
    "ExponentPlan",
    "PlanError",
    "ProbePairs",
    "TailSplitReport",
    "chaining_bound",
    "dirichlet_smoothing_fit",
    "fit_loglog",
    "make_plan",
    "mixed_pairs",
    "moment_increment_scan",
    "plan_table",
    "space_pairs",
    "spatial_smoothing_fit",
    "tail_moment_split",
    "time_pairs",
    "verify_smoothing",
]


# --------------------------------------------------------------------------
# exponent plans


class PlanError(ValueError):
    """Parameters violate one or more admissibility inequalities."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class ExponentPlan:
    p: float
    alpha: float
    d: int
    kind: str
    beta: float
    delta_gap: float
    q: float
    r: float

    @property
    def theta(self) -> float:
        return 1.0 + self.beta * self.p / (self.d + 2)

    @property
    def beta_star(self) -> float:
        return self.beta - 2.0 * self.delta_gap / self.p

    @property
    def gamma(self) -> float:
        """Hölder index of the Campanato space L^{p, theta}."""
        return (self.d + 2) * (self.theta - 1.0) / self.p

    @property
    def beta_max(self) -> float:
        return beta_max(self.alpha, self.p, self.d, self.kind)

    def to_dict(self) -> dict:
        return {"p": self.p, "alpha": self.alpha, "d": self.d, "kind": self.kind, "beta": self.beta,
                "delta_gap": self.delta_gap, "q": self.q, "r": self.r, "theta": self.theta,
                "beta_star": self.beta_star, "gamma": self.gamma, "beta_max": self.beta_max}


def beta_max(alpha: float, p: float, d: int, kind: str) -> float:
    """Largest admissible beta: alpha - d/p (single BM), (2 alpha - 1)/2 - 1/p (white noise).

    For white noise the bound is strict.
    """
    if kind == "single_bm":
        return alpha - d / p
    if kind == "spacetime_white":
        return (2.0 * alpha - 1.0) / 2.0 - 1.0 / p
    raise ValueError(f"unknown noise kind {kind!r}")


def make_plan(p: float, alpha: float, d: int, kind: str, beta: float, delta_gap: float,
              q: float | None = None, r: float | None = None) -> ExponentPlan:
    """Validate the exponent inequalities and build a plan.

    q defaults to 2(d+2)/delta_gap and r to q/2.  Every violated inequality is
    collected and reported together in a :class:`PlanError`.
    """
    bad = []
    if p < 1:
        bad.append("p < 1")
    if not beta > 0:
        bad.append("beta <= 0")
    if kind == "single_bm":
        if not p * alpha > d:
            bad.append("single_bm: p <= d/alpha")
        if (alpha - beta) * p - d < 0:
            bad.append("single_bm: (alpha-beta)p - d < 0")
    elif kind == "spacetime_white":
        if d != 1:
            bad.append("spacetime_white: d != 1")
        if not (0.5 < alpha <= 1.0):
            bad.append("spacetime_white: alpha not in (1/2, 1]")
        elif not p > 2.0 / (2.0 * alpha - 1.0):
            bad.append("spacetime_white: p <= 2/(2alpha-1)")
        if not p * (2.0 * alpha - 2.0 * beta - 1.0) > 2.0:
            bad.append("spacetime_white: p(2alpha-2beta-1) <= 2")
    else:
        bad.append(f"unknown noise kind {kind!r}")
    if not (0.0 < delta_gap < beta * p / 2.0):
        bad.append("delta_gap not in (0, beta p/2)")
    if q is None and delta_gap > 0:
        q = 2.0 * (d + 2) / delta_gap
    if q is not None and delta_gap > 0 and not q > (d + 2) / delta_gap:
        bad.append("q <= (d+2)/delta_gap")
    if r is None and q is not None:
        r = q / 2.0
    if r is not None and q is not None and not (0.0 < r < q):
        bad.append("r not in (0, q)")
    if bad:
        raise PlanError(bad)
    return ExponentPlan(float(p), float(alpha), int(d), kind, float(beta), float(delta_gap), float(q), float(r))


def plan_table(alphas, ps, d: int, kind: str, beta: float | None = None):
    """Rows (alpha, p, beta_max, theta, beta_star) over a grid.

    With ``beta`` unset each row uses beta = beta_max/2 and delta_gap = beta p/4;
    rows where no admissible plan exists report NaN.
    """
    rows = []
    for a in alphas:
        for p in ps:
            bmax = beta_max(a, p, d, kind)
            b = bmax / 2.0 if beta is None else beta
            try:
                plan = make_plan(p, a, d, kind, b, b * p / 4.0)
                rows.append([a, p, bmax, b, plan.theta, plan.beta_star])
            except PlanError:
                rows.append([a, p, bmax, b, float("nan"), float("nan")])
    return rows


# --------------------------------------------------------------------------
# log-log fits


@dataclass
class ExponentFit:
    scales: np.ndarray
    statistics: np.ndarray
    slope: float
    intercept: float
    r_squared: float
    half_width: float
    label: str = ""
    p: float = 1.0
    pair_class: str = "mixed"
    counts: list = field(default_factory=list)
    dropped: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.scales) < 4:
            raise ValueError("an exponent fit needs at least 4 scales")

    @property
    def exponent(self) -> float:
        """Slope per unit moment order, in the metric the scales were given in."""
        return self.slope / self.p

    @property
    def raw_exponent(self) -> float:
        """Exponent in the raw variable; pure-time pairs use delta = |t - s|^(1/2)."""
        return self.exponent / 2.0 if self.pair_class == "time" else self.exponent

    @property
    def degenerate(self) -> bool:
        return self.r_squared < 0.9

    def fitted(self) -> np.ndarray:
        return np.exp(self.intercept) * self.scales**self.slope

    def rows(self):
        for s, v, f in zip(self.scales, self.statistics, self.fitted()):
            yield [float(s), float(v), float(f)]

    def summary(self) -> dict:
        return {
            "label": self.label,
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "half_width": self.half_width,
            "p": self.p,
            "pair_class": self.pair_class,
            "exponent": self.exponent,
            "raw_exponent": self.raw_exponent,
            "scales": len(self.scales),
            "dropped": self.dropped,
            "flags": self.flags,
        }


def _ols(logx, logy):
    slope, intercept, rval, _, _ = stats.linregress(logx, logy)
    return float(slope), float(intercept), float(rval**2)


def fit_loglog(scales, statistics, batch_statistics=None, label: str = "", p: float = 1.0,
               pair_class: str = "mixed", level: float = 0.95) -> ExponentFit:
    """Least-squares line through (log scale, log statistic).

    ``batch_statistics`` (shape n_batches x n_scales) gives a batch-means
    confidence half-width on the slope; without it the OLS standard error is
    used.
    """
    scales = np.asarray(scales, dtype=float)
    vals = np.asarray(statistics, dtype=float)
    if scales.size < 4:
        raise ValueError("need at least 4 scales")
    if np.any(scales <= 0) or np.any(vals <= 0):
        raise ValueError("scales and statistics must be positive for a log-log fit")
    lx, ly = np.log(scales), np.log(vals)
    slope, intercept, r2 = _ols(lx, ly)
    if batch_statistics is not None:
        b = np.asarray(batch_statistics, dtype=float)
        slopes = np.array([_ols(lx, np.log(row))[0] for row in b])
        nb = slopes.size
        hw = float(stats.t.ppf(0.5 + level / 2, nb - 1) * slopes.std(ddof=1) / math.sqrt(nb))
    else:
        res = stats.linregress(lx, ly)
        hw = float(stats.t.ppf(0.5 + level / 2, scales.size - 2) * res.stderr)
    return ExponentFit(scales, vals, slope, intercept, r2, hw, label, float(p), pair_class)


# --------------------------------------------------------------------------
# probe pairs


@dataclass(frozen=True)
class ProbePairs:
    """Index pairs (t-index, x-index) -> (t-index, x-index) with a class label."""

    it1: np.ndarray
    ix1: np.ndarray
    it2: np.ndarray
    ix2: np.ndarray
    pair_class: str

    def distances(self, times, x, period=None) -> np.ndarray:
        dt = np.abs(times[self.it1] - times[self.it2])
        dx = np.abs(x[self.ix1] - x[self.ix2])
        if period is not None:
            dx = np.minimum(dx, period - dx)
        return np.maximum(dx, np.sqrt(dt))

    def __len__(self):
        return int(self.it1.size)


def _cat(parts, cls):
    return ProbePairs(*(np.concatenate([getattr(p, k) for p in parts]) for k in ("it1", "ix1", "it2", "ix2")), cls)


def space_pairs(n_times: int, nx: int, lags, time_index: int = -1, positions=None) -> ProbePairs:
    """Equal-time pairs (x_j, x_{j+lag}) at one stored time; periodic in space."""
    ti = time_index % n_times
    pos = np.arange(nx) if positions is None else np.asarray(positions)
    parts = []
    for lag in lags:
        j = pos
        parts.append(ProbePairs(np.full(j.size, ti), j, np.full(j.size, ti), (j + int(lag)) % nx, "space"))
    return _cat(parts, "space")


def time_pairs(n_times: int, nx: int, lags, base_times=None, positions=None) -> ProbePairs:
    """Equal-position pairs (t_i, t_{i+lag}) with i + lag inside the stored range."""
    pos = np.arange(nx) if positions is None else np.asarray(positions)
    parts = []
    for lag in lags:
        lag = int(lag)
        bases = np.arange(n_times - lag) if base_times is None else np.asarray(
            [b for b in base_times if b + lag < n_times])
        if bases.size == 0:
            continue
        bi, pj = np.meshgrid(bases, pos, indexing="ij")
        parts.append(ProbePairs(bi.ravel(), pj.ravel(), bi.ravel() + lag, pj.ravel(), "time"))
    return _cat(parts, "time")


def mixed_pairs(n_times: int, nx: int, lags, positions=None) -> ProbePairs:
    """Pairs offset by (lag_t, lag_x) steps together, ending at the last stored time."""
    pos = np.arange(nx) if positions is None else np.asarray(positions)
    parts = []
    for lt, lx in lags:
        i2 = n_times - 1
        i1 = i2 - int(lt)
        if i1 < 0:
            continue
        parts.append(ProbePairs(np.full(pos.size, i1), pos, np.full(pos.size, i2), (pos + int(lx)) % nx, "mixed"))
    return _cat(parts, "mixed")


def _stack(ensemble):
    if isinstance(ensemble, np.ndarray):
        return ensemble
    return np.stack([s.values for s in ensemble])


def moment_increment_scan(ensemble, plan, pairs: ProbePairs, times, x, min_replicates: int = 50,
                          min_pairs: int = 5, n_batches: int = 10, label: str = "", period=None) -> ExponentFit:
    """Fit log E|u(X) - u(Y)|^p against log delta(X, Y) over dyadic delta-shells.

    ``ensemble`` is a list of FieldSample or an (R, n_times, nx) array; ``plan``
    is an ExponentPlan or a bare moment order p.  Shells with fewer than
    ``min_pairs`` pairs are dropped and listed in ``fit.dropped``.  Pass the
    domain length as ``period`` for fields on a torus so wrapped pairs get
    their short distance.
    """
    p = plan.p if isinstance(plan, ExponentPlan) else float(plan)
    u = _stack(ensemble)
    n_rep = u.shape[0]
    if n_rep < min_replicates:
        raise ValueError(f"need at least {min_replicates} replicates, got {n_rep}")
    times = np.asarray(times, dtype=float)
    x = np.asarray(x, dtype=float)
    dist = pairs.distances(times, x, period)
    if np.any(dist <= 0):
        raise ValueError("probe pairs must be distinct points")
    shell = np.floor(np.log2(dist) + 1e-6).astype(int)
    n_batches = min(n_batches, n_rep)
    batches = np.array_split(np.arange(n_rep), n_batches)
    scales, means, per_batch, counts, dropped = [], [], [], [], []
    for sh in np.unique(shell):
        sel = shell == sh
        cnt = int(sel.sum())
        if cnt < min_pairs:
            dropped.append({"shell": int(sh), "pairs": cnt})
            continue
        inc = np.abs(u[:, pairs.it1[sel], pairs.ix1[sel]] - u[:, pairs.it2[sel], pairs.ix2[sel]]) ** p
        per_rep = inc.mean(axis=1)
        scales.append(float(np.exp(np.mean(np.log(dist[sel])))))
        means.append(float(per_rep.mean()))
        per_batch.append([float(per_rep[b].mean()) for b in batches])
        counts.append(cnt)
    if len(scales) < 4:
        raise ValueError(f"only {len(scales)} shells with >= {min_pairs} pairs; need 4")
    fit = fit_loglog(scales, means, np.array(per_batch).T, label, p, pairs.pair_class)
    fit.counts = counts
    fit.dropped = dropped
    return fit


# --------------------------------------------------------------------------
# chaining


@dataclass
class ChainingReport:
    alpha_exp: float
    levels: tuple
    K: np.ndarray  # (n_paths, n_levels)
    lhs: np.ndarray  # M_alpha per path
    rhs: np.ndarray  # 2 sum 2^(i alpha) K_i
    rhs_rigorous: np.ndarray  # 2^(1+alpha) sum 2^(i alpha) K_i

    @property
    def passed(self) -> np.ndarray:
        scale = np.maximum(np.abs(self.rhs), 1.0)
        return self.lhs <= self.rhs + 8 * np.finfo(float).eps * scale

    @property
    def all_passed(self) -> bool:
        return bool(np.all(self.passed))

    @property
    def max_ratio(self) -> float:
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where(self.rhs > 0, self.lhs / self.rhs, 0.0)
        return float(np.max(r)) if r.size else 0.0

    def rows(self):
        for i, (l, r, rr, ok) in enumerate(zip(self.lhs, self.rhs, self.rhs_rigorous, self.passed)):
            yield [i, float(l), float(r), float(rr), bool(ok)]

    def summary(self) -> dict:
        return {"alpha_exp": self.alpha_exp, "levels": list(self.levels), "paths": int(self.lhs.size),
                "all_passed": self.all_passed, "max_lhs_over_rhs": self.max_ratio,
                "failures": int(np.sum(~self.passed))}


def chaining_bound(paths, alpha_exp: float, levels: tuple | None = None, length: float = 1.0) -> ChainingReport:
    """Dyadic chaining check on paths sampled at the 2^M + 1 points of [0, length].

    K_i is the largest increment between neighbours of the level-i lattice
    (spacing length 2^-i); M_alpha is the largest |u(x) - u(y)| / |x - y|^alpha
    over all lattice pairs.  ``paths`` may be one path or a stack of them.
    """
    u = np.atleast_2d(np.asarray(paths, dtype=float))
    n = u.shape[1] - 1
    M = int(round(math.log2(n))) if n > 0 else -1
    if n < 1 or 2**M != n:
        raise ValueError("paths need 2^M + 1 points")
    m, top = (0, M) if levels is None else levels
    if not (0 <= m <= top <= M):
        raise ValueError("levels must satisfy 0 <= m <= M_top <= M")
    if not (0.0 < alpha_exp <= 1.0):
        raise ValueError("alpha_exp must lie in (0, 1]")
    lv = np.arange(m, top + 1)
    K = np.empty((u.shape[0], lv.size))
    for c, i in enumerate(lv):
        step = 2 ** (M - i)
        K[:, c] = np.max(np.abs(np.diff(u[:, ::step], axis=1)), axis=1)
    # finest lattice used for the direct sup
    fine = u[:, :: 2 ** (M - top)]
    pts = length * np.linspace(0.0, 1.0, fine.shape[1])
    lhs = np.zeros(u.shape[0])
    for lag in range(1, fine.shape[1]):
        dist = (pts[lag] - pts[0]) ** alpha_exp
        lhs = np.maximum(lhs, np.max(np.abs(fine[:, lag:] - fine[:, :-lag]), axis=1) / dist)
    weights = (2.0 ** (lv * alpha_exp)) / length**alpha_exp
    s = K @ weights
    return ChainingReport(float(alpha_exp), (int(m), int(top)), K, lhs, 2.0 * s, 2.0 ** (1 + alpha_exp) * s)


# --------------------------------------------------------------------------
# tail split


@dataclass
class TailSplitReport:
    moment: float
    layer_cake: float
    threshold: float
    bound: float
    p: float

    @property
    def identity_error(self) -> float:
        if self.moment == 0:
            return abs(self.layer_cake)
        return abs(self.layer_cake - self.moment) / abs(self.moment)

    @property
    def bound_holds(self) -> bool:
        return self.moment <= self.bound * (1 + 1e-12)

    def summary(self) -> dict:
        return {"moment": self.moment, "layer_cake": self.layer_cake, "threshold": self.threshold,
                "bound": self.bound, "p": self.p, "identity_error": self.identity_error,
                "bound_holds": self.bound_holds}


def tail_moment_split(samples, M: float, p: float) -> TailSplitReport:
    """Layer-cake identity and the split bound M^p + p int_M^inf P(|X|>a) a^(p-1) da.

    P(|X| > a) of the empirical measure is a step function, so both integrals
    are exact sums of (n_above / n)(b^p - a^p) over the steps.
    """
    v = np.sort(np.abs(np.asarray(samples, dtype=float).ravel()))
    if v.size == 0:
        raise ValueError("no samples")
    if p < 1:
        raise ValueError("p must be at least 1")
    if not M > 0:
        raise ValueError("threshold M must be positive")
    n = v.size
    edges = np.concatenate([[0.0], v])
    above = (n - np.arange(n)) / n  # P(|X| > a) on (edges[k], edges[k+1])
    moment = math.fsum(v**p) / n
    layer = math.fsum(above * (edges[1:] ** p - edges[:-1] ** p))
    lo = np.maximum(edges[:-1], M)
    hi = np.maximum(edges[1:], M)
    tail = math.fsum(above * (hi**p - lo**p))
    return TailSplitReport(moment, layer, float(M), float(M) ** p + tail, float(p))


# --------------------------------------------------------------------------
# deterministic smoothing


def _smoothing_grid(kernel: KernelSpec, t_values, nx: int, length: float | None):
    t_values = np.asarray(t_values, dtype=float)
    ell_max = t_values.max() ** (1.0 / kernel.stable_index)
    L = 64.0 * ell_max if length is None else length
    return GridSpec(float(t_values.max()), 2, L, nx)


def _datum(family: str, grid: GridSpec, p: float, dim: int, mode: int = 1):
    if family == "power":
        return rough_initial_datum(grid, p, dim)
    if family == "mode":
        k = 2.0 * np.pi * mode / grid.domain_len
        return np.cos(k * grid.x)
    raise ValueError(f"unknown datum family {family!r}")


def spatial_smoothing_fit(kernel: KernelSpec, beta: float, p: float, t_values=None, nx: int = 2**15,
                          length: float | None = None, family: str = "power", scale: float = 1.0) -> ExponentFit:
    """Fit log [rho(t)]_{C^beta} against log t for rho0 = |x|^(-d/p).

    The predicted slope is -beta/(2 alpha) - d/(2 p alpha).
    """
    a = kernel.stable_index
    if t_values is None:
        t_values = np.geomspace(1.0, 16.0, 6)
    t_values = np.asarray(t_values, dtype=float)
    grid = _smoothing_grid(kernel, t_values, nx, length)
    rho0 = scale * _datum(family, grid, p, kernel.dim)
    sample = evolve_deterministic(rho0, kernel, grid, t_values)
    vals = []
    for t, row in zip(t_values, sample.values):
        ell = t ** (1.0 / a)
        reach = int(min(grid.nx // 2 - 1, math.ceil(8 * ell / grid.dx)))
        vals.append(spatial_holder_seminorm(row, grid.dx, beta, max_lag=reach))
    fit = fit_loglog(t_values, vals, label="spatial_smoothing", p=1.0, pair_class="scale")
    expected = -beta / a - kernel.dim / (p * a)
    fit.flags.append(f"expected_slope={expected:.6g}")
    return fit


def verify_smoothing(kernel: KernelSpec, beta: float, p: float, family: str = "power", t_values=None,
                     lag_ratio: float = 0.1, nx: int = 2**15, length: float | None = None,
                     scale: float = 1.0) -> ExponentFit:
    """Fit the t-decay of sup_x |rho(t + h) - rho(t)| / h^beta with h = lag_ratio * t.

    For rough L^p data the slope is -beta - d/(2 p alpha).  A fit with
    r^2 < 0.9 or a non-negative slope (smooth data, where increments decay
    exponentially) is flagged ``out_of_regime``.
    """
    if not (0.0 < beta <= 1.0):
        raise ValueError("beta must lie in (0, 1]")
    if t_values is None:
        t_values = np.geomspace(1.0, 16.0, 6)
    t_values = np.asarray(t_values, dtype=float)
    later = t_values * (1.0 + lag_ratio)
    grid = _smoothing_grid(kernel, later, nx, length)
    rho0 = scale * _datum(family, grid, p, kernel.dim)
    both = evolve_deterministic(rho0, kernel, grid, np.concatenate([t_values, later])).values
    k = t_values.size
    quot = np.max(np.abs(both[k:] - both[:k]), axis=1) / (lag_ratio * t_values) ** beta
    quot = np.maximum(quot, np.finfo(float).tiny)
    fit = fit_loglog(t_values, quot, label="time_smoothing", p=1.0, pair_class="scale")
    expected = -beta - kernel.dim / (2.0 * p * kernel.alpha)
    fit.flags.append(f"expected_slope={expected:.6g}")
    if fit.degenerate or fit.slope >= 0:
        fit.flags.append("out_of_regime")
    return fit


def dirichlet_smoothing_fit(F, theta: float, t_values=None) -> ExponentFit:
    """Fit log ||v(t)||_{C^theta} against log t for the Dirichlet semigroup on (0, pi).

    The norm is sup|v| plus the theta-Hölder seminorm over all node pairs.
    """
    F = np.asarray(F, dtype=float)
    if t_values is None:
        t_values = np.geomspace(0.01, 0.5, 6)
    xg = dirichlet_grid(F.size)
    dx = xg[1] - xg[0]
    rows = dirichlet_semigroup(F, np.asarray(t_values, dtype=float))
    norms = []
    for row in rows:
        padded = np.concatenate([[0.0], row, [0.0]])  # boundary nodes carry v = 0
        semi = spatial_holder_seminorm(padded, dx, theta, max_lag=padded.size - 1, periodic=False)
        norms.append(float(np.max(np.abs(row))) + semi)
    return fit_loglog(t_values, norms, label="dirichlet_smoothing", p=1.0, pair_class="scale")
