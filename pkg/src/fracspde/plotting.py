"""Render report figures from the CSV outputs of the other subcommands."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import read_csv  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.2),
    "figure.dpi": 120,
    "axes.linewidth": 0.6,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "savefig.bbox": "tight",
    # fixed metadata keeps PNG bytes reproducible
    "svg.hashsalt": "fracspde",
}


def _columns(path):
    header, rows = read_csv(path)
    cols = {h: np.array([r[i] for r in rows], dtype=object) for i, h in enumerate(header)}
    return cols


def _num(col):
    return np.asarray(col, dtype=float)


def _save(fig, path: Path, stamp=None):
    fig.savefig(path, metadata={"Software": None, "Description": stamp})
    plt.close(fig)


def plot_fit(csv_path: Path, out: Path, title: str, stamp=None):
    c = _columns(csv_path)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.loglog(_num(c["scale"]), _num(c["statistic"]), "o", ms=4, label="empirical")
        ax.loglog(_num(c["scale"]), _num(c["fitted"]), "-", lw=1, label="fit")
        ax.set_xlabel("scale")
        ax.set_ylabel("statistic")
        ax.set_title(title)
        ax.legend(frameon=False)
        _save(fig, out, stamp)


def plot_bound_ratio(csv_path: Path, out: Path, stamp=None):
    c = _columns(csv_path)
    t, x, q = _num(c["t"]), _num(c["x"]), _num(c["ratio"])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for tv in np.unique(t)[:: max(1, np.unique(t).size // 5)]:
            sel = t == tv
            ax.semilogx(x[sel], q[sel], lw=1, label=f"t={tv:.3g}")
        ax.set_xlabel("|x|")
        ax.set_ylabel("K / envelope")
        ax.legend(frameon=False, fontsize=7)
        _save(fig, out, stamp)


def plot_chaining(csv_path: Path, out: Path, stamp=None):
    c = _columns(csv_path)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.loglog(_num(c["rhs"]), _num(c["lhs"]), ".", ms=3)
        lim = [min(_num(c["rhs"]).min(), _num(c["lhs"]).min()), _num(c["rhs"]).max()]
        ax.loglog(lim, lim, "k--", lw=0.8)
        ax.set_xlabel("2 sum 2^(i a) K_i")
        ax.set_ylabel("M_a")
        _save(fig, out, stamp)


def plot_stats(csv_path: Path, out: Path, stamp=None):
    c = _columns(csv_path)
    t, var = _num(c["t"]), _num(c["variance"])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        xs = _num(c["x"])
        for xv in np.unique(xs):
            sel = xs == xv
            ax.plot(t[sel], var[sel], lw=1, label=f"x={xv:.3g}")
            if "exact_variance" in c:
                ex = np.array([v if isinstance(v, float) else np.nan for v in c["exact_variance"]])[sel]
                if np.any(np.isfinite(ex)):
                    ax.plot(t[sel], ex, "k--", lw=0.8)
        ax.set_xlabel("t")
        ax.set_ylabel("Var u(t, x)")
        ax.legend(frameon=False, fontsize=7)
        _save(fig, out, stamp)


def plot_mass(csv_path: Path, out: Path, stamp=None):
    c = _columns(csv_path)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        err = np.maximum(np.abs(_num(c["error"])), 1e-17)
        labels = [f"a={a:g},d={int(d)},t={t:g}" for a, d, t in zip(_num(c["alpha"]), _num(c["dim"]), _num(c["t"]))]
        ax.bar(range(err.size), err)
        ax.set_yscale("log")
        ax.set_xticks(range(err.size))
        ax.set_xticklabels(labels, rotation=90, fontsize=6)
        ax.set_ylabel("|mass - 1|")
        _save(fig, out, stamp)


# csv file name -> renderer
RENDERERS = {
    "bound_ratio.csv": plot_bound_ratio,
    "derivative_envelope.csv": plot_bound_ratio,
    "mass.csv": plot_mass,
    "chaining.csv": plot_chaining,
    "stats.csv": plot_stats,
}


def render_all(src: Path, dest: Path, stamp=None) -> list:
    """Render every recognised CSV under ``src`` into PNGs in ``dest``.

    ``stamp`` is written into each PNG's Description text chunk.
    """
    src, dest = Path(src), Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    made = []
    for path in sorted(src.rglob("*.csv")):
        if dest in path.parents:
            continue
        name = path.name
        target = dest / (str(path.relative_to(src)).replace("/", "__")[:-4] + ".png")
        if name in RENDERERS:
            RENDERERS[name](path, target, stamp)
        elif name.startswith("fit_"):
            plot_fit(path, target, name[4:-4], stamp)
        else:
            continue
        made.append(target)
    return made
