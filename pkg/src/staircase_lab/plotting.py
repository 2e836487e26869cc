"""Optional PNG figures for CLI reports. The delimited outputs remain the record."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="png", dpi=120, metadata=_META)
    plt.close(fig)


def _value_or_mid(est):
    if est.is_exact and est.value is not None:
        return float(est.value)
    return float(est.midpoint)


def plot_diagram(samples, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [float(s.parameter) for s in samples]
    ax.step(xs, [_value_or_mid(s.estimate) for s in samples], where="post", color="k", lw=1.2)
    lo = [float(s.estimate.lower) for s in samples]
    hi = [float(s.estimate.upper) for s in samples]
    ax.fill_between(xs, lo, hi, step="post", color="0.8")
    ax.set_xlabel("y")
    ax.set_ylabel("activity s(y)")
    _save(fig, path)


def plot_geometric(sweep, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    mus = [s.mu.value for s in sweep.samples]
    ax.step(mus, [_value_or_mid(s.estimate) for s in sweep.samples], where="post", color="k",
            lw=1.2, label=f"G({sweep.n}, {sweep.p}), seed {sweep.seed}")
    ax.plot(mus, [s.reference.midpoint for s in sweep.samples], color="tab:red", lw=1, label="rotation number of f^mu")
    ax.set_xlabel("mu")
    ax.set_ylabel("activity")
    ax.legend(frameon=False, loc="upper left")
    _save(fig, path)


def plot_counterexample(result, path):
    import numpy as np

    u = result.odometer
    n = np.arange(1, len(u))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogx(n, u[1:] / n, color="k", lw=1)
    ax.axhline(0.5, color="0.6", lw=0.8, ls="--")
    ax.axhline(1.0, color="0.6", lw=0.8, ls="--")
    ax.set_xlabel("n")
    ax.set_ylabel("u_n / n")
    _save(fig, path)


def plot_mixing(report, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    n = [r[0] for r in report.rows]
    ax.semilogy(n, [max(r[1], 1e-300) for r in report.rows], color="k", lw=1.2, label="max TV")
    if report.bipartite:
        ax.semilogy(n, [max(r[2], 1e-300) for r in report.rows], lw=1, label="side X, two-step")
        ax.semilogy(n, [max(r[3], 1e-300) for r in report.rows], lw=1, label="side Y, two-step")
    ax.set_xlabel("n")
    ax.set_ylabel("total variation")
    ax.legend(frameon=False)
    _save(fig, path)
