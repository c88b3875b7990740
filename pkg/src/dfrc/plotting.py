"""PNG figures for the CLI reports.

Uses ``matplotlib.figure.Figure`` directly with the Agg canvas, so nothing
touches pyplot's global state and worker threads can render safely.
"""
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

_LABELS = {
    "bcd": "BCD (WMMSE)",
    "manopt": "Riemannian gradient",
    "mmse_filter": "MMSE filter",
    "cholesky": "Cholesky",
    "single_user_closed_form": "Closed form",
}


def _save(fig, path):
    FigureCanvasAgg(fig)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    return path


def plot_sweep(aggregates, path):
    """Mean spectral efficiency against SNR, one line per scheme."""
    fig = Figure(figsize=(6, 4.2))
    ax = fig.add_subplot()
    for scheme in dict.fromkeys(a.scheme for a in aggregates):
        pts = sorted((a.snr_db, a.mean_rate) for a in aggregates if a.scheme == scheme)
        x, y = zip(*pts)
        ax.plot(x, y, marker="o", label=_LABELS.get(scheme, scheme))
    ax.set_xlabel("transmit SNR (dB)")
    ax.set_ylabel("spectral efficiency (bit/s/Hz)")
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)


def plot_trace(rows, path):
    """WSR per iteration for each scheme in ``(scheme, iteration, wsr, ...)`` rows."""
    fig = Figure(figsize=(6, 4.2))
    ax = fig.add_subplot()
    for scheme in dict.fromkeys(r[0] for r in rows):
        it = [r[1] for r in rows if r[0] == scheme]
        wsr = [r[2] for r in rows if r[0] == scheme]
        ax.plot(it, wsr, label=_LABELS.get(scheme, scheme))
    ax.set_xscale("symlog", linthresh=10)
    ax.set_xlabel("iteration")
    ax.set_ylabel("weighted sum-rate (bit/s/Hz)")
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)


def plot_beampattern(rows, path):
    """Ideal (scaled to the achieved peak) and achieved beampattern in dB."""
    theta, ideal, achieved = np.asarray(rows, dtype=float).T
    fig = Figure(figsize=(6.4, 4.2))
    ax = fig.add_subplot()
    peak = achieved.max() if achieved.max() > 0 else 1.0
    ax.plot(theta, 10 * np.log10(np.maximum(achieved / peak, 1e-6)), label="achieved")
    ax.plot(theta, 10 * np.log10(np.maximum(ideal, 1e-6)), "--", label="ideal")
    ax.set_ylim(-40, 3)
    ax.set_xlim(theta[0], theta[-1])
    ax.set_xlabel("angle (deg)")
    ax.set_ylabel("normalized beampattern (dB)")
    ax.grid(alpha=0.3)
    ax.legend()
    return _save(fig, path)
