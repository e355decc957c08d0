"""Figures for the CLI report path: a gnuplot script next to the CSV data and
PNG renderings through matplotlib's non-interactive backend."""

import numpy as np


GNUPLOT_FRONT = """# profile written by fracfront solve-front
set datafile separator ","
set key autotitle columnhead
set multiplot layout 1,2
set xlabel "x"
set ylabel "phi"
plot "{csv}" using 1:2 with lines title "front"
set logscale xy
set xlabel "|x|"
set ylabel "phi"
plot "{csv}" using (($1 < -1) ? -$1 : 1/0):2 with lines title "left tail", \\
     "{csv}" using (($1 < -1) ? -$1 : 1/0):(({coef}) * (-$1) ** ({slope})) with lines dt 2 title "fit"
unset multiplot
"""


def gnuplot_front_script(csv_name, slope=float("nan"), intercept=float("nan")):
    coef = np.exp(intercept) if np.isfinite(intercept) else 0.0
    slope = slope if np.isfinite(slope) else 0.0
    return GNUPLOT_FRONT.format(csv=csv_name, coef="%.10g" % coef, slope="%.10g" % slope)


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_front(path, x, phi, slope=float("nan"), intercept=float("nan"), title=""):
    """Profile on linear axes and the left tail on log-log axes with the fit."""
    plt = _pyplot()
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    ax1.plot(x, phi, lw=1.2)
    ax1.set_xlabel("x")
    ax1.set_ylabel(r"$\phi$")
    ax1.set_ylim(-0.02, 1.02)
    left = (x < -1) & (phi > 0)
    if left.any():
        ax2.loglog(-x[left], phi[left], lw=1.2, label="front")
        if np.isfinite(slope):
            xs = np.geomspace(-x[left].max(), -x[left].min(), 50)
            ax2.loglog(xs, np.exp(intercept) * xs ** slope, "--", label="slope %.3f" % slope)
        ax2.legend(frameon=False)
    ax2.set_xlabel("|x|")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_speeds(path, sigmas, mus, mu_star=float("nan"), nu=float("nan")):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    ax.plot(sigmas, mus, "o-", label=r"$\mu(\sigma)$")
    if np.isfinite(mu_star):
        ax.axhline(mu_star, ls="--", c="k", lw=0.8, label="extrapolated")
    if np.isfinite(nu):
        ax.axhline(nu, ls=":", c="r", lw=0.8, label="bound")
    ax.set_xscale("log")
    ax.set_xlabel(r"$\sigma$")
    ax.set_ylabel("speed")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
