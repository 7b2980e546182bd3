"""Figure rendering for the batch experiments.

Every report path renders its figures to files next to the delimited
output.  All figures go through the Agg backend; nothing opens a window.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "potential_figure",
    "radial_profile_figure",
    "sweep_figure",
    "domain_figure",
    "field_figure",
    "catalog_figure",
    "spectrum_figure",
]

_DPI = 130


def _save(fig, path):
    path = Path(path)
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def potential_figure(p, cert, path):
    lo = -0.25 * cert.s0
    hi = 1.6 * cert.s0
    s = np.linspace(lo, hi, 800)
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(8.2, 3.2))
    ax0.plot(s, p.eval(s), "b-")
    ax0.axhline(0.0, color="gray", lw=0.6)
    ax0.plot([cert.s0], [-cert.m], "ro", ms=4, label=f"s0={cert.s0:.4f}")
    ax0.set_xlabel("s"), ax0.set_ylabel("W"), ax0.legend(fontsize=8)
    ax1.plot(s, p.deriv(s), "g-")
    ax1.axhline(0.0, color="gray", lw=0.6)
    for x, lab in ((cert.s1crit, "s1"), (cert.s0, "s0")):
        ax1.axvline(x, color="r", lw=0.6, ls=":")
    ax1.plot([], [], " ", label=f"min W' = {cert.w_minus:.4f}")
    ax1.set_xlabel("s"), ax1.set_ylabel("W'"), ax1.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def radial_profile_figure(profile, path):
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    ax.plot(profile.grid.nodes, profile.values, "b-", lw=1.2)
    ax.axvline(profile.support_radius, color="r", ls=":", lw=0.8,
               label=f"R = {profile.support_radius:.3f}")
    ax.set_xlabel("r"), ax.set_ylabel("u")
    ax.set_title(f"gamma={profile.gamma:g}  E={profile.energy:.4g}  "
                 f"lam={profile.lam:.4g}", fontsize=9)
    ax.legend(fontsize=8)
    return _save(fig, path)


def sweep_figure(gammas, radii, lower, upper, energies, path):
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(8.4, 3.4))
    g = np.asarray(gammas, dtype=float)
    pos = np.asarray(radii) > 0
    ax0.loglog(g, lower, "k--", lw=0.8, label="lower bound")
    ax0.loglog(g, upper, "k-.", lw=0.8, label="upper bound")
    ax0.loglog(g[pos], np.asarray(radii)[pos], "bo-", ms=4, label="support radius")
    ax0.set_xlabel("gamma"), ax0.set_ylabel("R"), ax0.legend(fontsize=8)
    ax1.semilogx(g, energies, "rs-", ms=4)
    ax1.axhline(0.0, color="gray", lw=0.6)
    ax1.set_xlabel("gamma"), ax1.set_ylabel("minimum energy")
    fig.tight_layout()
    return _save(fig, path)


def domain_figure(domain, path):
    fig, ax = plt.subplots(figsize=(4.6, 4.2))
    extent = _extent(domain)
    ax.imshow(domain.mask.T, origin="lower", extent=extent, cmap="Greys",
              alpha=0.55, interpolation="nearest")
    for r, color, lab in ((domain.r_deform, "tab:blue", "inner shrink"),
                          (-domain.r_deform, "tab:red", "outer fatten")):
        ax.contour(domain.axis_coords(0), domain.axis_coords(1),
                   domain.signed_distance.T, levels=[r], colors=[color],
                   linewidths=0.8)
    ax.set_title(f"{domain.family}  h={domain.h:g}  r={domain.r_deform:g}",
                 fontsize=9)
    ax.set_aspect("equal")
    return _save(fig, path)


def _extent(domain):
    x = domain.axis_coords(0)
    y = domain.axis_coords(1)
    return [x[0], x[-1], y[0], y[-1]]


def field_figure(record, path):
    dom = record.field.domain
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    if dom.dim == 1:
        ax.plot(dom.axis_coords(0), record.field.values, "b-")
        ax.set_xlabel("x"), ax.set_ylabel("u")
    else:
        vals = np.where(dom.mask, record.field.values, np.nan)
        im = ax.imshow(vals.T, origin="lower", extent=_extent(dom),
                       cmap="viridis", interpolation="nearest")
        fig.colorbar(im, ax=ax, shrink=0.85)
        ax.plot(*record.barycenter, "r+", ms=10, mew=1.5)
        ax.set_aspect("equal")
    ax.set_title(f"E={record.energy:.5g}  lam={record.lam:.5g}  "
                 f"V={record.volume:.4g}", fontsize=9)
    return _save(fig, path)


def catalog_figure(domain, catalog, path):
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    ax.imshow(domain.mask.T, origin="lower", extent=_extent(domain),
              cmap="Greys", alpha=0.4, interpolation="nearest")
    if catalog.records:
        xs = [r.barycenter[0] for r in catalog.records]
        ys = [r.barycenter[1] for r in catalog.records]
        es = [r.energy for r in catalog.records]
        sc = ax.scatter(xs, ys, c=es, cmap="coolwarm", s=42, edgecolors="k",
                        linewidths=0.5, zorder=3)
        fig.colorbar(sc, ax=ax, shrink=0.85, label="energy")
    for seed in catalog.seeds:
        ax.plot(seed[0], seed[1], "g.", ms=3, alpha=0.6)
    ax.set_aspect("equal")
    ax.set_title(f"{catalog.distinct_below_c} below c, "
                 f"{catalog.distinct_total} total", fontsize=9)
    return _save(fig, path)


def spectrum_figure(report, path):
    fig, ax = plt.subplots(figsize=(4.6, 3.2))
    k = np.arange(len(report.eigenvalues))
    ax.stem(k, report.eigenvalues)
    ax.axhline(0.0, color="gray", lw=0.6)
    ax.axhspan(-report.tol_eig, report.tol_eig, color="orange", alpha=0.25,
               label="degeneracy band")
    ax.set_xlabel("mode"), ax.set_ylabel("eigenvalue")
    ax.set_title(f"index={report.morse_index}  "
                 f"degenerate={report.degenerate_flag}", fontsize=9)
    ax.legend(fontsize=8)
    return _save(fig, path)
