"""Figure rendering for the report paths.

Each sweep/report command writes its delimited data first; these helpers
render the matching PNG next to it.  Rendering is headless (Agg) and keeps
PNG metadata empty so outputs stay byte-stable across runs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = dict(dpi=150, metadata={"Software": None})


def _finish(fig, path: str | Path) -> None:
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def render_sse_contour(
    delay_bounds_s,
    violation_probs,
    sse_grid,
    mean_snr_db: float,
    path: str | Path,
) -> None:
    """Contour map of source spectral efficiency over (delay bound, violation prob)."""
    fig, ax = plt.subplots(figsize=(7, 5))
    D, P = np.asarray(delay_bounds_s), np.asarray(violation_probs)
    Z = np.asarray(sse_grid, dtype=float)  # shape (len(P), len(D))
    masked = np.ma.masked_invalid(np.log10(np.where(Z > 0, Z, np.nan)))
    cs = ax.contourf(D, P, masked, levels=20, cmap="viridis")
    fig.colorbar(cs, ax=ax, label="log10 SSE [bits/s/Hz]")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("delay bound [s]")
    ax.set_ylabel("violation probability")
    ax.set_title(f"Source spectral efficiency, Rayleigh {mean_snr_db:g} dB")
    _finish(fig, path)


def render_service_region(
    snr1_db,
    snr2_db,
    region_codes,
    boundary1_db: float | None,
    boundary2_db: float | None,
    user_ids: tuple[str, str],
    path: str | Path,
) -> None:
    """Region map: which of the two users are servable at each SNR pair.

    Codes: 0 none, 1 only user 1, 2 only user 2, 3 both.
    """
    fig, ax = plt.subplots(figsize=(6.5, 5.5))
    mesh = ax.pcolormesh(
        np.asarray(snr1_db),
        np.asarray(snr2_db),
        np.asarray(region_codes, dtype=float).T,
        cmap=plt.get_cmap("Pastel1", 4),
        vmin=-0.5,
        vmax=3.5,
        shading="nearest",
    )
    cbar = fig.colorbar(mesh, ax=ax, ticks=[0, 1, 2, 3])
    cbar.ax.set_yticklabels(["none", f"only {user_ids[0]}", f"only {user_ids[1]}", "both"])
    if boundary1_db is not None:
        ax.axvline(boundary1_db, color="k", lw=1, ls="--")
    if boundary2_db is not None:
        ax.axhline(boundary2_db, color="k", lw=1, ls="--")
    ax.set_xlabel(f"{user_ids[0]} average SNR [dB]")
    ax.set_ylabel(f"{user_ids[1]} average SNR [dB]")
    ax.set_title("Service regions")
    _finish(fig, path)


def render_density_sweep(densities, users_by_method: dict[str, list[float]], path: str | Path) -> None:
    """Mean users supported vs. density, one line per method."""
    fig, ax = plt.subplots(figsize=(7, 5))
    for method, ys in users_by_method.items():
        ax.plot(densities, ys, marker="o", label=method)
    ax.set_xlabel("user density [1/m^2]")
    ax.set_ylabel("users supported (mean)")
    ax.legend()
    ax.grid(True, alpha=0.3)
    _finish(fig, path)


def render_cell_map(report, method: str, path: str | Path) -> None:
    """Scatter of one drop: served/unserved users coloured by QoS class."""
    fig, ax = plt.subplots(figsize=(6, 6))
    served = set(report.methods[method].served_ids)
    classes = sorted({u.qos_class for u in report.users})
    colors = plt.get_cmap("tab10")
    for ci, cls in enumerate(classes):
        xs = [u.x_m for u in report.users if u.qos_class == cls and u.user_id in served]
        ys = [u.y_m for u in report.users if u.qos_class == cls and u.user_id in served]
        ax.scatter(xs, ys, s=12, color=colors(ci), label=f"{cls} (served)")
        xs = [u.x_m for u in report.users if u.qos_class == cls and u.user_id not in served]
        ys = [u.y_m for u in report.users if u.qos_class == cls and u.user_id not in served]
        ax.scatter(xs, ys, s=12, color=colors(ci), alpha=0.2, marker="x",
                   label=f"{cls} (dropped)")
    ax.set_aspect("equal")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(f"Drop map, {method}")
    ax.legend(fontsize=8, loc="upper right")
    _finish(fig, path)
