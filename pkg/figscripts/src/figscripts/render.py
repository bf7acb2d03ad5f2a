"""Render publication-style figures from a cvlattice run directory.

Usage:  render_figures <run-dir> --kind <overlay|heatmap|slice> -o <path>

Kinds and the CSV schemas they consume:

  overlay   densities.csv  (t, q_index, q, trotter_density, exact_density
                            or site, q_index, q, sim_density, exact_density)
            one panel per group: split-step density solid, reference dotted
  heatmap   field.csv (t, site, value) and, when non-empty, energy.csv
            space-time maps; the field panel uses a symmetric diverging
            scale centered at zero; light-cone guide lines are drawn when
            metrics.csv provides impulse_site
  slice     slice.csv (t, field, propagator): field solid, reference dashed

Rendering is deterministic for fixed inputs and toolchain.  Missing or
ill-formed CSV input exits non-zero without writing the output file.
"""

from __future__ import annotations

import argparse
import os
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["RenderError", "read_csv_columns", "render", "main"]

_SAVE_OPTS = dict(dpi=150, metadata={"Software": "render_figures"})


class RenderError(RuntimeError):
    """Input is missing or does not match the documented schema."""


def read_csv_columns(path: str, expected_header: tuple) -> dict:
    """Load a CSV with an exact header into float column arrays."""
    if not os.path.exists(path):
        raise RenderError(f"missing input file: {path}")
    with open(path) as fh:
        header = fh.readline().strip()
        if tuple(header.split(",")) != expected_header:
            raise RenderError(
                f"{path}: header {header!r} does not match expected {','.join(expected_header)!r}"
            )
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(expected_header):
                raise RenderError(f"{path}:{lineno}: expected {len(expected_header)} columns")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise RenderError(f"{path}:{lineno}: non-numeric value ({exc})") from None
    data = np.array(rows, dtype=float) if rows else np.empty((0, len(expected_header)))
    return {name: data[:, i] for i, name in enumerate(expected_header)}


def _read_metrics(run_dir: str) -> dict:
    path = os.path.join(run_dir, "metrics.csv")
    if not os.path.exists(path):
        return {}
    out = {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "name,value":
            raise RenderError(f"{path}: unexpected header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            name, _, value = line.partition(",")
            try:
                out[name] = float(value)
            except ValueError:
                continue
    return out


def _pivot(t: np.ndarray, site: np.ndarray, value: np.ndarray):
    times = np.unique(t)
    sites = np.unique(site)
    grid = np.full((times.size, sites.size), np.nan)
    t_idx = np.searchsorted(times, t)
    s_idx = np.searchsorted(sites, site)
    grid[t_idx, s_idx] = value
    if np.any(np.isnan(grid)):
        raise RenderError("field/energy table is not a complete (t, site) grid")
    return times, sites, grid


def render_overlay(run_dir: str, out_path: str, vmin=None, vmax=None) -> None:
    path = os.path.join(run_dir, "densities.csv")
    if not os.path.exists(path):
        raise RenderError(f"missing input file: {path}")
    with open(path) as fh:
        header = tuple(fh.readline().strip().split(","))
    if header == ("t", "q_index", "q", "trotter_density", "exact_density"):
        group_key, sim_key, ref_key = "t", "trotter_density", "exact_density"
        group_label = "t"
    elif header == ("site", "q_index", "q", "sim_density", "exact_density"):
        group_key, sim_key, ref_key = "site", "sim_density", "exact_density"
        group_label = "site"
    else:
        raise RenderError(f"{path}: unrecognized densities schema {header!r}")
    cols = read_csv_columns(path, header)
    groups = np.unique(cols[group_key])
    if groups.size == 0:
        raise RenderError(f"{path}: no data rows")
    fig, axes = plt.subplots(
        1, groups.size, figsize=(3.2 * groups.size, 3.0), sharey=True, squeeze=False
    )
    for ax, g in zip(axes[0], groups):
        mask = cols[group_key] == g
        order = np.argsort(cols["q"][mask])
        q = cols["q"][mask][order]
        ax.plot(q, cols[sim_key][mask][order], "-", lw=1.2, label="split-step")
        ax.plot(q, cols[ref_key][mask][order], ":", lw=1.6, label="reference")
        ax.set_title(f"{group_label} = {g:g}")
        ax.set_xlabel("q")
        if vmin is not None or vmax is not None:
            ax.set_ylim(vmin, vmax)
    axes[0][0].set_ylabel("|psi(q)|^2")
    axes[0][-1].legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_OPTS)
    plt.close(fig)


def render_heatmap(run_dir: str, out_path: str, vmin=None, vmax=None) -> None:
    field = read_csv_columns(os.path.join(run_dir, "field.csv"), ("t", "site", "value"))
    if field["t"].size == 0:
        raise RenderError("field.csv has no data rows (empty time range)")
    times, sites, fgrid = _pivot(field["t"], field["site"], field["value"])

    panels = [("field value", fgrid, True)]
    energy_path = os.path.join(run_dir, "energy.csv")
    if os.path.exists(energy_path):
        energy = read_csv_columns(energy_path, ("t", "site", "value"))
        if energy["t"].size:
            _, _, egrid = _pivot(energy["t"], energy["site"], energy["value"])
            panels.append(("energy density", egrid, False))

    fig, axes = plt.subplots(1, len(panels), figsize=(5.0 * len(panels), 4.0), squeeze=False)
    extent = (sites[0] - 0.5, sites[-1] + 0.5, times[0], times[-1])
    metrics = _read_metrics(run_dir)
    for ax, (label, grid, diverging) in zip(axes[0], panels):
        if diverging:
            bound = np.max(np.abs(grid)) or 1.0
            im = ax.imshow(
                grid,
                origin="lower",
                aspect="auto",
                extent=extent,
                cmap="RdBu_r",
                vmin=-bound if vmin is None else vmin,
                vmax=bound if vmax is None else vmax,
            )
        else:
            im = ax.imshow(
                grid,
                origin="lower",
                aspect="auto",
                extent=extent,
                cmap="viridis",
                vmin=vmin,
                vmax=vmax,
            )
        if "impulse_site" in metrics:
            x0 = metrics["impulse_site"]
            ax.plot(x0 + times, times, "k-", lw=0.8)
            ax.plot(x0 - times, times, "k-", lw=0.8)
            ax.set_xlim(extent[0], extent[1])
        ax.set_xlabel("site")
        ax.set_ylabel("t")
        ax.set_title(label)
        fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_OPTS)
    plt.close(fig)


def render_slice(run_dir: str, out_path: str, vmin=None, vmax=None) -> None:
    cols = read_csv_columns(os.path.join(run_dir, "slice.csv"), ("t", "field", "propagator"))
    if cols["t"].size == 0:
        raise RenderError("slice.csv has no data rows (empty time range)")
    fig, ax = plt.subplots(figsize=(6.0, 3.2))
    ax.plot(cols["t"], cols["field"], "-", lw=1.2, label="field at impulse site")
    ax.plot(cols["t"], cols["propagator"], "--", lw=1.2, label="causal propagator")
    ax.set_xlabel("t")
    ax.set_ylabel("field value")
    if vmin is not None or vmax is not None:
        ax.set_ylim(vmin, vmax)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_OPTS)
    plt.close(fig)


_KINDS = {"overlay": render_overlay, "heatmap": render_heatmap, "slice": render_slice}


def render(run_dir: str, kind: str, out_path: str, vmin=None, vmax=None) -> None:
    if kind not in _KINDS:
        raise RenderError(f"unknown figure kind '{kind}'")
    if not os.path.isdir(run_dir):
        raise RenderError(f"run directory not found: {run_dir}")
    _KINDS[kind](run_dir, out_path, vmin=vmin, vmax=vmax)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render_figures", description="Render figures from a cvlattice run directory"
    )
    parser.add_argument("run_dir", help="directory written by the cvlattice CLI")
    parser.add_argument("--kind", required=True, choices=sorted(_KINDS))
    parser.add_argument("-o", "--output", required=True, help="output image path")
    parser.add_argument("--vmin", type=float, default=None, help="lower value-scale bound")
    parser.add_argument("--vmax", type=float, default=None, help="upper value-scale bound")
    args = parser.parse_args(argv)
    try:
        render(args.run_dir, args.kind, args.output, vmin=args.vmin, vmax=args.vmax)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.output}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
