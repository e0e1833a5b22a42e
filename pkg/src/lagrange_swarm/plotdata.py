"""Whitespace-separated plot data files and a matching gnuplot script."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .simulation import SimTrace


def _cols(prefix: str, n: int, p: int) -> list[str]:
    return [f"{prefix}_{i}^({k})" for i in range(1, n + 1) for k in range(1, p + 1)]


def plot_tables(tr: SimTrace) -> dict:
    """name -> (columns, array) for coordinates, velocities, errors and estimates."""
    T, n, p = len(tr.times), tr.n, tr.dof
    t = tr.times[:, None]
    lead_q = [f"q_0^({k})" for k in range(1, p + 1)]
    lead_v = [f"qdot_0^({k})" for k in range(1, p + 1)]
    return {
        "coordinates": (["t"] + lead_q + _cols("q", n, p),
                        np.hstack([t, tr.q0, tr.q.reshape(T, -1)])),
        "velocities": (["t"] + lead_v + _cols("qdot", n, p),
                       np.hstack([t, tr.qdot0, tr.qdot.reshape(T, -1)])),
        "errors": (["t"] + [f"err_pos_{i}" for i in range(1, n + 1)]
                   + [f"err_vel_{i}" for i in range(1, n + 1)] + ["V"],
                   np.hstack([t, tr.err_pos, tr.err_vel, tr.V[:, None]])),
        "estimates": (["t"] + [f"obs_pos_{i}" for i in range(1, n + 1)]
                      + [f"obs_vel_{i}" for i in range(1, n + 1)],
                      np.hstack([t, tr.obs_err_pos, tr.obs_err_vel])),
    }


def write_plot_data(tr: SimTrace, out: Path, tag: str = "") -> list[Path]:
    out = Path(out)
    paths = []
    for name, (cols, arr) in plot_tables(tr).items():
        path = out / f"{name}{tag}.dat"
        with open(path, "w") as fh:
            fh.write("# " + " ".join(cols) + "\n")
            np.savetxt(fh, arr, fmt="%.10g")
        paths.append(path)
    return paths


def read_plot_data(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        head = fh.readline()
        if not head.startswith("#"):
            raise ValueError(f"{path}: missing column header")
        cols = head[1:].split()
        arr = np.loadtxt(fh, ndmin=2)
    if arr.shape[1] != len(cols):
        raise ValueError(f"{path}: {arr.shape[1]} columns but {len(cols)} names")
    return cols, arr


def gnuplot_script(paths) -> str:
    """One PNG per data file; every non-time column is drawn against t."""
    lines = ["# gnuplot script: gnuplot plots.gp",
             "set terminal pngcairo size 1000,600",
             "set key outside right",
             "set xlabel 't [s]'", "set grid"]
    for path in paths:
        path = Path(path)
        cols, _ = read_plot_data(path)
        lines.append(f"set output '{path.stem}.png'")
        lines.append(f"set title '{path.stem}'")
        lines.append(f"set logscale y" if path.stem.startswith(("errors", "estimates")) else "unset logscale y")
        series = [f"'{path.name}' using 1:{j + 1} with lines title '{c}'" for j, c in enumerate(cols) if j]
        lines.append("plot " + ", \\\n     ".join(series))
    return "\n".join(lines) + "\n"
