"""Plain-text output formats: time series CSV, spectrum snapshots, check results, manifests."""
from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .spectral import SpectralField, make_field

TIMESERIES_HEADER = "t,x0,x1,l2,gevrey_half,dropped_mass"
RESULTS_HEADER = "check_name,status,measured,bound,slack"


def _g(x) -> str:
    return format(float(x), ".17g")


def write_timeseries(traj, path) -> None:
    """One row per node, 17 significant digits."""
    t = traj.times
    x0 = traj.x_norms(0.0)
    x1 = traj.x_norms(1.0)
    l2 = traj.l2_norms()
    gev = traj.gevrey_norms(0.5)
    dropped = traj.dropped if traj.dropped is not None else np.zeros(len(t))
    lines = [TIMESERIES_HEADER]
    for row in zip(t, x0, x1, l2, gev, dropped):
        lines.append(",".join(_g(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_timeseries(path) -> dict:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, i] for i, name in enumerate(TIMESERIES_HEADER.split(","))}


def write_spectrum(field: SpectralField, t: float, path) -> None:
    """Header ``# N=<int> t=<float>`` then ``k1,k2,re,im`` for the canonical half-lattice."""
    lines = [f"# N={field.N} t={_g(t)}"]
    for (k1, k2), c in field.entries(canonical=True):
        lines.append(f"{k1},{k2},{_g(c.real)},{_g(c.imag)}")
    Path(path).write_text("\n".join(lines) + "\n")


_HEADER = re.compile(r"#\s*N=(\d+)\s+t=(\S+)")


def read_spectrum(path):
    """Inverse of :func:`write_spectrum`; returns ``(field, t)``."""
    text = Path(path).read_text().splitlines()
    if not text:
        raise ValueError(f"{path}: empty spectrum file")
    m = _HEADER.fullmatch(text[0].strip())
    if m is None:
        raise ValueError(f"{path}: bad spectrum header {text[0]!r}")
    N, t = int(m.group(1)), float(m.group(2))
    entries = []
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected k1,k2,re,im")
        k1, k2 = int(parts[0]), int(parts[1])
        entries.append(((k1, k2), complex(float(parts[2]), float(parts[3]))))
    return make_field(N, entries), t


def write_results(results, path) -> None:
    lines = [RESULTS_HEADER] + [r.record() for r in results]
    Path(path).write_text("\n".join(lines) + "\n")


def read_results(path) -> list:
    rows = []
    for line in Path(path).read_text().splitlines()[1:]:
        name, status, measured, bound, slack = line.rsplit(",", 4)
        rows.append((name, status, float(measured), float(bound), float(slack)))
    return rows


def write_manifest(items, path) -> None:
    """Flat ``key = value`` lines in the given order."""
    lines = [f"{k} = {v}" for k, v in items]
    Path(path).write_text("\n".join(lines) + "\n")
