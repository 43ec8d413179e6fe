"""File formats: point-cloud CSV, field CSV / LRF1 binary blocks, study outputs.

LRF1 binary layout (little endian)::

    b"LRF1" | u64 n_points | u64 n_reps | n_reps * n_points float64 (row = replicate)
"""
from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError, ShapeError

MAGIC = b"LRF1"
_HEADER = struct.Struct("<4sQQ")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_cloud_csv(path, points: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z"])
        for p in points:
            w.writerow([_fmt(v) for v in p])


def read_cloud_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def write_field_csv(path, values: np.ndarray) -> None:
    values = np.atleast_2d(values)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"p{j}" for j in range(values.shape[1])])
        for row in values:
            w.writerow([_fmt(v) for v in row])


def read_field_csv(path) -> np.ndarray:
    with open(path) as fh:
        first = fh.readline()
    skip = 1 if first and not _is_number(first.split(",")[0]) else 0
    return np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def write_field_binary(path, values: np.ndarray) -> None:
    values = np.ascontiguousarray(np.atleast_2d(values), dtype="<f8")
    reps, n = values.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, n, reps))
        fh.write(values.tobytes())


def read_field_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ShapeError(f"{path}: truncated LRF1 header")
        magic, n, reps = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ConfigError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}", key="input")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * reps:
        raise ShapeError(f"{path}: header says {reps}x{n} values but file holds {data.size}")
    return data.reshape(reps, n).astype(np.float64)


def read_field(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
    return read_field_binary(path) if magic == MAGIC else read_field_csv(path)


def write_functional_csv(path, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replicate", "x_value"])
        for k, v in enumerate(values):
            w.writerow([k, _fmt(v)])


def write_study_outputs(result, out_dir, plots: bool = False) -> list[Path]:
    """distances.csv, boxes.csv, rate_fit.csv, meta.txt and optional SVG box plots."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    written = []

    p = out / "distances.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["surface", "weight", "r", "repeat", "ks_distance"])
        for m in range(result.distances.shape[0]):
            for i, r in enumerate(cfg.radii):
                w.writerow([cfg.surface, cfg.weight, _fmt(r), m, _fmt(result.distances[m, i])])
    written.append(p)

    p = out / "boxes.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "min", "q1", "median", "q3", "max", "log_median"])
        for r, b in zip(cfg.radii, result.boxes):
            log_med = math.log(b.median) if b.median > 0 else float("nan")
            w.writerow([_fmt(r), *(_fmt(v) for v in (b.min, b.q1, b.median, b.q3, b.max)), _fmt(log_med)])
    written.append(p)

    p = out / "rate_fit.csv"
    write_rate_fit_csv(p, result.rate_fit)
    written.append(p)

    p = out / "meta.txt"
    with open(p, "w") as fh:
        for key, val in result.metadata.items():
            fh.write(f"{key} = {json.dumps(val, default=str)}\n")
    written.append(p)

    if plots:
        written.extend(_box_plots(result, out))
    return written


def write_rate_fit_csv(path, fit) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["intercept", "slope", "slope_se", "n_points", "excluded_zeros"])
        if fit is not None:
            w.writerow([_fmt(fit.intercept), _fmt(fit.slope), _fmt(fit.slope_se), fit.n_points, fit.excluded_zeros])


def read_distances_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Returns (radii, distances[repeat, radius]) from a distances.csv file."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append((float(row["r"]), int(row["repeat"]), float(row["ks_distance"])))
    if not rows:
        raise ConfigError(f"{path}: no distance rows", key="input")
    radii = np.array(sorted({r for r, _, _ in rows}))
    repeats = max(m for _, m, _ in rows) + 1
    dist = np.full((repeats, radii.size), np.nan)
    index = {r: i for i, r in enumerate(radii)}
    for r, m, v in rows:
        dist[m, index[r]] = v
    if np.isnan(dist).any():
        raise ShapeError(f"{path}: distance table has missing (repeat, radius) cells")
    return radii, dist


def _box_plots(result, out: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    radii = list(result.config.radii)
    labels = [f"{r:g}" for r in radii]
    paths = []
    for name, data, ylabel in (
        ("boxes.svg", result.distances, "KS distance"),
        ("logboxes.svg", np.log(np.where(result.distances > 0, result.distances, np.nan)), "log KS distance"),
    ):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.boxplot([col[~np.isnan(col)] for col in data.T], tick_labels=labels)
        ax.set_xlabel("r")
        ax.set_ylabel(ylabel)
        ax.set_title(f"{result.config.surface}, {result.config.weight}")
        fig.tight_layout()
        fig.savefig(out / name)
        plt.close(fig)
        paths.append(out / name)
    return paths
