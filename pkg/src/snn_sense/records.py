"""On-disk artifacts: trajectory CSV, ensemble archives, run manifests and JSON-lines reports.

Every writer is deterministic: identical inputs give identical bytes.
"""

import csv
import io
import json
import math
import os
import platform
import zipfile

import numba
import numpy as np

from . import __version__
from .measurements import EnsembleKind, GroundTruth, MeasurementEnsemble
from .rng import PRNG_ALGORITHM
from .trajectory import COLUMNS, Trajectory, TrajectoryRow

ENSEMBLE_FORMAT_VERSION = 1
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format(float(value), ".17g")


def trajectory_lines(traj):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in traj.rows:
        writer.writerow([_fmt(v) for v in row.values()])
    return buf.getvalue()


def _atomic_write(path, data):
    tmp = f"{path}.tmp"
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
        fh.write(data)
    os.replace(tmp, path)


def write_trajectory_csv(traj, path):
    """Header plus one line per row, floats at 17 significant digits, empty cells for missing values."""
    _atomic_write(path, trajectory_lines(traj))


def _parse(cell, kind=float):
    return None if cell == "" else kind(cell)


def read_trajectory_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        traj = Trajectory()
        for line in reader:
            if len(line) != len(COLUMNS):
                raise ValueError(f"{path}: row has {len(line)} cells, expected {len(COLUMNS)}")
            v = [_parse(c) for c in line]
            traj.append(
                TrajectoryRow(int(line[0]), v[1], v[2], v[3], (v[4], v[5], v[6]), v[7], v[8], v[9], v[10])
            )
    return traj


def _npz_bytes(arrays):
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_STORED) as zf:
        for name in sorted(arrays):
            payload = io.BytesIO()
            np.lib.format.write_array(payload, np.asarray(arrays[name]), allow_pickle=False)
            zf.writestr(zipfile.ZipInfo(f"{name}.npy", date_time=_ZIP_EPOCH), payload.getvalue())
    return buf.getvalue()


def save_ensemble(ens, path):
    """Store an ensemble (and its target, if any) as a byte-reproducible ``.npz``."""
    arrays = {
        "format_version": np.array(ENSEMBLE_FORMAT_VERSION),
        "kind": np.array(ens.kind.value),
        "a": ens.a,
        "y": ens.y,
        "noise_std": np.array(ens.noise_std),
        "metadata": np.array(json.dumps(_jsonable(ens.metadata), sort_keys=True)),
    }
    for name in ("phi", "psi", "b", "sigma_star"):
        if getattr(ens, name) is not None:
            arrays[name] = getattr(ens, name)
    if ens.target is not None:
        arrays["x_star"] = ens.target.x_star
        arrays["normalization"] = np.array(ens.target.normalization)
        arrays["shift"] = np.array(ens.target.shift)
    _atomic_write(path, _npz_bytes(arrays))


def load_ensemble(path):
    with np.load(path, allow_pickle=False) as z:
        version = int(z["format_version"])
        if version != ENSEMBLE_FORMAT_VERSION:
            raise ValueError(f"{path}: ensemble format {version}, expected {ENSEMBLE_FORMAT_VERSION}")

        def get(key):
            return z[key] if key in z.files else None

        target = None
        if "x_star" in z.files:
            target = GroundTruth(z["x_star"], float(z["normalization"]), float(z["shift"]))
        return MeasurementEnsemble(
            a=z["a"],
            y=z["y"],
            kind=EnsembleKind(str(z["kind"])),
            phi=get("phi"),
            psi=get("psi"),
            b=get("b"),
            sigma_star=get("sigma_star"),
            target=target,
            noise_std=float(z["noise_std"]),
            metadata=json.loads(str(z["metadata"])),
        )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def dumps_record(record):
    """One JSON line; non-finite floats become the strings ``"inf"``, ``"-inf"``, ``"nan"``."""
    return json.dumps(_jsonable(record), sort_keys=True, allow_nan=False)


def write_jsonl(records, path):
    _atomic_write(path, "".join(dumps_record(r) + "\n" for r in records))


def read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def versions():
    return {
        "snn_sense": __version__,
        "numpy": np.__version__,
        "numba": numba.__version__,
        "python": platform.python_version(),
    }


def write_manifest(cfg, path, files=()):
    manifest = {
        "config_sha256": cfg.digest(),
        "config": cfg.to_dict(),
        "versions": versions(),
        "prng": PRNG_ALGORITHM,
        "files": sorted(files),
    }
    _atomic_write(path, json.dumps(_jsonable(manifest), sort_keys=True, indent=2) + "\n")
    return manifest
