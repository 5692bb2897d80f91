"""File formats: GridField binaries, ledger CSVs, extension slabs and manifests.

GridField binary: a magic line ``DRIFTLAB-GRIDFIELD 1``, one JSON header line
(``d``, ``N``, ``L``, ``time_tag``, ``dtype``) and the little-endian float64
values in C order. Extension slabs use the same layout with magic
``DRIFTLAB-EXTENSION 1`` and the extra header keys ``z_levels`` and ``s``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .grid import Grid, GridField

GRIDFIELD_MAGIC = b"DRIFTLAB-GRIDFIELD 1\n"
EXTENSION_MAGIC = b"DRIFTLAB-EXTENSION 1\n"
MANIFEST_SCHEMA = 1


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def write_gridfield(path, f: GridField) -> Path:
    path = Path(path)
    header = {"d": f.grid.d, "N": f.grid.N, "L": f.grid.L, "time_tag": f.time_tag, "dtype": "<f8"}
    with open(path, "wb") as fh:
        fh.write(GRIDFIELD_MAGIC)
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
    return path


def read_gridfield(path) -> GridField:
    with open(path, "rb") as fh:
        if fh.readline() != GRIDFIELD_MAGIC:
            raise ValueError(f"{path} is not a GridField file")
        header = json.loads(fh.readline())
        data = np.frombuffer(fh.read(), dtype=header["dtype"]).astype(float)
    grid = Grid(header["d"], header["N"], header["L"])
    return GridField(grid, data.reshape(grid.shape), header["time_tag"])


def write_extension(path, ext) -> Path:
    path = Path(path)
    g = ext.grid
    header = {"d": g.d, "N": g.N, "L": g.L, "s": ext.s, "z_levels": ext.zgrid.z_levels.tolist(), "dtype": "<f8"}
    with open(path, "wb") as fh:
        fh.write(EXTENSION_MAGIC)
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        fh.write(np.ascontiguousarray(ext.values, dtype="<f8").tobytes())
    return path


def read_extension(path) -> tuple:
    """Header dictionary and value array of shape ``(M, *grid)``."""
    with open(path, "rb") as fh:
        if fh.readline() != EXTENSION_MAGIC:
            raise ValueError(f"{path} is not an extension file")
        header = json.loads(fh.readline())
        data = np.frombuffer(fh.read(), dtype=header["dtype"]).astype(float)
    shape = (len(header["z_levels"]),) + (header["N"],) * header["d"]
    return header, data.reshape(shape)


def write_extension_slices(directory, ext) -> list:
    """One CSV per z level with columns ``x[len]`` (and ``y[len]``) and ``u[u]``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    coords = [c.reshape(-1) for c in ext.grid.mesh()]
    names = ["x[len]", "y[len]"][: ext.grid.d] + ["u[u]"]
    paths = []
    for j, z in enumerate(ext.zgrid.z_levels):
        p = directory / f"slice_{j:03d}.csv"
        write_csv(p, names, zip(*coords, ext.values[j].reshape(-1)), comment=f"z = {z!r}")
        paths.append(p)
    return paths


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], comment: Optional[str] = None) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def read_csv(path) -> tuple:
    """Header names with unit annotations stripped, and the numeric rows."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = [h.split("[")[0] for h in next(reader)]
    rows = [[float(v) for v in r] for r in reader if r]
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


def write_ledger(path, ledger) -> Path:
    from .solver import LEDGER_COLUMNS, LEDGER_UNITS
    header = [f"{c}[{u}]" for c, u in zip(LEDGER_COLUMNS, LEDGER_UNITS)]
    return write_csv(path, header, ledger.rows)


def write_json_line(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def build_manifest(config: dict, outputs: Sequence, root, seed: int, calibration: dict, extra: Optional[dict] = None) -> dict:
    """Manifest with the resolved config, platform and output hashes (no timestamps)."""
    from . import __version__
    root = Path(root)
    inventory = {str(Path(p).relative_to(root)): file_sha256(p) for p in sorted(outputs, key=str)}
    man = {
        "schema": MANIFEST_SCHEMA,
        "tool_version": __version__,
        "platform": {"python": platform.python_version(), "machine": platform.machine(),
                     "system": platform.system(), "numpy": np.__version__},
        "seed": int(seed),
        "config": config,
        "outputs": inventory,
        "calibration": calibration,
    }
    if extra:
        man.update(extra)
    return man


def write_manifest(path, manifest: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(manifest, sort_keys=True, indent=1, default=_json_default) + "\n")
    return path


def manifest_hash(path) -> str:
    return file_sha256(path)


def verify_manifest(path) -> list:
    """Names of outputs whose file is missing or whose hash differs."""
    path = Path(path)
    man = json.loads(path.read_text())
    bad = []
    for name, digest in man["outputs"].items():
        p = path.parent / name
        if not p.exists() or file_sha256(p) != digest:
            bad.append(name)
    return bad
