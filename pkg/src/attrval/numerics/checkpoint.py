"""Single-file checkpoints: header line, JSON manifest, raw little-endian buffers."""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"GENTOC-CKPT-1\n"


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, kind: str, config: dict, params: dict[str, np.ndarray], extra: dict | None = None) -> Path:
    path = Path(path)
    names = list(params)
    if len(set(names)) != len(names):
        raise CheckpointError("duplicate parameter names")
    entries = []
    for n in names:
        arr = np.asarray(params[n])
        entries.append({"name": n, "shape": list(arr.shape), "dtype": arr.dtype.newbyteorder("<").str})
    manifest = {"kind": kind, "config": config, "params": entries, "extra": extra or {}}
    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        for n, e in zip(names, entries):
            f.write(np.ascontiguousarray(params[n], dtype=np.dtype(e["dtype"])).tobytes())
    return path


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise CheckpointError(f"{path}: not a checkpoint (bad header)")
    off = len(MAGIC)
    (n,) = struct.unpack_from("<Q", raw, off)
    off += 8
    manifest = json.loads(raw[off:off + n].decode("utf-8"))
    off += n
    params = {}
    for e in manifest["params"]:
        dt = np.dtype(e["dtype"])
        count = int(np.prod(e["shape"])) if e["shape"] else 1
        size = count * dt.itemsize
        if off + size > len(raw):
            raise CheckpointError(f"{path}: truncated buffer for {e['name']}")
        params[e["name"]] = np.frombuffer(raw, dtype=dt, count=count, offset=off).reshape(e["shape"]).astype(dt.newbyteorder("="))
        off += size
    if off != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - off} trailing bytes")
    return manifest, params
