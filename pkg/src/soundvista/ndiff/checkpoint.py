"""Checkpoint persistence: JSON manifest + one little-endian raw tensor blob."""

from __future__ import annotations

import json
import os

import numpy as np

_DTYPES = {"float32": "<f4", "float64": "<f8"}


def save_checkpoint(path_base: str, groups: dict[str, dict[str, np.ndarray]], tag: str, extra: dict | None = None) -> str:
    """Write `<path_base>.json` and `<path_base>.bin`; returns the manifest path."""
    entries = []
    blobs = []
    offset = 0
    for group_name in sorted(groups):
        group = groups[group_name]
        for name in sorted(group):
            arr = np.ascontiguousarray(group[name])
            dtype = "float64" if arr.dtype == np.float64 else "float32"
            raw = arr.astype(_DTYPES[dtype]).tobytes()
            entries.append(
                {
                    "name": f"{group_name}/{name}",
                    "shape": list(arr.shape),
                    "dtype": dtype,
                    "offset": offset,
                    "nbytes": len(raw),
                }
            )
            blobs.append(raw)
            offset += len(raw)
    manifest = {"tag": tag, "extra": extra or {}, "tensors": entries}
    os.makedirs(os.path.dirname(os.path.abspath(path_base)), exist_ok=True)
    with open(path_base + ".json", "w") as f:
        json.dump(manifest, f, indent=1)
    with open(path_base + ".bin", "wb") as f:
        f.write(b"".join(blobs))
    return path_base + ".json"


def load_checkpoint(path_base: str) -> tuple[dict[str, dict[str, np.ndarray]], dict]:
    """Read groups of named arrays plus the manifest written by save_checkpoint."""
    if path_base.endswith(".json"):
        path_base = path_base[: -len(".json")]
    with open(path_base + ".json") as f:
        manifest = json.load(f)
    with open(path_base + ".bin", "rb") as f:
        blob = f.read()
    groups: dict[str, dict[str, np.ndarray]] = {}
    for entry in manifest["tensors"]:
        group_name, name = entry["name"].split("/", 1)
        raw = blob[entry["offset"] : entry["offset"] + entry["nbytes"]]
        arr = np.frombuffer(raw, dtype=_DTYPES[entry["dtype"]]).reshape(entry["shape"]).copy()
        groups.setdefault(group_name, {})[name] = arr
    return groups, manifest
