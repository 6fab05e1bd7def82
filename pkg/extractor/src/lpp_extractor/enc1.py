"""Minimal ENC1 container writer.

The analysis pipeline ingests matrices in the ENC1 layout (magic "ENC1",
little-endian u32 header length, UTF-8 JSON {"dtype","shape","order"},
row-major IEEE-754 little-endian payload). This module re-implements just the
writer so the extractor stays decoupled from the analysis package; the
pipeline's own loaders are the compatibility oracle in the tests.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"ENC1"
_DTYPE_NAMES = {np.dtype("float32"): "f32", np.dtype("float64"): "f64"}
_WIRE = {"f32": "<f4", "f64": "<f8"}


def write_matrix(m: np.ndarray, path) -> None:
    m = np.asarray(m)
    if m.dtype not in _DTYPE_NAMES:
        raise ValueError(f"unsupported dtype {m.dtype}; expected float32 or float64")
    if m.ndim == 0 or any(d < 1 for d in m.shape):
        raise ValueError(f"invalid shape {m.shape}")
    name = _DTYPE_NAMES[m.dtype]
    header = json.dumps({"dtype": name, "shape": list(m.shape), "order": "row-major"},
                        sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(np.ascontiguousarray(m).astype(_WIRE[name], copy=False).tobytes())
