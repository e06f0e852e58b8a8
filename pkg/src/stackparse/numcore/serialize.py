"""Parameter serialization: a UTF-8 manifest plus a flat binary blob.

Manifest lines are `name shape dtype offset`, where `shape` is
comma-separated dimensions (`-` for scalars), dtype is float64/float32,
and offset is the byte position in the blob.  Blob values are
little-endian, row-major.  Round trips are bit-exact.
"""

from __future__ import annotations

import numpy as np

_DTYPE_CODES = {"float64": "<f8", "float32": "<f4"}


def params_to_manifest_blob(params: dict[str, np.ndarray]) -> tuple[str, bytes]:
    lines = []
    chunks = []
    offset = 0
    for name, arr in params.items():
        if " " in name or "\n" in name:
            raise ValueError(f"parameter name {name!r} may not contain whitespace")
        arr = np.asarray(arr)  # tobytes(order="C") handles non-contiguous input
        dtype_name = arr.dtype.name
        if dtype_name not in _DTYPE_CODES:
            raise ValueError(f"unsupported dtype {dtype_name} for {name!r}")
        raw = arr.astype(_DTYPE_CODES[dtype_name], copy=False).tobytes(order="C")
        shape = ",".join(str(d) for d in arr.shape) if arr.ndim else "-"
        lines.append(f"{name} {shape} {dtype_name} {offset}")
        chunks.append(raw)
        offset += len(raw)
    return "\n".join(lines) + ("\n" if lines else ""), b"".join(chunks)


def manifest_blob_to_params(manifest: str, blob: bytes) -> dict[str, np.ndarray]:
    params: dict[str, np.ndarray] = {}
    for line in manifest.splitlines():
        line = line.strip()
        if not line:
            continue
        name, shape_text, dtype_name, offset_text = line.split(" ")
        shape = () if shape_text == "-" else tuple(int(d) for d in shape_text.split(","))
        code = _DTYPE_CODES[dtype_name]
        count = int(np.prod(shape)) if shape else 1
        offset = int(offset_text)
        arr = np.frombuffer(blob, dtype=code, count=count, offset=offset).reshape(shape)
        params[name] = arr.astype(dtype_name, copy=True)
    return params


def save_params(path: str, params: dict[str, np.ndarray]) -> None:
    """Write `<path>.manifest` and `<path>.bin` next to each other."""
    manifest, blob = params_to_manifest_blob(params)
    with open(f"{path}.manifest", "w", encoding="utf-8") as f:
        f.write(manifest)
    with open(f"{path}.bin", "wb") as f:
        f.write(blob)


def load_params(path: str) -> dict[str, np.ndarray]:
    with open(f"{path}.manifest", encoding="utf-8") as f:
        manifest = f.read()
    with open(f"{path}.bin", "rb") as f:
        blob = f.read()
    return manifest_blob_to_params(manifest, blob)
