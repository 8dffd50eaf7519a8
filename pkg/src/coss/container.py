"""A tiny deterministic array container.

Both checkpoints and dataset artifacts need byte-identical output for
identical inputs, which rules out zip-based formats (member timestamps).
Layout:

    magic   8 bytes  b"COSSBIN1"
    hlen    8 bytes  little-endian uint64, length of the JSON header
    header  hlen bytes of UTF-8 JSON:
              {"meta": {...}, "entries": [{"name", "dtype", "shape", "offset", "nbytes"}, ...]}
    blob    concatenated array bytes, little-endian, in entry order

Entry names are sorted and the header is serialized with sorted keys, so the
bytes are a pure function of (meta, arrays).
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"COSSBIN1"
_ALLOWED_DTYPES = {"<f8", "<f4", "<i8", "<i4", "|i1", "|b1"}


def _canon_dtype(arr: np.ndarray) -> str:
    dt = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
    s = dt.str
    if s in ("|i1", "|b1"):
        return s
    if s not in _ALLOWED_DTYPES:
        raise DataError(f"dtype {arr.dtype} not supported by the container format")
    return s


def pack(meta: dict, arrays: dict[str, np.ndarray]) -> bytes:
    """Serialize to deterministic bytes; arrays keyed by unique names."""
    entries = []
    blobs = []
    offset = 0
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        dts = _canon_dtype(arr)
        raw = arr.astype(dts, copy=False).tobytes()
        entries.append(
            {"name": name, "dtype": dts, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)}
        )
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"meta": meta, "entries": entries}, sort_keys=True).encode("utf-8")
    return MAGIC + len(header).to_bytes(8, "little") + header + b"".join(blobs)


def unpack(buf: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if buf[:8] != MAGIC:
        raise DataError("not a coss container (bad magic)")
    hlen = int.from_bytes(buf[8:16], "little")
    try:
        header = json.loads(buf[16 : 16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataError(f"corrupt container header: {e}") from e
    blob = buf[16 + hlen :]
    arrays = {}
    for ent in header["entries"]:
        raw = blob[ent["offset"] : ent["offset"] + ent["nbytes"]]
        if len(raw) != ent["nbytes"]:
            raise DataError(f"container truncated at entry {ent['name']!r}")
        arrays[ent["name"]] = np.frombuffer(raw, dtype=ent["dtype"]).reshape(ent["shape"]).copy()
    return header["meta"], arrays


def write(path, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    Path(path).write_bytes(pack(meta, arrays))


def read(path) -> tuple[dict, dict[str, np.ndarray]]:
    return unpack(Path(path).read_bytes())
