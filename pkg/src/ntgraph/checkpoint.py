"""Parameter checkpoints: one binary blob.

Layout: the 4-byte magic ``NTCK``, a little-endian uint64 header length, a
UTF-8 JSON header, then each array's little-endian bytes back to back in
header order. The header holds ``{"dtype", "params": [{"name", "shape"}],
"meta": {...}}``.
"""

import json
import struct

import numpy as np

from .errors import ParseError

MAGIC = b"NTCK"


def save_checkpoint(path, arrays, meta=None, dtype="float64"):
    dt = np.dtype(dtype).newbyteorder("<")
    names = list(arrays)
    header = {
        "dtype": np.dtype(dtype).name,
        "params": [{"name": n, "shape": list(np.shape(arrays[n]))} for n in names],
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(arrays[n], dtype=dt).tobytes())


def load_checkpoint(path):
    """Return ``(arrays, meta)`` with arrays in native byte order."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise ParseError(f"{path}: not a checkpoint (bad magic)")
    (hlen,) = struct.unpack("<Q", raw[4:12])
    header = json.loads(raw[12:12 + hlen].decode("utf-8"))
    dt = np.dtype(header["dtype"]).newbyteorder("<")
    offset = 12 + hlen
    arrays = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * dt.itemsize
        if offset + nbytes > len(raw):
            raise ParseError(f"{path}: truncated data for {entry['name']}")
        arr = np.frombuffer(raw, dtype=dt, count=count, offset=offset).reshape(shape)
        arrays[entry["name"]] = arr.astype(dt.newbyteorder("="))
        offset += nbytes
    return arrays, header.get("meta", {})
