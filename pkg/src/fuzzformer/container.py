"""Self-describing array archive used for checkpoints and dataset caches.

Byte layout (see docs/checkpoint_format.md):

* line 1: ``FUZZFORMER-ARCHIVE <version>``
* line 2: canonical JSON metadata (sorted keys, compact separators)
* line 3: integer count M of arrays
* M manifest lines: ``<name> <dim0> <dim1> ...`` (bare name for scalars)
* separator line ``---``
* M payloads: raw little-endian float64 values in C order, concatenated
  in manifest order.

All text is UTF-8 with ``\n`` endings; writes are byte-deterministic for
identical inputs.
"""

import json

import numpy as np

from .exceptions import DataError

MAGIC = "FUZZFORMER-ARCHIVE"
VERSION = 1


def write_archive(path, meta: dict, arrays) -> None:
    """arrays: ordered (name, ndarray) pairs; values stored as float64."""
    arrays = [(name, np.asarray(arr, dtype=np.float64)) for name, arr in arrays]
    lines = [f"{MAGIC} {VERSION}", json.dumps(meta, sort_keys=True, separators=(",", ":"))]
    lines.append(str(len(arrays)))
    for name, arr in arrays:
        if not name or any(ch.isspace() for ch in name):
            raise DataError(f"invalid archive entry name: {name!r}")
        lines.append(" ".join([name] + [str(d) for d in arr.shape]))
    lines.append("---")
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("utf-8"))
        for _, arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_archive(path):
    """Returns (meta, dict of name -> ndarray in manifest order)."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read archive {path}: {exc}") from exc
    sep = b"\n---\n"
    head_end = blob.find(sep)
    if head_end < 0:
        raise DataError(f"{path}: missing archive separator (not an archive file?)")
    header_lines = blob[:head_end].decode("utf-8").split("\n")
    if len(header_lines) < 3:
        raise DataError(f"{path}: truncated archive header")
    magic = header_lines[0].split()
    if len(magic) != 2 or magic[0] != MAGIC:
        raise DataError(f"{path}: bad magic line {header_lines[0]!r}")
    if int(magic[1]) != VERSION:
        raise DataError(f"{path}: unsupported archive version {magic[1]}")
    try:
        meta = json.loads(header_lines[1])
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: bad metadata line: {exc}") from exc
    count = int(header_lines[2])
    manifest = header_lines[3 : 3 + count]
    if len(manifest) != count:
        raise DataError(f"{path}: manifest lists {len(manifest)} of {count} arrays")
    arrays = {}
    offset = head_end + len(sep)
    for line in manifest:
        parts = line.split()
        name, dims = parts[0], tuple(int(d) for d in parts[1:])
        size = int(np.prod(dims)) if dims else 1
        nbytes = 8 * size
        chunk = blob[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise DataError(f"{path}: truncated payload for {name}")
        arr = np.frombuffer(chunk, dtype="<f8").astype(np.float64).reshape(dims)
        arrays[name] = arr
        offset += nbytes
    if offset != len(blob):
        raise DataError(f"{path}: {len(blob) - offset} trailing bytes after payloads")
    return meta, arrays
