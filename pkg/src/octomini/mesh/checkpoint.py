"""Checkpoint I/O.

Binary layout (little-endian):

    magic   4 bytes  b"OMCK"
    version u32      currently 1
    hlen    u32      length of the JSON header that follows
    header  hlen bytes of UTF-8 JSON:
            {"n": int, "width": float, "boundary": str,
             "time": float, "step": int, "extra": {...}}
    nleaf   u64
    per leaf:
        plen  u16            octant-path length
        path  plen bytes     one octant index (0-7) per byte
        data  6 * n^3 * 8 bytes, float64, fields in order
              (rho, sx, sy, sz, egas, tau), cells in x-fastest order

Reading a file written by `write` reproduces the tree bit-for-bit.
"""

import json
import struct

import numpy as np

from ..errors import CheckpointError
from ..geometry import NFIELDS
from .tree import Octree

MAGIC = b"OMCK"
VERSION = 1


def write(tree, path, time=0.0, step=0, extra=None):
    leaves = tree.sorted_leaves()
    header = {
        "n": tree.n,
        "width": tree.width,
        "boundary": tree.boundary,
        "time": float(time),
        "step": int(step),
        "extra": extra or {},
    }
    hbytes = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(hbytes)))
        fh.write(hbytes)
        fh.write(struct.pack("<Q", len(leaves)))
        for leaf in leaves:
            fh.write(struct.pack("<H", len(leaf.path)))
            fh.write(bytes(leaf.path))
            # x varies fastest on disk
            data = np.ascontiguousarray(leaf.subgrid.interior.transpose(0, 3, 2, 1))
            fh.write(data.tobytes())


def read(path):
    """Rebuild the tree from a checkpoint.  Returns (tree, header dict)."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read {path}: {exc}") from exc
    try:
        if raw[:4] != MAGIC:
            raise CheckpointError("bad magic, not a checkpoint file")
        version, hlen = struct.unpack_from("<II", raw, 4)
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        off = 12
        header = json.loads(raw[off : off + hlen].decode())
        off += hlen
        (nleaf,) = struct.unpack_from("<Q", raw, off)
        off += 8
        n = header["n"]
        tree = Octree(n, header["width"], header["boundary"])
        blob = n**3 * NFIELDS * 8
        payload = []
        for _ in range(nleaf):
            (plen,) = struct.unpack_from("<H", raw, off)
            off += 2
            pth = tuple(raw[off : off + plen])
            off += plen
            if off + blob > len(raw):
                raise CheckpointError("truncated checkpoint payload")
            arr = np.frombuffer(raw[off : off + blob], dtype="<f8").reshape(
                NFIELDS, n, n, n
            )
            off += blob
            payload.append((pth, arr))
        if off != len(raw):
            raise CheckpointError("trailing bytes after checkpoint payload")
    except (struct.error, IndexError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint: {exc}") from exc

    # grow the topology, then fill state
    for pth, _ in payload:
        node = tree.root
        for k in pth:
            if node.is_leaf:
                tree.split(node)
            node = node.children[k]
    tree.reindex()
    want = {pth for pth, _ in payload}
    have = {leaf.path for leaf in tree.leaves()}
    if want != have:
        raise CheckpointError("leaf set in file does not form a complete octree")
    for pth, arr in payload:
        node = tree.root
        for k in pth:
            node = node.children[k]
        node.subgrid.interior[:] = arr.transpose(0, 3, 2, 1)
    return tree, header
