"""CFRM: uncompressed little-endian binary frames.

Layout::

    b"CFRM"  u32 version (=1)  u32 natoms
    per frame:  f64 time_ps  9 x f32 box (row-major, nm)  natoms*3 x f32 positions (nm)

No compression, no padding. A frame without a box is stored with an
all-zero box block.
"""

from __future__ import annotations

import struct

import numpy as np

from ..core import Box, Frame
from ..errors import FormatError

MAGIC = b"CFRM"
VERSION = 1
_HEADER = struct.Struct("<4sII")


def frame_size(natoms: int) -> int:
    return 8 + 36 + 12 * natoms


def write_cfrm(frames, natoms=None) -> bytes:
    frames = list(frames)
    if natoms is None:
        if not frames:
            raise FormatError("natoms is required when writing an empty frame list")
        natoms = frames[0].n_atoms
    parts = [_HEADER.pack(MAGIC, VERSION, natoms)]
    for k, f in enumerate(frames):
        if f.n_atoms != natoms:
            raise FormatError(f"frame {k} has {f.n_atoms} atoms, header says {natoms}")
        box = f.box.vectors if f.box is not None else np.zeros((3, 3))
        parts.append(struct.pack("<d", f.time))
        parts.append(np.asarray(box, dtype="<f4").tobytes())
        parts.append(np.asarray(f.positions, dtype="<f4").tobytes())
    return b"".join(parts)


def read_cfrm_header(data: bytes):
    if len(data) < _HEADER.size:
        raise FormatError(f"CFRM file truncated: {len(data)} bytes, header needs {_HEADER.size}")
    magic, version, natoms = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad CFRM magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported CFRM version {version} (expected {VERSION})")
    return natoms


def read_cfrm(data: bytes) -> list:
    data = bytes(data)
    natoms = read_cfrm_header(data)
    size = frame_size(natoms)
    body = len(data) - _HEADER.size
    if body % size:
        raise FormatError(f"CFRM file truncated: {body} payload bytes is not a whole number "
                          f"of {size}-byte frames")
    frames = []
    for k in range(body // size):
        off = _HEADER.size + k * size
        (time,) = struct.unpack_from("<d", data, off)
        box = np.frombuffer(data, dtype="<f4", count=9, offset=off + 8).astype(float).reshape(3, 3)
        pos = np.frombuffer(data, dtype="<f4", count=3 * natoms, offset=off + 44).astype(float)
        if not (np.all(np.isfinite(pos)) and np.isfinite(time)):
            raise FormatError(f"CFRM frame {k} holds non-finite values")
        try:
            frame_box = Box(box) if np.any(box) else None
        except FormatError as exc:
            raise FormatError(f"CFRM frame {k}: {exc}") from None
        frames.append(Frame(time, pos.reshape(natoms, 3), frame_box))
    return frames
