"""Checkpoint serialization.

Little-endian binary layout (all integers unsigned):

    offset  field
    0       magic   4 bytes  b"NRDF"
    4       version u16      currently 1
    6       kind    u8       1 = radiance-distribution net, 2 = direct-rgb
                             baseline, 3 = point-query teacher
    7       dtype   u8       bytes per scalar: 4 (float32) or 8 (float64)
    8       pe_frequencies   u32
    12      sh_degree        u32
    16      n_points         u32
    20      include_raw      u8
    21      scene_radius     f64
    29      t_near           f64
    37      t_far            f64
    45      n_layers         u32  (count of weight matrices)
    49      widths           u32 * (n_layers + 1)
    ...     skips            u8  * (n_layers - 1)
    ...     payload          per layer: W row-major (fan_in*fan_out), then b

Writes are atomic (temp file + rename) so an aborted run never leaves a
partial checkpoint behind.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass

import numpy as np

from .encoding import EncodingConfig
from .errors import FormatError
from .nn import MLPParams

MAGIC = b"NRDF"
VERSION = 1
_KINDS = {"nerdf": 1, "nelf": 2, "micronerf": 3}
_KIND_NAMES = {v: k for k, v in _KINDS.items()}
_HEADER = struct.Struct("<4sHBBIIIBdddI")


@dataclass
class Checkpoint:
    kind: str
    params: MLPParams
    enc: EncodingConfig
    t_near: float
    t_far: float

    @property
    def k(self) -> int:
        if self.kind != "nerdf":
            raise FormatError(f"K is only defined for distribution checkpoints, not {self.kind}")
        return self.params.output_dim // 8


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    if ckpt.kind not in _KINDS:
        raise FormatError(f"unknown checkpoint kind {ckpt.kind!r}")
    p = ckpt.params
    dtype = np.dtype(p.dtype)
    if dtype.itemsize not in (4, 8):
        raise FormatError(f"unsupported parameter dtype {dtype}")
    widths = p.widths
    blob = bytearray()
    blob += _HEADER.pack(
        MAGIC,
        VERSION,
        _KINDS[ckpt.kind],
        dtype.itemsize,
        ckpt.enc.pe_frequencies,
        ckpt.enc.sh_degree,
        ckpt.enc.n_points,
        int(ckpt.enc.include_raw),
        ckpt.enc.scene_radius,
        ckpt.t_near,
        ckpt.t_far,
        len(p.weights),
    )
    blob += struct.pack(f"<{len(widths)}I", *widths)
    blob += struct.pack(f"<{len(p.skips)}B", *[int(s) for s in p.skips])
    le = np.dtype(f"<f{dtype.itemsize}")
    for w, b in zip(p.weights, p.biases):
        blob += np.ascontiguousarray(w, dtype=le).tobytes()
        blob += np.ascontiguousarray(b, dtype=le).tobytes()
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(bytes(blob))
    os.replace(tmp, path)


def load_checkpoint(path) -> Checkpoint:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read checkpoint {path}: {exc}") from exc
    try:
        if len(data) < _HEADER.size:
            raise FormatError("checkpoint too short for a header")
        (magic, version, kind_id, itemsize, pe, sh, npts, raw_flag, radius, t_near, t_far, n_layers) = (
            _HEADER.unpack_from(data, 0)
        )
        if magic != MAGIC:
            raise FormatError(f"bad checkpoint magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        if kind_id not in _KIND_NAMES:
            raise FormatError(f"unknown checkpoint kind id {kind_id}")
        if itemsize not in (4, 8):
            raise FormatError(f"unsupported parameter width {itemsize}")
        pos = _HEADER.size
        widths = struct.unpack_from(f"<{n_layers + 1}I", data, pos)
        pos += 4 * (n_layers + 1)
        skips = struct.unpack_from(f"<{n_layers - 1}B", data, pos)
        pos += n_layers - 1
        le = np.dtype(f"<f{itemsize}")
        weights, biases = [], []
        for i in range(n_layers):
            wn = widths[i] * widths[i + 1]
            w = np.frombuffer(data, dtype=le, count=wn, offset=pos).reshape(widths[i], widths[i + 1])
            pos += wn * itemsize
            b = np.frombuffer(data, dtype=le, count=widths[i + 1], offset=pos)
            pos += widths[i + 1] * itemsize
            weights.append(w.astype(w.dtype.newbyteorder("=")))
            biases.append(b.astype(b.dtype.newbyteorder("=")))
        if pos != len(data):
            raise FormatError(f"checkpoint has {len(data) - pos} trailing bytes")
        params = MLPParams(weights, biases, tuple(bool(s) for s in skips))
        enc = EncodingConfig(
            pe_frequencies=pe, sh_degree=sh, n_points=npts, include_raw=bool(raw_flag), scene_radius=radius
        )
        kind = _KIND_NAMES[kind_id]
        ckpt = Checkpoint(kind, params, enc, t_near, t_far)
        expected_out = {"nelf": 3, "micronerf": 4}.get(kind)
        if expected_out is not None and params.output_dim != expected_out:
            raise FormatError(f"{kind} checkpoint must have {expected_out} outputs, found {params.output_dim}")
        if kind == "nerdf" and params.output_dim % 8 != 0:
            raise FormatError("distribution checkpoint output dim must be a multiple of 8")
        return ckpt
    except FormatError:
        raise
    except (struct.error, ValueError) as exc:
        raise FormatError(f"malformed checkpoint: {exc}") from exc


def checkpoint_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
