"""Checkpoint container: magic, u64-LE header length, JSON header, raw f32 blobs.

The header carries the architecture descriptor, a parameter manifest
(name/shape/byte offset), an optimizer-state manifest, and training
provenance. Arrays are stored 32-bit little-endian in manifest order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CanonicalFormatError, ValidationError
from .models import descriptor_from_dict

CHECKPOINT_MAGIC = b"RFCKPT1\n"


@dataclass
class Checkpoint:
    descriptor: object
    params: dict[str, np.ndarray]
    opt_state: dict[str, np.ndarray] | None
    opt_step: int
    provenance: dict = field(default_factory=dict)

    def encoder_params(self) -> dict[str, np.ndarray]:
        return {k: v for k, v in self.params.items() if k.startswith("enc.")}

    def probe_arrays(self):
        if "probe.w" not in self.params:
            return None
        return self.params["probe.w"], self.params["probe.b"]


def _manifest(arrays: dict[str, np.ndarray], start: int):
    entries = []
    offset = start
    for name, arr in arrays.items():
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size * 4
    return entries, offset


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    opt = ckpt.opt_state or {}
    param_manifest, offset = _manifest(ckpt.params, 0)
    opt_manifest, _ = _manifest(opt, offset)
    header = {
        "arch": ckpt.descriptor.to_dict(),
        "params": param_manifest,
        "opt_state": opt_manifest,
        "opt_step": ckpt.opt_step,
        "provenance": ckpt.provenance,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for arr in ckpt.params.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
        for arr in opt.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_section(body: bytes, manifest, path) -> dict[str, np.ndarray]:
    arrays: dict[str, np.ndarray] = {}
    for entry in manifest:
        shape = tuple(int(s) for s in entry["shape"])
        size = int(np.prod(shape)) if shape else 1
        start = int(entry["offset"])
        stop = start + size * 4
        if stop > len(body):
            raise CanonicalFormatError(
                "truncated_body", f"{path}: array {entry['name']} extends past end of file"
            )
        arr = np.frombuffer(body[start:stop], dtype="<f4").reshape(shape).copy()
        arrays[entry["name"]] = arr
    return arrays


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise CanonicalFormatError("bad_magic", f"{path}: not a checkpoint file")
        raw = fh.read(8)
        if len(raw) != 8:
            raise CanonicalFormatError("bad_header", f"{path}: missing header length")
        (hlen,) = struct.unpack("<Q", raw)
        blob = fh.read(hlen)
        if len(blob) != hlen:
            raise CanonicalFormatError("bad_header", f"{path}: truncated header")
        try:
            header = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CanonicalFormatError("bad_header", f"{path}: header is not JSON: {exc}")
        body = fh.read()
    try:
        descriptor = descriptor_from_dict(header["arch"])
        params = _read_section(body, header["params"], path)
        opt = _read_section(body, header["opt_state"], path)
        ckpt = Checkpoint(
            descriptor=descriptor,
            params=params,
            opt_state=opt or None,
            opt_step=int(header.get("opt_step", 0)),
            provenance=dict(header.get("provenance", {})),
        )
    except KeyError as exc:
        raise CanonicalFormatError("bad_header", f"{path}: missing header field {exc}")
    for name, arr in ckpt.params.items():
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"{path}: parameter {name} contains non-finite values")
    return ckpt
