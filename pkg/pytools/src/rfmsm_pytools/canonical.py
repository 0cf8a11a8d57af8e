"""Writer for the canonical dataset file format.

These tools talk to the main toolkit only through its file formats, so the
byte layout is spelled out here: magic ``RFMSM1\\n``, u64-LE header length,
UTF-8 JSON header with keys {num_frames, frame_len, n_cls, t_res_us,
snr_grid, class_names, has_labels}, float32-LE frames laid out
[frame][channel: I then Q][sample], then int16-LE (class_id, snr_db) pairs
when labeled.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"RFMSM1\n"


def write_canonical(path, frames: np.ndarray, labels, n_cls: int, t_res_us: float,
                    class_names: list[str]) -> None:
    frames = np.asarray(frames, dtype=np.float32)
    if frames.ndim != 3 or frames.shape[1] != 2:
        raise ValueError("frames must have shape [n, 2, frame_len]")
    labels = None if labels is None else np.asarray(labels, dtype=np.int16)
    if labels is not None and labels.shape != (frames.shape[0], 2):
        raise ValueError("labels must have shape [n, 2]")
    snr_grid = (
        sorted(int(s) for s in np.unique(labels[:, 1])) if labels is not None else [0]
    )
    header = {
        "num_frames": int(frames.shape[0]),
        "frame_len": int(frames.shape[2]),
        "n_cls": int(n_cls),
        "t_res_us": float(t_res_us),
        "snr_grid": snr_grid,
        "class_names": list(class_names),
        "has_labels": labels is not None,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(frames, dtype="<f4").tobytes())
        if labels is not None:
            fh.write(np.ascontiguousarray(labels, dtype="<i2").tobytes())


def read_embeddings(path):
    """Embedding export layout: u32 rows, u32 dim, f32 rows, i16 labels,
    i16 snr_db, f64 explained-variance ratios."""
    with open(path, "rb") as fh:
        raw = fh.read(8)
        if len(raw) != 8:
            raise ValueError(f"{path}: truncated embedding file")
        n, dim = struct.unpack("<II", raw)
        rows = np.frombuffer(fh.read(n * dim * 4), dtype="<f4")
        labels = np.frombuffer(fh.read(n * 2), dtype="<i2")
        snrs = np.frombuffer(fh.read(n * 2), dtype="<i2")
        ratios = np.frombuffer(fh.read(dim * 8), dtype="<f8")
    if rows.size != n * dim or labels.size != n or snrs.size != n or ratios.size != dim:
        raise ValueError(f"{path}: truncated embedding file")
    return rows.reshape(n, dim).copy(), labels.copy(), snrs.copy(), ratios.copy()
