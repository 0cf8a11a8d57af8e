"""Converters from public RF dataset releases into the canonical format.

Each converter documents the release layout it targets; minor schema drift
(different frame counts or lengths than the published tables) produces a
warning and proceeds with the actual shapes, since public releases are not
versioned. Subsampling is stratified by class with largest-remainder
apportionment, so the total count is exactly round(fraction * n) and each
per-class share stays within one frame of proportional.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .canonical import write_canonical

logger = logging.getLogger("rfmsm_pytools.convert")

FORMATS = ("radioml-hdf5", "deepradar", "radarcomm", "radchar-hdf5")

# published summary: (frame_len, n_cls, t_res_us)
EXPECTED = {
    "radioml-hdf5": (1024, 24, 1.0),
    "deepradar": (1024, 23, 0.01),
    "radarcomm": (128, 6, 0.1),
    "radchar-hdf5": (512, 5, 0.3),
}


@dataclass(frozen=True)
class ConverterManifest:
    source_format: str
    input_path: str
    output_path: str
    subsample: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.source_format not in FORMATS:
            raise ValueError(
                f"unknown format id {self.source_format!r}, expected one of {FORMATS}"
            )
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError("subsample fraction must lie in (0, 1]")


def _complex_to_channels(iq: np.ndarray) -> np.ndarray:
    return np.stack([iq.real, iq.imag], axis=1).astype(np.float32)


def _load_radioml(path):
    """RadioML 2018.01A layout: HDF5 datasets X [n,1024,2] float32,
    Y [n,24] one-hot, Z [n,1] integer SNR."""
    import h5py

    with h5py.File(path, "r") as fh:
        x = np.asarray(fh["X"])
        y = np.asarray(fh["Y"])
        z = np.asarray(fh["Z"]).reshape(-1)
    frames = np.ascontiguousarray(x.transpose(0, 2, 1)).astype(np.float32)
    class_ids = y.argmax(axis=1).astype(np.int16)
    return frames, class_ids, z.astype(np.int16), y.shape[1]


def _load_deepradar(path):
    """DeepRadar serialized-array release: NPZ with X [n,2,1024] float32,
    y [n] class index, snr [n] integer dB."""
    with np.load(path) as blob:
        frames = np.asarray(blob["X"], dtype=np.float32)
        class_ids = np.asarray(blob["y"], dtype=np.int16)
        snrs = np.asarray(blob["snr"], dtype=np.int16)
    return frames, class_ids, snrs, int(class_ids.max()) + 1


def _load_radarcomm(path):
    """RadarComm serialized-array release: NPZ with iq [n,128] complex64,
    labels [n] class index, snr [n] integer dB."""
    with np.load(path) as blob:
        iq = np.asarray(blob["iq"])
        class_ids = np.asarray(blob["labels"], dtype=np.int16)
        snrs = np.asarray(blob["snr"], dtype=np.int16)
    return _complex_to_channels(iq), class_ids, snrs, int(class_ids.max()) + 1


def _load_radchar(path):
    """RadChar release: HDF5 with iq [n,512] complex and labels [n,6] float
    columns (class_id, snr_db, n_pulses, pulse_width_us, pri_us, t0_us)."""
    import h5py

    with h5py.File(path, "r") as fh:
        iq = np.asarray(fh["iq"])
        labels = np.asarray(fh["labels"])
    class_ids = labels[:, 0].astype(np.int16)
    snrs = np.round(labels[:, 1]).astype(np.int16)
    return _complex_to_channels(iq), class_ids, snrs, int(class_ids.max()) + 1


_LOADERS = {
    "radioml-hdf5": _load_radioml,
    "deepradar": _load_deepradar,
    "radarcomm": _load_radarcomm,
    "radchar-hdf5": _load_radchar,
}


def stratified_subsample(class_ids: np.ndarray, fraction: float, seed: int) -> np.ndarray:
    """Indices of a per-class proportional draw totaling round(fraction * n)."""
    n = class_ids.shape[0]
    want_total = int(round(fraction * n))
    classes = np.unique(class_ids)
    base, remainders = {}, {}
    for c in classes:
        exact = fraction * int((class_ids == c).sum())
        base[c] = int(np.floor(exact))
        remainders[c] = exact - base[c]
    short = want_total - sum(base.values())
    for c in sorted(classes, key=lambda c: (-remainders[c], c))[:short]:
        base[c] += 1
    rng = np.random.default_rng(seed)
    picks = []
    for c in classes:
        members = np.flatnonzero(class_ids == c)
        take = min(base[c], members.size)
        picks.append(np.sort(members[rng.choice(members.size, take, replace=False)]))
    return np.concatenate(picks)


def convert(manifest: ConverterManifest) -> dict:
    """Run one conversion; returns a summary of what was written."""
    frames, class_ids, snrs, n_cls = _LOADERS[manifest.source_format](manifest.input_path)
    want_len, want_cls, t_res_us = EXPECTED[manifest.source_format]
    if frames.shape[2] != want_len or n_cls != want_cls:
        logger.warning(
            "%s: shapes differ from the published summary "
            "(frame_len %d vs %d, n_cls %d vs %d); proceeding with actual shapes",
            manifest.input_path, frames.shape[2], want_len, n_cls, want_cls,
        )
    if manifest.subsample < 1.0:
        keep = stratified_subsample(class_ids, manifest.subsample, manifest.seed)
        frames, class_ids, snrs = frames[keep], class_ids[keep], snrs[keep]
    labels = np.stack([class_ids, snrs], axis=1).astype(np.int16)
    class_names = [f"class_{k:02d}" for k in range(n_cls)]
    write_canonical(
        manifest.output_path, frames, labels, n_cls, t_res_us, class_names
    )
    return {
        "frames": int(frames.shape[0]),
        "frame_len": int(frames.shape[2]),
        "n_cls": int(n_cls),
        "t_res_us": t_res_us,
        "output": str(manifest.output_path),
    }
