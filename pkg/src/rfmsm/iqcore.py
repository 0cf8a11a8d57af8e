"""Core I/Q domain types, standardization, dataset splitting, and canonical file I/O.

Frames are stored channel-first: a dataset holds one float32 array of shape
``[n_frames, 2, frame_len]`` with channel 0 = I and channel 1 = Q. All
operations here are pure functions; returned objects never alias mutable
state of their inputs' owners.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import CanonicalFormatError, ValidationError

CANONICAL_MAGIC = b"RFMSM1\n"

_HEADER_KEYS = {
    "num_frames",
    "frame_len",
    "n_cls",
    "t_res_us",
    "snr_grid",
    "class_names",
    "has_labels",
}


@dataclass(frozen=True)
class IQFrame:
    """One fixed-length baseband signal as paired I and Q sample vectors."""

    i: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        i = np.asarray(self.i)
        q = np.asarray(self.q)
        if i.ndim != 1 or q.ndim != 1:
            raise ValidationError("IQFrame channels must be 1-D")
        if i.shape != q.shape:
            raise ValidationError(
                f"channel length mismatch: I has {i.shape[0]}, Q has {q.shape[0]}"
            )
        if i.shape[0] < 1:
            raise ValidationError("IQFrame must contain at least one sample")
        if not (np.all(np.isfinite(i)) and np.all(np.isfinite(q))):
            raise ValidationError("IQFrame samples must be finite")
        object.__setattr__(self, "i", i)
        object.__setattr__(self, "q", q)

    def __len__(self) -> int:
        return self.i.shape[0]

    def stacked(self) -> np.ndarray:
        """Return the frame as a [2, L] array (I first)."""
        return np.stack([self.i, self.q])

    @classmethod
    def from_stacked(cls, arr: np.ndarray) -> "IQFrame":
        return cls(arr[0], arr[1])


@dataclass(frozen=True)
class FrameLabel:
    class_id: int
    snr_db: int


@dataclass(frozen=True)
class DatasetMeta:
    name: str
    n_cls: int
    t_res_us: float
    frame_len: int
    snr_grid: tuple[int, ...]
    class_names: tuple[str, ...]

    def __post_init__(self):
        grid = tuple(int(s) for s in self.snr_grid)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValidationError("snr_grid must be strictly increasing")
        names = tuple(str(n) for n in self.class_names)
        if len(names) != self.n_cls:
            raise ValidationError(
                f"class_names has {len(names)} entries for n_cls={self.n_cls}"
            )
        if self.frame_len < 1:
            raise ValidationError("frame_len must be >= 1")
        object.__setattr__(self, "snr_grid", grid)
        object.__setattr__(self, "class_names", names)


class SignalDataset:
    """Frames plus optional labels and metadata.

    ``labels`` is either None (unlabeled corpus) or an int16 array of shape
    [n_frames, 2] holding (class_id, snr_db) pairs. ``stable_ids`` keeps a
    content-independent identity per frame so that subsetting and n-shot
    sampling are stable under reordering.
    """

    def __init__(self, x: np.ndarray, labels, meta: DatasetMeta, stable_ids=None):
        x = np.asarray(x)
        if x.ndim != 3 or x.shape[1] != 2:
            raise ValidationError("frames array must have shape [n, 2, frame_len]")
        if x.shape[2] != meta.frame_len:
            raise ValidationError(
                f"frames have length {x.shape[2]}, meta declares {meta.frame_len}"
            )
        if not np.all(np.isfinite(x)):
            raise ValidationError("dataset contains non-finite samples")
        if labels is not None:
            labels = np.asarray(labels, dtype=np.int16)
            if labels.ndim != 2 or labels.shape[1] != 2:
                raise ValidationError("labels array must have shape [n, 2]")
            if labels.shape[0] != x.shape[0]:
                raise ValidationError(
                    f"{labels.shape[0]} labels for {x.shape[0]} frames"
                )
            grid = set(meta.snr_grid)
            cls = labels[:, 0]
            if cls.size and (cls.min() < 0 or cls.max() >= meta.n_cls):
                raise ValidationError("class_id out of range for declared n_cls")
            if any(int(s) not in grid for s in np.unique(labels[:, 1])):
                raise ValidationError("snr_db label outside declared snr_grid")
        if stable_ids is None:
            stable_ids = np.arange(x.shape[0], dtype=np.int64)
        else:
            stable_ids = np.asarray(stable_ids, dtype=np.int64)
            if stable_ids.shape != (x.shape[0],):
                raise ValidationError("stable_ids must have one entry per frame")
        self.x = x
        self.labels = labels
        self.meta = meta
        self.stable_ids = stable_ids

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    @property
    def frame_len(self) -> int:
        return self.meta.frame_len

    def frame(self, idx: int) -> IQFrame:
        return IQFrame(self.x[idx, 0], self.x[idx, 1])

    def label(self, idx: int) -> FrameLabel:
        if self.labels is None:
            raise ValidationError("dataset is unlabeled")
        return FrameLabel(int(self.labels[idx, 0]), int(self.labels[idx, 1]))

    def class_ids(self) -> np.ndarray:
        if self.labels is None:
            raise ValidationError("dataset is unlabeled")
        return self.labels[:, 0]

    def snr_dbs(self) -> np.ndarray:
        if self.labels is None:
            raise ValidationError("dataset is unlabeled")
        return self.labels[:, 1]

    def subset(self, indices) -> "SignalDataset":
        indices = np.asarray(indices, dtype=np.int64)
        labels = None if self.labels is None else self.labels[indices]
        return SignalDataset(
            self.x[indices], labels, self.meta, self.stable_ids[indices]
        )

    def with_name(self, name: str) -> "SignalDataset":
        return SignalDataset(
            self.x, self.labels, replace(self.meta, name=name), self.stable_ids
        )


@dataclass(frozen=True)
class StandardizationStats:
    """Per-channel population mean/variance of a training corpus."""

    mean_i: float
    mean_q: float
    var_i: float
    var_q: float

    def __post_init__(self):
        if not (self.var_i > 0 and self.var_q > 0):
            raise ValidationError("degenerate variance: var_i and var_q must be > 0")

    def to_dict(self) -> dict:
        return {
            "mean_i": self.mean_i,
            "mean_q": self.mean_q,
            "var_i": self.var_i,
            "var_q": self.var_q,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizationStats":
        return cls(
            float(d["mean_i"]), float(d["mean_q"]), float(d["var_i"]), float(d["var_q"])
        )


def compute_stats(dataset: SignalDataset) -> StandardizationStats:
    """Per-channel population mean/variance over all samples of all frames."""
    if len(dataset) == 0:
        raise ValidationError("empty corpus")
    x = dataset.x.astype(np.float64, copy=False)
    mean = x.mean(axis=(0, 2))
    var = x.var(axis=(0, 2))
    if var[0] == 0.0 or var[1] == 0.0:
        raise ValidationError("degenerate variance: a channel is constant")
    return StandardizationStats(float(mean[0]), float(mean[1]), float(var[0]), float(var[1]))


def standardize(frame: IQFrame, stats: StandardizationStats) -> IQFrame:
    """Transform each channel x -> (x - mean) / sqrt(var)."""
    si = np.sqrt(stats.var_i)
    sq = np.sqrt(stats.var_q)
    return IQFrame((frame.i - stats.mean_i) / si, (frame.q - stats.mean_q) / sq)


def destandardize(frame: IQFrame, stats: StandardizationStats) -> IQFrame:
    """Inverse of :func:`standardize` for the same stats."""
    si = np.sqrt(stats.var_i)
    sq = np.sqrt(stats.var_q)
    return IQFrame(frame.i * si + stats.mean_i, frame.q * sq + stats.mean_q)


def standardize_array(x: np.ndarray, stats: StandardizationStats) -> np.ndarray:
    """Vectorized standardization of an [n, 2, L] array (returns same dtype)."""
    mean = np.array([stats.mean_i, stats.mean_q], dtype=x.dtype).reshape(1, 2, 1)
    scale = np.array(
        [1.0 / np.sqrt(stats.var_i), 1.0 / np.sqrt(stats.var_q)], dtype=x.dtype
    ).reshape(1, 2, 1)
    return (x - mean) * scale


def standardize_dataset(ds: SignalDataset, stats: StandardizationStats) -> SignalDataset:
    return SignalDataset(
        standardize_array(ds.x, stats), ds.labels, ds.meta, ds.stable_ids
    )


def _fisher_yates(n: int, rng: np.random.Generator) -> np.ndarray:
    idx = np.arange(n, dtype=np.int64)
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        idx[i], idx[j] = idx[j], idx[i]
    return idx


def split_70_20_10(dataset: SignalDataset, seed: int):
    """Deterministic 70-20-10 partition: sizes floor(.7N), floor(.2N), remainder."""
    n = len(dataset)
    if n < 10:
        raise ValidationError(f"dataset too small to split: {n} < 10 frames")
    perm = _fisher_yates(n, np.random.default_rng(seed))
    n_train = (7 * n) // 10
    n_val = (2 * n) // 10
    train = dataset.subset(perm[:n_train])
    val = dataset.subset(perm[n_train : n_train + n_val])
    test = dataset.subset(perm[n_train + n_val :])
    return train, val, test


# ---------------------------------------------------------------------------
# Canonical dataset file: magic, u64-LE header length, JSON header, f32 body,
# optional int16 (class_id, snr_db) pairs.
# ---------------------------------------------------------------------------


def write_canonical(dataset: SignalDataset, path) -> None:
    meta = dataset.meta
    header = {
        "num_frames": len(dataset),
        "frame_len": meta.frame_len,
        "n_cls": meta.n_cls,
        "t_res_us": meta.t_res_us,
        "snr_grid": list(meta.snr_grid),
        "class_names": list(meta.class_names),
        "has_labels": dataset.has_labels,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CANONICAL_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(dataset.x, dtype="<f4").tobytes())
        if dataset.has_labels:
            fh.write(np.ascontiguousarray(dataset.labels, dtype="<i2").tobytes())


def read_canonical(path) -> SignalDataset:
    with open(path, "rb") as fh:
        magic = fh.read(len(CANONICAL_MAGIC))
        if magic != CANONICAL_MAGIC:
            raise CanonicalFormatError("bad_magic", f"{path}: not a canonical dataset file")
        raw_len = fh.read(8)
        if len(raw_len) != 8:
            raise CanonicalFormatError("bad_header", f"{path}: missing header length")
        (header_len,) = struct.unpack("<Q", raw_len)
        blob = fh.read(header_len)
        if len(blob) != header_len:
            raise CanonicalFormatError("bad_header", f"{path}: truncated header")
        try:
            header = json.loads(blob.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CanonicalFormatError("bad_header", f"{path}: header is not JSON: {exc}")
        if not isinstance(header, dict) or set(header) != _HEADER_KEYS:
            raise CanonicalFormatError(
                "bad_header",
                f"{path}: header keys {sorted(header) if isinstance(header, dict) else header} "
                f"do not match {sorted(_HEADER_KEYS)}",
            )
        n = int(header["num_frames"])
        frame_len = int(header["frame_len"])
        if n < 0 or frame_len < 1:
            raise CanonicalFormatError("bad_header", f"{path}: invalid frame counts")
        body_bytes = n * 2 * frame_len * 4
        body = fh.read(body_bytes)
        if len(body) != body_bytes:
            raise CanonicalFormatError(
                "truncated_body",
                f"{path}: body has {len(body)} bytes, expected {body_bytes}",
            )
        x = np.frombuffer(body, dtype="<f4").reshape(n, 2, frame_len)
        labels = None
        if header["has_labels"]:
            label_bytes = n * 4
            raw = fh.read(label_bytes)
            if len(raw) != label_bytes:
                raise CanonicalFormatError(
                    "label_mismatch",
                    f"{path}: label block has {len(raw)} bytes, expected {label_bytes}",
                )
            labels = np.frombuffer(raw, dtype="<i2").reshape(n, 2)
        if fh.read(1):
            raise CanonicalFormatError("trailing_data", f"{path}: trailing bytes after body")

    import os

    meta = DatasetMeta(
        name=os.path.splitext(os.path.basename(str(path)))[0],
        n_cls=int(header["n_cls"]),
        t_res_us=float(header["t_res_us"]),
        frame_len=frame_len,
        snr_grid=tuple(int(s) for s in header["snr_grid"]),
        class_names=tuple(header["class_names"]),
    )
    try:
        return SignalDataset(x.copy(), None if labels is None else labels.copy(), meta)
    except ValidationError as exc:
        raise CanonicalFormatError("invalid_labels", f"{path}: {exc}")
