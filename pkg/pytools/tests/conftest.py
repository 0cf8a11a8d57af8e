import numpy as np
import pytest


def radioml_fixture(path, n=48, n_cls=24, length=1024, seed=0):
    """Miniature file in the RadioML 2018 HDF5 layout (X, one-hot Y, Z)."""
    import h5py

    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, length, 2)).astype(np.float32)
    classes = rng.integers(0, n_cls, n)
    y = np.zeros((n, n_cls), dtype=np.int64)
    y[np.arange(n), classes] = 1
    z = rng.choice(np.arange(-20, 32, 2), size=(n, 1)).astype(np.int64)
    with h5py.File(path, "w") as fh:
        fh["X"] = x
        fh["Y"] = y
        fh["Z"] = z
    return x, classes, z.reshape(-1)


def deepradar_fixture(path, n=40, n_cls=23, length=1024, seed=1):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 2, length)).astype(np.float32)
    y = rng.integers(0, n_cls, n)
    if n >= n_cls:
        y[:n_cls] = np.arange(n_cls)  # every class represented
    snr = rng.integers(-10, 11, n)
    np.savez(path, X=x, y=y, snr=snr)
    return x, y, snr


def radarcomm_fixture(path, n=36, n_cls=6, length=128, seed=2):
    rng = np.random.default_rng(seed)
    iq = (rng.standard_normal((n, length)) + 1j * rng.standard_normal((n, length))).astype(
        np.complex64
    )
    labels = rng.integers(0, n_cls, n)
    labels[:n_cls] = np.arange(n_cls)
    snr = rng.integers(-6, 7, n)
    np.savez(path, iq=iq, labels=labels, snr=snr)
    return iq, labels, snr


def radchar_fixture(path, n=30, n_cls=5, length=512, seed=3):
    """Miniature file in the targeted RadChar HDF5 layout (iq, labels)."""
    import h5py

    rng = np.random.default_rng(seed)
    iq = (rng.standard_normal((n, length)) + 1j * rng.standard_normal((n, length))).astype(
        np.complex64
    )
    class_ids = rng.integers(0, n_cls, n)
    class_ids[:n_cls] = np.arange(n_cls)
    snrs = rng.integers(-20, 21, n)
    labels = np.zeros((n, 6), dtype=np.float32)
    labels[:, 0] = class_ids
    labels[:, 1] = snrs
    labels[:, 2] = rng.integers(2, 7, n)       # n_pulses
    labels[:, 3] = rng.uniform(10, 16, n)      # pulse width us
    labels[:, 4] = rng.uniform(17, 23, n)      # pri us
    labels[:, 5] = rng.uniform(0, 20, n)       # t0 us
    with h5py.File(path, "w") as fh:
        fh["iq"] = iq
        fh["labels"] = labels
    return iq, class_ids, snrs


def write_embedding_file(path, rows, labels, snrs, ratios=None):
    """Embedding export layout shared with the main toolkit."""
    import struct

    rows = np.asarray(rows, dtype="<f4")
    n, dim = rows.shape
    if ratios is None:
        ratios = np.linspace(0.5, 0.01, dim)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", n, dim))
        fh.write(np.ascontiguousarray(rows).tobytes())
        fh.write(np.asarray(labels, dtype="<i2").tobytes())
        fh.write(np.asarray(snrs, dtype="<i2").tobytes())
        fh.write(np.asarray(ratios, dtype="<f8").tobytes())


@pytest.fixture
def rng():
    return np.random.default_rng(99)
