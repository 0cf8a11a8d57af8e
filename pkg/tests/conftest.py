import numpy as np
import pytest
from threadpoolctl import threadpool_limits

from rfmsm.iqcore import DatasetMeta, SignalDataset


@pytest.fixture(autouse=True, scope="session")
def single_threaded_blas():
    # 2-thread BLAS on shared vCPUs stalls on barriers; tests also rely on
    # bit-reproducible numerics
    with threadpool_limits(limits=1):
        yield


def make_meta(n_cls=2, frame_len=8, snr_grid=(0,), name="test"):
    return DatasetMeta(
        name=name,
        n_cls=n_cls,
        t_res_us=0.3,
        frame_len=frame_len,
        snr_grid=tuple(snr_grid),
        class_names=tuple(f"class_{i}" for i in range(n_cls)),
    )


def make_dataset(x, labels=None, **meta_kwargs):
    x = np.asarray(x, dtype=np.float32)
    meta_kwargs.setdefault("frame_len", x.shape[2])
    return SignalDataset(x, labels, make_meta(**meta_kwargs))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
