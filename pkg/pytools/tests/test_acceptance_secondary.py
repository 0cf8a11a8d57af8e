"""Secondary acceptance criteria: converter fixtures and t-SNE sanity.

These tests exercise the integration contract with the main toolkit: every
converted file must pass the primary loader's full validation.
"""

import numpy as np
import pytest

from conftest import (
    deepradar_fixture,
    radarcomm_fixture,
    radchar_fixture,
    radioml_fixture,
    write_embedding_file,
)
from rfmsm_pytools.convert import ConverterManifest, convert
from rfmsm_pytools.tsne import render_tsne


def test_ac10_converter_fixtures(tmp_path):
    from rfmsm.fewshot import load_canonical

    fixtures = {
        "radioml-hdf5": (radioml_fixture, "radioml.h5", 48, 1024, 24),
        "deepradar": (deepradar_fixture, "deepradar.npz", 40, 1024, 23),
        "radarcomm": (radarcomm_fixture, "radarcomm.npz", 36, 128, 6),
        "radchar-hdf5": (radchar_fixture, "radchar.h5", 30, 512, 5),
    }
    for fmt, (builder, fname, n, length, n_cls) in fixtures.items():
        src = tmp_path / fname
        builder(src)
        out = tmp_path / f"{fmt}.rfm"
        convert(ConverterManifest(fmt, str(src), str(out)))
        ds = load_canonical(out)  # primary validation: magic, header, labels
        assert len(ds) == n
        assert ds.meta.frame_len == length
        assert ds.meta.n_cls == n_cls
        assert ds.has_labels

    # 10% subsampling yields exact expected counts
    src = tmp_path / "big.npz"
    rng = np.random.default_rng(1)
    np.savez(
        src,
        X=rng.standard_normal((1000, 2, 64)).astype(np.float32),
        y=np.repeat(np.arange(10), 100),
        snr=np.zeros(1000, dtype=np.int64),
    )
    out = tmp_path / "big.rfm"
    convert(ConverterManifest("deepradar", str(src), str(out), subsample=0.1, seed=7))
    sub = load_canonical(out)
    assert len(sub) == 100
    counts = np.bincount(sub.class_ids(), minlength=10)
    assert set(counts.tolist()) == {10}
    print("AC-10 PASS (4 fixture formats validated by primary loader; 10% -> 100 frames)")


def test_ac11_tsne_sanity(tmp_path):
    from sklearn.metrics import silhouette_score

    rng = np.random.default_rng(11)
    centers = rng.standard_normal((3, 50)) * 12.0
    rows, labels, snrs = [], [], []
    for k in range(3):
        rows.append(centers[k] + rng.standard_normal((50, 50)))
        labels += [k] * 50
        snrs += list(rng.choice([-10, -5, 0, 5, 10], 50))
    rows = np.concatenate(rows).astype(np.float32)
    labels = np.array(labels, dtype=np.int16)
    snrs = np.array(snrs, dtype=np.int16)

    path = tmp_path / "emb.bin"
    write_embedding_file(path, rows, labels, snrs)

    xy, got_labels = render_tsne(path, tmp_path / "all.png", perplexity=25, seed=2)
    score = silhouette_score(xy, got_labels)
    assert score > 0.5, f"silhouette {score:.3f}"

    xy_f, _ = render_tsne(path, tmp_path / "hi.png", perplexity=25, seed=2, snr_floor=0)
    assert xy_f.shape[0] == int((snrs > 0).sum())
    print(f"AC-11 PASS (silhouette {score:.3f}; snr floor removes snr<=0 rows exactly)")
