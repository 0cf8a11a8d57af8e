"""t-SNE rendering of PCA-reduced encoder embeddings."""

from __future__ import annotations

import numpy as np

from .canonical import read_embeddings


def tsne_coords(rows: np.ndarray, perplexity: float, seed: int) -> np.ndarray:
    from sklearn.manifold import TSNE

    perplexity = min(perplexity, (rows.shape[0] - 1) / 3.0)
    tsne = TSNE(
        n_components=2,
        perplexity=perplexity,
        random_state=seed,
        init="pca",
        n_jobs=1,
    )
    return tsne.fit_transform(rows.astype(np.float64))


def render_tsne(
    embedding_path,
    out_path,
    perplexity: float = 30.0,
    seed: int = 0,
    snr_floor: int | None = None,
    dump_xy=None,
):
    """Scatter the 2D t-SNE projection colored by class; returns (xy, labels).

    With ``snr_floor`` set, only rows with snr_db strictly above the floor
    are embedded and drawn.
    """
    rows, labels, snrs, _ = read_embeddings(embedding_path)
    if rows.shape[0] == 0:
        raise ValueError(f"{embedding_path}: no embedding rows")
    if snr_floor is not None:
        keep = snrs > snr_floor
        rows, labels, snrs = rows[keep], labels[keep], snrs[keep]
        if rows.shape[0] == 0:
            raise ValueError(f"no rows above snr floor {snr_floor}")
    xy = tsne_coords(rows, perplexity, seed)

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 5), dpi=120)
    for cls in np.unique(labels):
        sel = labels == cls
        ax.scatter(xy[sel, 0], xy[sel, 1], s=6, label=f"class {int(cls)}", alpha=0.7)
    ax.set_title("t-SNE of encoder embeddings")
    ax.legend(markerscale=2, fontsize=8)
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    if dump_xy is not None:
        np.savez(dump_xy, xy=xy, labels=labels, snrs=snrs)
    return xy, labels
