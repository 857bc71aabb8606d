"""Transductive 1NN evaluation over repeated random splits.

Embeddings are computed once on all samples (labels never enter the fit);
each repeat only changes which samples lend their labels to the classifier.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .dataio import MultiViewDataset, make_split, normalize_views
from .errors import ArgumentError, MvLpeError
from .kernels import graph_laplacian, similarity_matrix
from .lpe import Embedding, embed_structure
from .model import MvLpeConfig, fit, prepare_views, resolve_threads

__all__ = [
    "ExperimentReport",
    "one_nn_classify",
    "accuracy",
    "loo_accuracy",
    "baseline_embeddings",
    "run_experiment",
    "METHODS",
]

log = logging.getLogger(__name__)

METHODS = ("mvlpe", "ble", "cle")


@dataclass
class ExperimentReport:
    method: str
    dims: int
    repeats: int
    accuracies: list
    seeds: list
    mean_acc: float
    max_acc: float
    failures: int = 0
    errors: list = field(default_factory=list)
    per_view_weights_summary: list | None = None
    selected_views: list | None = None
    wallclock_seconds: float = 0.0

    @property
    def partial(self) -> bool:
        return self.failures > 0

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["method", "dims", "repeat", "seed", "accuracy"])
        for r, (seed, acc) in enumerate(zip(self.seeds, self.accuracies)):
            cell = "failed" if acc is None else f"{acc:.4f}"
            writer.writerow([self.method, self.dims, r, seed, cell])
        return buf.getvalue()

    def summary_line(self) -> str:
        return f"MEAN={self.mean_acc:.4f} MAX={self.max_acc:.4f}"


def one_nn_classify(embedding, train_indices, train_labels, test_indices) -> np.ndarray:
    """Label of the Euclidean-nearest training column for every test column.

    Distance ties go to the training sample listed first in ``train_indices``
    after sorting by index.
    """
    E = np.asarray(embedding.U if isinstance(embedding, Embedding) else embedding, dtype=float)
    if E.ndim == 1:
        E = E[None, :]
    train = np.asarray(train_indices, dtype=np.int64)
    labels = np.asarray(train_labels)
    test = np.asarray(test_indices, dtype=np.int64)
    if train.size == 0:
        raise ArgumentError("1NN needs at least one training sample")
    if labels.shape[0] != train.size:
        raise ArgumentError("train_labels must align with train_indices")
    if np.intersect1d(train, test).size:
        raise ArgumentError("train and test indices overlap")
    order = np.argsort(train, kind="stable")
    train, labels = train[order], labels[order]
    if test.size == 0:
        return labels[:0]
    D = cdist(E[:, test].T, E[:, train].T, "sqeuclidean")
    return labels[np.argmin(D, axis=1)]


def accuracy(pred, truth) -> float:
    pred, truth = np.asarray(pred), np.asarray(truth)
    return float(np.mean(pred == truth)) if truth.size else float("nan")


def loo_accuracy(embedding, indices, labels) -> float:
    """Leave-one-out 1NN accuracy restricted to ``indices``."""
    E = np.asarray(embedding.U if isinstance(embedding, Embedding) else embedding, dtype=float)
    idx = np.sort(np.asarray(indices, dtype=np.int64))
    if idx.size < 2:
        raise ArgumentError("leave-one-out needs at least two samples")
    y = np.asarray(labels)[idx]
    D = cdist(E[:, idx].T, E[:, idx].T, "sqeuclidean")
    np.fill_diagonal(D, np.inf)
    return accuracy(y[np.argmin(D, axis=1)], y)


def _le_embedding(X, d, config) -> Embedding:
    L = graph_laplacian(similarity_matrix(X, config.view_kernel))
    return embed_structure(L, d, "direct")


def _single_view_embeddings(dataset, d, config, threads):
    data = normalize_views(dataset, config.normalize)
    if config.baseline_engine == "le":
        return [_le_embedding(X, d, config) for X in data.views]
    states = prepare_views(data, config, threads)
    return [embed_structure(st.Q, d, "direct") for st in states]


def _concat_embedding(dataset, d, config, threads):
    data = normalize_views(dataset, config.normalize)
    stacked = MultiViewDataset((np.vstack(data.views),), data.labels)
    if config.baseline_engine == "le":
        return _le_embedding(stacked.views[0], d, config)
    (st,) = prepare_views(stacked, config, threads)
    return embed_structure(st.Q, d, "direct")


def baseline_embeddings(dataset: MultiViewDataset, d: int, config: MvLpeConfig | None = None,
                        train_indices=None, threads: int | None = None) -> dict:
    """Best-single-view (``ble``) and concatenated-view (``cle``) direct embeddings.

    ``ble`` is the view whose leave-one-out 1NN accuracy over ``train_indices``
    (all samples when omitted) is highest; ties keep the lower view index.
    The returned dict also carries ``ble_view`` and ``view_embeddings``.
    """
    config = config or MvLpeConfig()
    threads = resolve_threads(threads)
    singles = _single_view_embeddings(dataset, d, config, threads)
    cle = _concat_embedding(dataset, d, config, threads)
    train = np.arange(dataset.n_samples) if train_indices is None else np.asarray(train_indices)
    best = _select_view(singles, train, dataset.labels)
    return {"ble": singles[best], "cle": cle, "ble_view": best, "view_embeddings": singles}


def _select_view(embeddings, train, labels) -> int:
    scores = [loo_accuracy(e, train, labels) for e in embeddings]
    return int(np.argmax(scores))


def run_experiment(dataset: MultiViewDataset, method: str, config: MvLpeConfig | None = None,
                   repeats: int = 20, fraction: float = 0.5, base_seed: int = 0,
                   threads: int | None = None) -> ExperimentReport:
    """Repeated-split 1NN accuracy of one method; repeat ``r`` uses seed ``base_seed + r``.

    The transductive fit does not depend on the split, so it is computed once
    and shared by all repeats.  A fit failure marks every repeat as failed.
    """
    if method not in METHODS:
        raise ArgumentError(f"method must be one of {METHODS}, got {method!r}")
    if repeats < 1:
        raise ArgumentError(f"repeats must be >= 1, got {repeats}")
    if not (0.0 < fraction < 1.0):
        raise ArgumentError(f"fraction must lie in (0, 1), got {fraction}")
    config = config or MvLpeConfig()
    threads = resolve_threads(threads)
    d = config.centroid_dim()
    start = time.perf_counter()
    seeds = [base_seed + r for r in range(repeats)]
    splits = [make_split(dataset.n_samples, fraction, s) for s in seeds]

    errors: list[str] = []
    weights_summary = None
    selected = None
    try:
        if method == "mvlpe":
            model = fit(dataset, config, threads)
            embeddings = [model.U_star] * repeats
            weights_summary = model.weights.w.tolist()
        elif method == "cle":
            embeddings = [_concat_embedding(dataset, d, config, threads).U] * repeats
        else:
            singles = _single_view_embeddings(dataset, d, config, threads)
            selected = [_select_view(singles, sp.train_indices, dataset.labels) for sp in splits]
            embeddings = [singles[v].U for v in selected]
    except MvLpeError as exc:
        log.warning("%s fit failed: %s", method, exc)
        errors.append(str(exc))
        embeddings = [None] * repeats

    accs = []
    for E, sp in zip(embeddings, splits):
        if E is None:
            accs.append(None)
            continue
        pred = one_nn_classify(E, sp.train_indices, dataset.labels[sp.train_indices], sp.test_indices)
        accs.append(accuracy(pred, dataset.labels[sp.test_indices]))

    ok = [a for a in accs if a is not None]
    return ExperimentReport(
        method=method,
        dims=d,
        repeats=repeats,
        accuracies=accs,
        seeds=seeds,
        mean_acc=float(np.mean(ok)) if ok else float("nan"),
        max_acc=float(np.max(ok)) if ok else float("nan"),
        failures=repeats - len(ok),
        errors=errors,
        per_view_weights_summary=weights_summary,
        selected_views=selected,
        wallclock_seconds=time.perf_counter() - start,
    )
