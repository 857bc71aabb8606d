"""Multi-view datasets: in-memory model, on-disk format, splits and synthetic fixtures.

Samples are matrix columns (view ``v`` is ``D_v x N``).  On disk each view is a
headerless CSV with one *row* per sample; the loader transposes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ArgumentError, DataError, LoadError, ShapeError

__all__ = [
    "MultiViewDataset",
    "SplitPlan",
    "load_dataset",
    "write_dataset",
    "make_split",
    "synth_multiview",
    "standard_fixture",
    "normalize_views",
]


def _frozen(a):
    # C order: BLAS reduction order (hence the last bits) depends on layout
    a = np.array(a, dtype=float, order="C", copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MultiViewDataset:
    """``m`` feature matrices over the same ``N`` samples plus dense integer labels.

    ``label_names[c]`` is the original label token that was re-indexed to ``c``.
    """

    views: tuple
    labels: np.ndarray
    view_names: tuple = ()
    label_names: tuple = ()

    def __post_init__(self):
        views = tuple(_frozen(v) for v in self.views)
        if len(views) < 1:
            raise ShapeError("dataset needs at least one view")
        for v, X in enumerate(views):
            if X.ndim != 2 or X.shape[0] < 1:
                raise ShapeError(f"view {v} must be a non-empty 2-D matrix, got shape {X.shape}")
        n = views[0].shape[1]
        for v, X in enumerate(views):
            if X.shape[1] != n:
                raise ShapeError(
                    f"view {v} has {X.shape[1]} samples (columns), expected {n}"
                )
            bad = np.argwhere(~np.isfinite(X))
            if bad.size:
                r, c = (int(i) for i in bad[0])
                raise DataError(f"non-finite value in view {v} at row {r}, col {c}")
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.shape[0] != n:
            raise ShapeError(f"expected {n} labels, got shape {labels.shape}")
        if not np.issubdtype(labels.dtype, np.integer):
            raise DataError("labels must be integers")
        labels = labels.astype(np.int64)
        if n and (labels.min() < 0):
            raise DataError("labels must be non-negative")
        n_classes = int(labels.max()) + 1 if n else 0
        if n and np.bincount(labels, minlength=n_classes).min() == 0:
            raise DataError("labels must be dense in [0, C): some class has no samples")
        labels = labels.copy()
        labels.setflags(write=False)

        names = tuple(self.view_names) or tuple(f"view{v + 1}" for v in range(len(views)))
        if len(names) != len(views):
            raise ShapeError("view_names length differs from number of views")
        lnames = tuple(self.label_names) or tuple(str(c) for c in range(n_classes))

        object.__setattr__(self, "views", views)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "view_names", names)
        object.__setattr__(self, "label_names", lnames)

    @property
    def n_samples(self) -> int:
        return self.views[0].shape[1]

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def dims(self) -> list[int]:
        return [X.shape[0] for X in self.views]

    def subset_views(self, idx: Sequence[int]) -> "MultiViewDataset":
        return MultiViewDataset(
            views=tuple(self.views[i] for i in idx),
            labels=self.labels,
            view_names=tuple(self.view_names[i] for i in idx),
            label_names=self.label_names,
        )

    def permute_samples(self, perm) -> "MultiViewDataset":
        perm = np.asarray(perm)
        return MultiViewDataset(
            views=tuple(X[:, perm] for X in self.views),
            labels=self.labels[perm],
            view_names=self.view_names,
            label_names=self.label_names,
        )


@dataclass(frozen=True)
class SplitPlan:
    train_indices: np.ndarray
    test_indices: np.ndarray
    seed: int
    fraction: float

    def __eq__(self, other):
        if not isinstance(other, SplitPlan):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.fraction == other.fraction
            and np.array_equal(self.train_indices, other.train_indices)
            and np.array_equal(self.test_indices, other.test_indices)
        )

    __hash__ = None


# --------------------------------------------------------------------------- io


def _parse_labels(path: Path) -> tuple[np.ndarray, tuple]:
    raw = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        tok = line.strip()
        if not tok:
            continue
        try:
            raw.append(int(tok))
        except ValueError:
            raise DataError(f"{path.name}: line {lineno}: label {tok!r} is not an integer") from None
    uniq = sorted(set(raw))
    remap = {lab: i for i, lab in enumerate(uniq)}
    return np.array([remap[r] for r in raw], dtype=np.int64), tuple(str(u) for u in uniq)


def _read_matrix(path: Path, view: int) -> np.ndarray:
    rows = []
    width = None
    for r, line in enumerate(path.read_text(encoding="utf-8").splitlines()):
        if not line.strip():
            continue
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise ShapeError(f"{path.name}: row {r} has {len(cells)} columns, expected {width}")
        vals = []
        for c, cell in enumerate(cells):
            try:
                x = float(cell)
            except ValueError:
                raise DataError(f"view {view}: unparseable value {cell!r} at row {r}, col {c}") from None
            if not math.isfinite(x):
                raise DataError(f"non-finite value in view {view} at row {r}, col {c}")
            vals.append(x)
        rows.append(vals)
    if not rows:
        raise ShapeError(f"{path.name}: empty view file")
    return np.array(rows, dtype=float)


def load_dataset(path) -> MultiViewDataset:
    """Load and validate a dataset directory (``meta.json`` + view CSVs + ``labels.csv``)."""
    root = Path(path)
    meta_path = root / "meta.json"
    if not meta_path.is_file():
        raise LoadError(f"missing file: {meta_path}", path=meta_path)
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{meta_path}: invalid JSON ({exc})") from None
    for key in ("views", "n_samples"):
        if key not in meta:
            raise DataError(f"{meta_path}: missing key {key!r}")
    labels_path = root / meta.get("labels", "labels.csv")
    if not labels_path.is_file():
        raise LoadError(f"missing file: {labels_path}", path=labels_path)

    views, names = [], []
    for v, spec in enumerate(meta["views"]):
        fpath = root / spec["file"]
        if not fpath.is_file():
            raise LoadError(f"missing file: {fpath}", path=fpath)
        X = _read_matrix(fpath, v)
        if "dim" in spec and X.shape[1] != int(spec["dim"]):
            raise ShapeError(f"view {v} ({fpath.name}): {X.shape[1]} features, meta says {spec['dim']}")
        views.append(X.T)
        names.append(spec.get("name", f"view{v + 1}"))

    n = int(meta["n_samples"])
    for v, X in enumerate(views):
        if X.shape[1] != n:
            raise ShapeError(f"view {v} has {X.shape[1]} samples, meta says n_samples={n}")
    labels, label_names = _parse_labels(labels_path)
    if labels.shape[0] != n:
        raise ShapeError(f"{labels_path.name} has {labels.shape[0]} labels, expected {n}")
    return MultiViewDataset(tuple(views), labels, tuple(names), label_names)


def write_dataset(dataset: MultiViewDataset, path) -> Path:
    """Write ``dataset`` in the directory format read by :func:`load_dataset`.

    Floats are written with ``repr`` so a re-read reproduces them bit for bit.
    """
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for v, (X, name) in enumerate(zip(dataset.views, dataset.view_names)):
        fname = f"view{v + 1}.csv"
        lines = [",".join(repr(float(x)) for x in row) for row in X.T]
        (root / fname).write_text("\n".join(lines) + "\n", encoding="utf-8")
        entries.append({"name": name, "file": fname, "dim": int(X.shape[0])})
    names = dataset.label_names
    try:
        out_labels = [int(names[c]) for c in dataset.labels]
    except (ValueError, IndexError):
        out_labels = [int(c) for c in dataset.labels]
    (root / "labels.csv").write_text("".join(f"{c}\n" for c in out_labels), encoding="utf-8")
    meta = {"views": entries, "n_samples": dataset.n_samples, "labels": "labels.csv"}
    (root / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return root


# ----------------------------------------------------------------------- splits


def make_split(n: int, fraction: float, seed: int) -> SplitPlan:
    """Random train/test partition of ``range(n)`` with ``round(fraction * n)`` training samples."""
    if not (0.0 < fraction < 1.0) or not math.isfinite(fraction):
        raise ArgumentError(f"fraction must lie in (0, 1), got {fraction}")
    if n < 2:
        raise ArgumentError(f"need n >= 2 samples to split, got {n}")
    n_train = int(round(fraction * n))
    n_train = min(max(n_train, 1), n - 1)
    rng = np.random.default_rng(np.uint64(seed % 2**64))
    perm = rng.permutation(n)
    return SplitPlan(
        train_indices=np.sort(perm[:n_train]),
        test_indices=np.sort(perm[n_train:]),
        seed=int(seed),
        fraction=float(fraction),
    )


# -------------------------------------------------------------------- synthetic


def synth_multiview(
    n_per_class: int,
    n_classes: int,
    view_specs: Sequence[tuple[int, float]],
    seed: int,
    latent_dim: int = 3,
    class_sep: float = 4.0,
    latent_spread: float = 0.5,
    layout: str = "random",
) -> MultiViewDataset:
    """Seeded multi-view data sharing one latent class structure.

    Class centroids live in a ``latent_dim`` space: Gaussian draws scaled by
    ``class_sep`` (``layout="random"``) or the scaled basis vectors
    ``class_sep * e_c``, all pairwise equidistant (``layout="simplex"``, needs
    ``latent_dim >= n_classes``).  Samples scatter around their centroid with std
    ``latent_spread`` and each view is a random linear map of the latent points
    plus Gaussian noise of its own sigma.
    """
    if n_classes < 2:
        raise ArgumentError("n_classes must be >= 2")
    if n_per_class < 1:
        raise ArgumentError("n_per_class must be >= 1")
    if not view_specs:
        raise ArgumentError("need at least one view spec")
    for dim, sigma in view_specs:
        if int(dim) < 2:
            raise ArgumentError(f"view dim must be >= 2, got {dim}")
        if not sigma >= 0:
            raise ArgumentError(f"noise sigma must be >= 0, got {sigma}")

    if layout not in ("random", "simplex"):
        raise ArgumentError(f"layout must be random|simplex, got {layout!r}")
    if layout == "simplex" and latent_dim < n_classes:
        raise ArgumentError("simplex layout needs latent_dim >= n_classes")

    rng = np.random.default_rng(seed)
    if layout == "random":
        centroids = class_sep * rng.standard_normal((latent_dim, n_classes))
    else:
        centroids = class_sep * np.eye(latent_dim, n_classes)
    labels = np.repeat(np.arange(n_classes), n_per_class)
    latent = centroids[:, labels] + latent_spread * rng.standard_normal((latent_dim, labels.size))
    views = []
    for dim, sigma in view_specs:
        A = rng.standard_normal((int(dim), latent_dim))
        noise = rng.standard_normal((int(dim), labels.size))
        views.append(A @ latent + float(sigma) * noise)
    return MultiViewDataset(tuple(views), labels)


def standard_fixture(noisy: bool = True, seed: int = 0) -> MultiViewDataset:
    """The 3-view, 120-sample (3 x 40) fixture used by the end-to-end checks.

    Equidistant class centroids; view 1 is clean and, when ``noisy``, views 2
    and 3 carry additive noise with sigma 2 and 3.
    """
    sigmas = (0.0, 2.0, 3.0) if noisy else (0.0, 0.0, 0.0)
    specs = [(8, sigmas[0]), (10, sigmas[1]), (12, sigmas[2])]
    return synth_multiview(40, 3, specs, seed=seed, latent_dim=3, class_sep=4.0,
                           latent_spread=1.0, layout="simplex")


def normalize_views(dataset: MultiViewDataset, how: str = "none") -> MultiViewDataset:
    """Per-view preprocessing: ``none``, ``zscore`` (per feature) or ``unit`` (per sample L2)."""
    if how == "none":
        return dataset
    out = []
    for X in dataset.views:
        if how == "zscore":
            mu = X.mean(axis=1, keepdims=True)
            sd = X.std(axis=1, keepdims=True)
            out.append((X - mu) / np.where(sd > 0, sd, 1.0))
        elif how == "unit":
            nrm = np.linalg.norm(X, axis=0, keepdims=True)
            out.append(X / np.where(nrm > 0, nrm, 1.0))
        else:
            raise ArgumentError(f"unknown normalization {how!r}")
    return MultiViewDataset(tuple(out), dataset.labels, dataset.view_names, dataset.label_names)
