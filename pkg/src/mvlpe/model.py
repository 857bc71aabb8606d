"""Multi-view fusion: alternating centroid / per-view / weight updates.

Per view ``v`` the fixed ingredients are the low-rank structure matrix
``Q_v = (I - M_v)^T (I - M_v)`` and the view Laplacian ``L_v = D_v - K_v`` of
the raw features.  One outer iteration does

1. ``U*``  <- smallest eigenvectors of ``sum_v w_v L_v``
2. ``K*``  <- similarity of the columns of ``U*``;  ``L* = D* - K*``
3. ``psi_v`` <- minimiser of ``tr(psi (Q_v + gamma w_v L*) psi^T)`` (variant constraint)
4. ``w_v`` <- ``t_v^(p/2 - 1) / sum_u t_u^(p/2 - 1)`` with ``t_v = tr(U* L_v U*^T)``

and records the joint objective
``gamma * sum_v w_v t_v + sum_v tr(psi_v Q_v psi_v^T)``.
"""

from __future__ import annotations

import json
import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Sequence

import numpy as np

from .dataio import MultiViewDataset, normalize_views
from .errors import ArgumentError, DivergenceError, MvLpeError
from .kernels import AUTO, KernelSpec, graph_laplacian, similarity_matrix
from .lowrank import (
    ReconstructionMatrix,
    SolverOpts,
    assemble_reconstruction_matrix,
    default_k,
    knn_neighbors,
    solve_lowrank_codes,
)
from .lpe import VARIANTS, Embedding, embed_structure, smallest_eigenvectors

__all__ = [
    "MvLpeConfig",
    "ViewWeights",
    "MvLpeModel",
    "ViewState",
    "update_centroid",
    "update_view_embedding",
    "update_weights",
    "joint_objective",
    "prepare_views",
    "fit",
    "resolve_threads",
]

log = logging.getLogger(__name__)

TRACE_FLOOR = 1e-12
MONOTONE_SLACK = 1e-8


# ----------------------------------------------------------------------- config


def _kernel(value) -> KernelSpec:
    if isinstance(value, KernelSpec):
        return value
    if isinstance(value, dict):
        unknown = set(value) - {f.name for f in fields(KernelSpec)}
        if unknown:
            raise ArgumentError(f"unknown kernel keys: {sorted(unknown)}")
        return KernelSpec(**value)
    raise ArgumentError(f"kernel must be a mapping, got {type(value).__name__}")


@dataclass(frozen=True)
class MvLpeConfig:
    """Hyper-parameters of a fit.

    ``d_view`` is either one dimension for all views or one per view; when only
    ``d_view`` is given, ``d_star`` defaults to its maximum.  ``K = None`` means
    ``min(10, N - 1)``.  ``seed`` is recorded for provenance; the fit itself is
    deterministic and draws no random numbers.
    """

    d_star: int | None = None
    d_view: int | tuple | None = None
    gamma: float = 1.0
    p: float = 1.0
    variant: str = "direct"
    view_kernel: KernelSpec = field(default_factory=KernelSpec)
    centroid_kernel: KernelSpec = field(default_factory=KernelSpec)
    phi_kernel: KernelSpec = field(default_factory=KernelSpec)
    K: int | None = None
    lam: float = 1.0
    admm_mu: float = 1.0
    admm_tol: float = 1e-6
    admm_max_iters: int = 500
    ridge: float | None = None
    max_outer_iters: int = 50
    outer_tol: float = 1e-6
    normalize: str = "none"
    baseline_engine: str = "lpe"
    seed: int = 0

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        for name in ("view_kernel", "centroid_kernel", "phi_kernel"):
            set_(name, _kernel(getattr(self, name)))
        if isinstance(self.d_view, list):
            set_("d_view", tuple(self.d_view))
        dv = self.d_view
        dims = [dv] if isinstance(dv, int) else list(dv or [])
        if self.d_star is not None:
            dims.append(self.d_star)
        for d in dims:
            if not isinstance(d, (int, np.integer)) or isinstance(d, bool) or d < 1:
                raise ArgumentError(f"dimensions must be integers >= 1, got {d!r}")
        if not (isinstance(self.p, (int, float)) and 0 < self.p <= 2):
            raise ArgumentError(f"p must satisfy 0 < p <= 2, got {self.p!r}")
        if not (isinstance(self.gamma, (int, float)) and math.isfinite(self.gamma) and self.gamma > 0):
            raise ArgumentError(f"gamma must be > 0, got {self.gamma!r}")
        if self.variant not in VARIANTS:
            raise ArgumentError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.K is not None and (not isinstance(self.K, int) or self.K < 1):
            raise ArgumentError(f"K must be an integer >= 1, got {self.K!r}")
        if not (isinstance(self.lam, (int, float)) and self.lam > 0):
            raise ArgumentError(f"lam must be > 0, got {self.lam!r}")
        SolverOpts(self.admm_mu, self.admm_tol, self.admm_max_iters)
        if self.ridge is not None and not self.ridge >= 0:
            raise ArgumentError("ridge must be >= 0")
        if not isinstance(self.max_outer_iters, int) or self.max_outer_iters < 1:
            raise ArgumentError(f"max_outer_iters must be >= 1, got {self.max_outer_iters!r}")
        if not (isinstance(self.outer_tol, (int, float)) and self.outer_tol > 0):
            raise ArgumentError(f"outer_tol must be > 0, got {self.outer_tol!r}")
        if self.normalize not in ("none", "zscore", "unit"):
            raise ArgumentError(f"normalize must be none|zscore|unit, got {self.normalize!r}")
        if self.baseline_engine not in ("lpe", "le"):
            raise ArgumentError(f"baseline_engine must be lpe|le, got {self.baseline_engine!r}")

    def view_dims(self, m: int) -> list[int]:
        dv = self.d_view
        if dv is None:
            return [self.centroid_dim()] * m
        if isinstance(dv, (int, np.integer)):
            return [int(dv)] * m
        if len(dv) != m:
            raise ArgumentError(f"d_view lists {len(dv)} dimensions for {m} views")
        return [int(d) for d in dv]

    def centroid_dim(self) -> int:
        if self.d_star is not None:
            return int(self.d_star)
        dv = self.d_view
        if dv is None:
            return 10
        return int(dv) if isinstance(dv, (int, np.integer)) else max(int(d) for d in dv)

    def solver_opts(self) -> SolverOpts:
        return SolverOpts(self.admm_mu, self.admm_tol, self.admm_max_iters)

    def to_dict(self) -> dict:
        out = asdict(self)
        if isinstance(self.d_view, tuple):
            out["d_view"] = list(self.d_view)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "MvLpeConfig":
        if not isinstance(data, dict):
            raise ArgumentError("config must be a JSON object")
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ArgumentError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ArgumentError(str(exc)) from None


# ------------------------------------------------------------------------ types


@dataclass(frozen=True)
class ViewWeights:
    w: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise ArgumentError("weights must be a non-empty vector")
        if np.any(~(w > 0)):
            raise ArgumentError("weights must be strictly positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ArgumentError(f"weights must sum to 1, got {w.sum()!r}")
        object.__setattr__(self, "w", w)

    @classmethod
    def uniform(cls, m: int) -> "ViewWeights":
        return cls(np.full(m, 1.0 / m))

    def __len__(self):
        return self.w.size

    def __getitem__(self, i):
        return self.w[i]


@dataclass
class ViewState:
    """Everything fixed per view before the outer loop starts."""

    X: np.ndarray
    M: ReconstructionMatrix
    Q: np.ndarray
    L: np.ndarray
    Kphi: np.ndarray | None
    code_iters: int
    code_converged: bool
    code_objective: float


@dataclass
class MvLpeModel:
    U_star: np.ndarray
    view_embeddings: list
    weights: ViewWeights
    objective_trace: list
    disagreement_trace: list
    converged: bool
    iters: int
    config: MvLpeConfig
    objective_trace_prev_weights: list = field(default_factory=list)
    centroid_trace: list = field(default_factory=list)
    centroid_steps: list = field(default_factory=list)
    weight_trace: list = field(default_factory=list)
    view_names: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        views = []
        for e in self.view_embeddings:
            item = {
                "variant": e.variant,
                "u": e.U.tolist(),
                "eigenvalues": np.asarray(e.eigenvalues).tolist(),
                "objective": e.objective,
                "eps": e.eps,
            }
            if e.W is not None:
                item["w"] = e.W.tolist()
            if e.beta is not None:
                item["beta"] = e.beta.tolist()
            views.append(item)
        return {
            "config": self.config.to_dict(),
            "weights": self.weights.w.tolist(),
            "u_star": self.U_star.tolist(),
            "view_embeddings": views,
            "objective_trace": list(map(float, self.objective_trace)),
            "disagreement_trace": [list(map(float, r)) for r in self.disagreement_trace],
            "objective_trace_prev_weights": list(map(float, self.objective_trace_prev_weights)),
            "centroid_trace": list(map(float, self.centroid_trace)),
            "weight_trace": [list(map(float, r)) for r in self.weight_trace],
            "converged": bool(self.converged),
            "iters": int(self.iters),
            "view_names": list(self.view_names),
        }

    def to_json(self) -> str:
        # json writes floats via repr: shortest string that round-trips exactly
        return json.dumps(self.to_dict(), indent=1, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "MvLpeModel":
        views = [
            Embedding(
                U=np.asarray(v["u"], dtype=float),
                variant=v["variant"],
                W=np.asarray(v["w"]) if "w" in v else None,
                beta=np.asarray(v["beta"]) if "beta" in v else None,
                eps=float(v.get("eps", 0.0)),
                eigenvalues=np.asarray(v.get("eigenvalues", [])),
                objective=float(v.get("objective", float("nan"))),
            )
            for v in data["view_embeddings"]
        ]
        return cls(
            U_star=np.asarray(data["u_star"], dtype=float),
            view_embeddings=views,
            weights=ViewWeights(np.asarray(data["weights"], dtype=float)),
            objective_trace=list(data["objective_trace"]),
            disagreement_trace=[list(r) for r in data["disagreement_trace"]],
            converged=bool(data.get("converged", False)),
            iters=int(data.get("iters", len(data["objective_trace"]))),
            config=MvLpeConfig.from_dict(data["config"]),
            objective_trace_prev_weights=list(data.get("objective_trace_prev_weights", [])),
            centroid_trace=list(data.get("centroid_trace", [])),
            weight_trace=[list(r) for r in data.get("weight_trace", [])],
            view_names=tuple(data.get("view_names", ())),
        )

    @classmethod
    def from_json(cls, text: str) -> "MvLpeModel":
        return cls.from_dict(json.loads(text))


# ------------------------------------------------------------------- operations


def _as_weights(w) -> np.ndarray:
    return w.w if isinstance(w, ViewWeights) else np.asarray(w, dtype=float)


def _trace_form(U, L) -> float:
    return float(np.einsum("ij,jk,ik->", U, L, U))


def update_centroid(laplacians: Sequence[np.ndarray], w, d_star: int) -> np.ndarray:
    """Rows of the ``d_star`` smallest eigenvectors of ``sum_v w_v L_v``."""
    w = _as_weights(w)
    if len(laplacians) != w.size:
        raise ArgumentError(f"{len(laplacians)} laplacians but {w.size} weights")
    L_star = np.zeros_like(np.asarray(laplacians[0], dtype=float))
    for wv, L in zip(w, laplacians):
        L_star += wv * L
    return smallest_eigenvectors(L_star, d_star).vectors.T.copy()


def update_view_embedding(M, L_star, w_v: float, gamma: float, d_v: int, variant: str = "direct",
                          X=None, Kphi=None, eps=None) -> Embedding:
    """Per-view step: minimise ``tr(psi ((I-M)^T(I-M) + gamma w_v L*) psi^T)``."""
    if not w_v > 0:
        raise ArgumentError(f"view weight must be > 0, got {w_v}")
    if gamma < 0:
        raise ArgumentError(f"gamma must be >= 0, got {gamma}")
    Q = M.structure() if isinstance(M, ReconstructionMatrix) else np.asarray(M, dtype=float)
    return embed_structure(Q + (gamma * w_v) * np.asarray(L_star, dtype=float), d_v, variant,
                           X=X, Kphi=Kphi, eps=eps)


def update_weights(U_star, laplacians: Sequence[np.ndarray], p: float) -> ViewWeights:
    """``w_v`` proportional to ``t_v^(p/2 - 1)``, normalised; ``t_v`` floored at 1e-12."""
    if not (0 < p <= 2):
        raise ArgumentError(f"p must satisfy 0 < p <= 2, got {p}")
    t = np.array([_trace_form(U_star, L) for L in laplacians])
    if np.any(t < -1e-10):
        raise ArgumentError(f"negative disagreement trace {t.min()!r}; laplacians must be PSD")
    clamped = t < TRACE_FLOOR
    m = t.size
    if clamped.all():
        warnings.warn("all view disagreements vanish; falling back to uniform weights", RuntimeWarning)
        return ViewWeights(np.full(m, 1.0 / m), degenerate=True)
    t = np.maximum(t, TRACE_FLOOR)
    raw = t ** (p / 2.0 - 1.0)
    w = raw / raw.sum()
    # repair the last ulp so the sum-to-one invariant holds exactly enough
    w = w / w.sum()
    return ViewWeights(w)


def _check_orthonormal(U, name, tol=1e-6):
    U = np.asarray(U, dtype=float)
    if U.ndim != 2:
        raise ArgumentError(f"{name} must be a d x N matrix")
    err = np.linalg.norm(U @ U.T - np.eye(U.shape[0]))
    if not err <= tol:
        raise ArgumentError(f"{name} violates its orthonormality constraint (residual {err:.3g})")


def joint_objective(U_star, view_embeddings, weights, laplacians, structures, gamma: float) -> float:
    """``gamma * sum_v w_v tr(U* L_v U*^T) + sum_v tr(psi_v Q_v psi_v^T)``.

    ``view_embeddings`` may hold :class:`Embedding` objects or bare ``d x N`` arrays
    (checked against ``psi psi^T = I``).
    """
    w = _as_weights(weights)
    m = w.size
    if not (len(view_embeddings) == len(laplacians) == len(structures) == m):
        raise ArgumentError("views, laplacians, structures and weights must have equal length")
    U_star = np.asarray(U_star, dtype=float)
    n = U_star.shape[1] if U_star.ndim == 2 else -1
    _check_orthonormal(U_star, "U_star")
    psis = []
    for v, e in enumerate(view_embeddings):
        if isinstance(e, Embedding):
            res = e.constraint_residual() if e.variant == "direct" or e.X is not None or e.Kphi is not None else 0.0
            if not res <= max(1e-6, e.constraint_tol()):
                raise ArgumentError(f"embedding of view {v} violates its constraint (residual {res:.3g})")
            psis.append(e.U)
        else:
            _check_orthonormal(e, f"embedding of view {v}")
            psis.append(np.asarray(e, dtype=float))
    for v in range(m):
        shapes = (psis[v].shape[1], np.shape(laplacians[v]), np.shape(structures[v]))
        if shapes[0] != n or shapes[1] != (n, n) or shapes[2] != (n, n):
            raise ArgumentError(f"view {v}: inconsistent shapes {shapes} for N={n}")
    consensus = sum(wv * _trace_form(U_star, L) for wv, L in zip(w, laplacians))
    preserve = sum(_trace_form(P, Q) for P, Q in zip(psis, structures))
    return float(gamma * consensus + preserve)


# -------------------------------------------------------------------------- fit


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get("MVLPE_THREADS", "").strip()
        try:
            threads = int(env) if env else 1
        except ValueError:
            raise ArgumentError(f"MVLPE_THREADS must be an integer, got {env!r}") from None
    if threads < 1:
        raise ArgumentError(f"threads must be >= 1, got {threads}")
    return int(threads)


def _map(fn: Callable, items, threads: int) -> list:
    # per-view work is independent; results come back in input order either way
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _prepare_one(X, config: MvLpeConfig) -> ViewState:
    n = X.shape[1]
    K = config.K if config.K is not None else default_k(n)
    if K > n - 1:
        raise ArgumentError(f"K={K} needs at least K+1={K + 1} samples, got N={n}")
    nb = knn_neighbors(X, K)
    code = solve_lowrank_codes(X, nb, config.lam, config.solver_opts())
    M = assemble_reconstruction_matrix(code, n)
    L = graph_laplacian(similarity_matrix(X, config.view_kernel))
    Kphi = similarity_matrix(X, config.phi_kernel).values if config.variant == "kernel" else None
    return ViewState(X=X, M=M, Q=M.structure(), L=L, Kphi=Kphi, code_iters=code.solver_iters,
                     code_converged=code.converged, code_objective=code.objective)


def prepare_views(dataset: MultiViewDataset, config: MvLpeConfig, threads: int = 1) -> list[ViewState]:
    """Low-rank codes, reconstruction matrices and view Laplacians for every view."""
    data = normalize_views(dataset, config.normalize)
    out = []
    for v, st in enumerate(_map(lambda X: _safe(_prepare_one, X, config), list(data.views), threads)):
        if isinstance(st, Exception):
            raise type(st)(f"view {v} ({data.view_names[v]}): {st}") from st
        out.append(st)
    return out


def _safe(fn, *args):
    try:
        return fn(*args)
    except MvLpeError as exc:
        return exc


def _embed_view(st: ViewState, Q, d, config):
    return embed_structure(Q, d, config.variant, X=st.X, Kphi=st.Kphi, eps=config.ridge)


def fit(dataset: MultiViewDataset, config: MvLpeConfig | None = None, threads: int | None = None,
        views: list[ViewState] | None = None) -> MvLpeModel:
    """Run the alternating optimisation on ``dataset``.

    ``views`` may carry precomputed :func:`prepare_views` output to skip the
    low-rank coding stage.
    """
    config = config or MvLpeConfig()
    threads = resolve_threads(threads)
    m, n = dataset.n_views, dataset.n_samples
    d_star = config.centroid_dim()
    d_view = config.view_dims(m)
    if d_star > n or max(d_view) > n:
        raise ArgumentError(f"embedding dimension exceeds N={n}")
    if views is None:
        views = prepare_views(dataset, config, threads)
    laplacians = [st.L for st in views]
    structures = [st.Q for st in views]

    w = ViewWeights.uniform(m)
    psis = _map(lambda v: _embed_view(views[v], views[v].Q, d_view[v], config), list(range(m)), threads)

    objective_trace, prev_trace, centroid_trace = [], [], []
    disagreement_trace, weight_trace, steps = [], [], []
    U_star = None
    converged = False
    rising = 0
    it = 0
    for it in range(1, config.max_outer_iters + 1):
        try:
            U_new = update_centroid(laplacians, w, d_star)
            if U_star is not None:
                before = sum(wv * _trace_form(U_star, L) for wv, L in zip(w.w, laplacians))
                after = sum(wv * _trace_form(U_new, L) for wv, L in zip(w.w, laplacians))
                steps.append((float(before), float(after)))
            U_star = U_new
            L_star = graph_laplacian(similarity_matrix(U_star, config.centroid_kernel))

            def per_view(v, w=w, L_star=L_star):
                st = views[v]
                return _embed_view(st, st.Q + (config.gamma * w.w[v]) * L_star, d_view[v], config)

            psis = _map(per_view, list(range(m)), threads)
            w_prev = w
            w = update_weights(U_star, laplacians, config.p)
        except MvLpeError as exc:
            raise type(exc)(f"outer iteration {it}: {exc}") from exc

        t = np.array([_trace_form(U_star, L) for L in laplacians])
        obj = joint_objective(U_star, psis, w, laplacians, structures, config.gamma)
        objective_trace.append(obj)
        prev_trace.append(joint_objective(U_star, psis, w_prev, laplacians, structures, config.gamma))
        centroid_trace.append(float(np.sum(np.maximum(t, 0.0) ** (config.p / 2.0))))
        disagreement_trace.append(t.tolist())
        weight_trace.append(w.w.tolist())
        log.debug("iter %d objective %.12g weights %s", it, obj, w.w)

        if len(centroid_trace) > 1:
            a, b = centroid_trace[-2], centroid_trace[-1]
            rising = rising + 1 if b > a + MONOTONE_SLACK * max(abs(a), 1.0) else 0
            if rising >= 3:
                raise DivergenceError(
                    f"centroid objective increased for 3 consecutive iterations (iteration {it})",
                    trace=centroid_trace,
                )
        if len(objective_trace) > 1:
            a, b = objective_trace[-2], objective_trace[-1]
            if abs(b - a) <= config.outer_tol * max(abs(a), np.finfo(float).tiny):
                converged = True
                break

    return MvLpeModel(
        U_star=U_star,
        view_embeddings=psis,
        weights=w,
        objective_trace=objective_trace,
        disagreement_trace=disagreement_trace,
        converged=converged,
        iters=it,
        config=config,
        objective_trace_prev_weights=prev_trace,
        centroid_trace=centroid_trace,
        centroid_steps=steps,
        weight_trace=weight_trace,
        view_names=dataset.view_names,
        diagnostics={
            "code_iters": [st.code_iters for st in views],
            "code_converged": [st.code_converged for st in views],
            "code_objective": [st.code_objective for st in views],
        },
    )
