"""Multi-view low-rank preserving embedding."""

from .dataio import (
    MultiViewDataset,
    SplitPlan,
    load_dataset,
    make_split,
    normalize_views,
    standard_fixture,
    synth_multiview,
    write_dataset,
)
from .errors import (
    ArgumentError,
    DataError,
    DivergenceError,
    LoadError,
    MvLpeError,
    NumericError,
    ShapeError,
)
from .evaluation import ExperimentReport, baseline_embeddings, one_nn_classify, run_experiment
from .kernels import KernelSpec, graph_laplacian, median_bandwidth, similarity_matrix
from .lowrank import (
    LowRankCode,
    NeighborIndex,
    ReconstructionMatrix,
    SolverOpts,
    assemble_reconstruction_matrix,
    knn_neighbors,
    solve_lowrank_codes,
)
from .lpe import Embedding, embed_direct, embed_kernel, embed_linear
from .model import (
    MvLpeConfig,
    MvLpeModel,
    ViewWeights,
    fit,
    joint_objective,
    update_centroid,
    update_view_embedding,
    update_weights,
)

__version__ = "0.1.0"
