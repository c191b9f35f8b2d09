"""Image-guided point-cloud completion: python surface over the C++ core."""

from ._core import (
    CompletionModel,
    NetConfig,
    chamfer_l1,
    chamfer_l2,
    f_score,
    fps,
    knn,
    load_ply,
    load_pnm,
    make_shape,
    pairwise_sq_dist,
    save_ply,
    save_pnm,
    silhouette,
)

__all__ = [
    "CompletionModel",
    "NetConfig",
    "chamfer_l1",
    "chamfer_l2",
    "f_score",
    "fps",
    "knn",
    "load_ply",
    "load_pnm",
    "make_shape",
    "pairwise_sq_dist",
    "save_ply",
    "save_pnm",
    "silhouette",
]
