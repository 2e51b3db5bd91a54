"""Motion-based animal part segmentation."""

from ._wildseg import (
    WildsegError,
    adjusted_rand_index,
    cluster,
    complete_linkage,
    detect_edges,
    fill_between,
    generate_scene,
    match_edge_sets,
    mean_log_likelihood,
    run,
)

__all__ = [
    "WildsegError",
    "adjusted_rand_index",
    "cluster",
    "complete_linkage",
    "detect_edges",
    "fill_between",
    "generate_scene",
    "match_edge_sets",
    "mean_log_likelihood",
    "run",
]
