"""Kernel alignment metrics between language-model and sensory-encoder embeddings."""

import json

from . import _sensalign
from ._sensalign import (
    SensalignError,
    alignment,
    auroc,
    bootstrap_alignment,
    cohens_d,
    cosine_kernel,
    fit_axis,
    kde,
    linear_cka,
    mutual_knn_alignment,
    overlap_per_item,
    project,
    run_cli,
    separation_report,
    topk_neighbors,
)

__all__ = [
    "SensalignError",
    "alignment",
    "auroc",
    "bootstrap_alignment",
    "cohens_d",
    "cosine_kernel",
    "fit_axis",
    "kde",
    "linear_cka",
    "load_matrix",
    "mutual_knn_alignment",
    "overlap_per_item",
    "project",
    "run_cli",
    "separation_report",
    "topk_neighbors",
    "write_matrix",
]


def load_matrix(path):
    """Reads an EMB1 file. Returns (float32 array, metadata dict)."""
    data, meta = _sensalign.load_matrix(str(path))
    return data, json.loads(meta)


def write_matrix(path, data, meta=None):
    _sensalign.write_matrix(str(path), data, json.dumps(meta or {}))
