"""SimSiam augmentation experiments for chest radiographs.

Thin Python access to the C++ core: augmentation kernels, the synthetic
dataset, metrics, the cosine schedule, the SimSiam loss and the command-line
workflow.
"""

from ._siamgrid import (
    SiamgridError,
    augment,
    augmentation_kinds,
    collapse_metric,
    cosine_lr,
    hamming_loss,
    macro_auroc,
    make_views,
    metrics_report,
    per_label_auroc,
    ranking_error,
    read_sweep_table,
    run_cli,
    select_t_theta,
    simsiam_loss,
    stratified_indices,
    synth_generate,
    version,
)

__all__ = [
    "SiamgridError",
    "augment",
    "augmentation_kinds",
    "collapse_metric",
    "cosine_lr",
    "hamming_loss",
    "macro_auroc",
    "make_views",
    "metrics_report",
    "per_label_auroc",
    "ranking_error",
    "read_sweep_table",
    "run_cli",
    "select_t_theta",
    "simsiam_loss",
    "stratified_indices",
    "synth_generate",
    "version",
]
