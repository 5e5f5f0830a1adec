"""Layerwise representation analysis: information imbalance, neighbourhood
structure and probe trajectories over embedding matrices."""

from ._core import (
    DataError,
    analytic_baseline,
    anchor_layers,
    color_warmth,
    edge_density,
    gen_drift_stack,
    gen_gaussian,
    gen_noisy_copy,
    gen_two_process,
    imbalance_both,
    imbalance_range_checks,
    information_imbalance,
    jaccard,
    k_nearest,
    population_std,
    probe_accuracy,
    rank_of,
    read_embeddings,
    roughness,
    run_cli,
    set_num_threads,
    smoothness,
    spearman,
    texture_complexity,
    write_embeddings,
)

__all__ = [name for name in dir() if not name.startswith("_")]


def main() -> None:
    import sys

    raise SystemExit(run_cli(["repdyn", *sys.argv[1:]]))
