"""Genetic modality: hyperbolic embeddings of a genealogy DAG."""

from .evaluate import eval_reconstruction
from .graph import ClosureIndex, GenealogyGraph, build_closure, sample_negatives
from .manifolds import (
    Euclidean,
    Hyperboloid,
    PoincareBall,
    hyperboloid_distance,
    hyperboloid_expmap,
    hyperboloid_rsgd_step,
    lift_to_hyperboloid,
    lorentz_inner,
    make_geometry,
    mobius_add,
    poincare_distance,
    poincare_rsgd_step,
)
from .train import (
    EmbeddingTable,
    TrainConfig,
    compute_dmax,
    contrastive_loss,
    contrastive_loss_grad,
    genetic_distance,
    train_embeddings,
)

__all__ = [
    "ClosureIndex",
    "EmbeddingTable",
    "Euclidean",
    "GenealogyGraph",
    "Hyperboloid",
    "PoincareBall",
    "TrainConfig",
    "build_closure",
    "compute_dmax",
    "contrastive_loss",
    "contrastive_loss_grad",
    "eval_reconstruction",
    "genetic_distance",
    "hyperboloid_distance",
    "hyperboloid_expmap",
    "hyperboloid_rsgd_step",
    "lift_to_hyperboloid",
    "lorentz_inner",
    "make_geometry",
    "mobius_add",
    "poincare_distance",
    "poincare_rsgd_step",
    "sample_negatives",
    "train_embeddings",
]
