"""Typological modality: latent feature islands and angular posterior distances."""

from .islands import (
    IslandModel,
    angular_distance,
    greedy_island_build,
    posterior_from_row,
    posterior_vector,
    split_active_set,
    typology_distance,
)
from .lcm import (
    MISSING,
    FeatureMatrix,
    LatentClassModel,
    bic_score,
    em_fit_lcm,
    modified_bic,
    mutual_information,
    mutual_information_matrix,
)
