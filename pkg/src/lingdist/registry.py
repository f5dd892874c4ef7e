"""Languages known to the engine and the per-modality distance dispatch."""

from __future__ import annotations

from dataclasses import dataclass, field

from .composite import MODALITIES, ModalityWeights, composite_distance, uniform_weights
from .errors import MissingModality, UnknownLanguage
from .genetic.train import EmbeddingTable, compute_dmax, genetic_distance
from .geo import GeoDistribution, geo_distance
from .typology.islands import IslandModel, typology_distance
from .typology.lcm import FeatureMatrix


@dataclass
class LanguageRegistry:
    """Loaded artifacts plus which languages each modality covers.

    A language is available for ``geo`` if it has a speaker distribution,
    for ``gen`` if it is a node of the embedding table, and for ``typ`` if it
    is a row of the feature matrix and an island model is loaded.
    """

    speakers: dict[str, GeoDistribution] = field(default_factory=dict)
    embeddings: EmbeddingTable | None = None
    features: FeatureMatrix | None = None
    islands: IslandModel | None = None
    weights: ModalityWeights = field(default_factory=uniform_weights)

    def __post_init__(self):
        if self.embeddings is not None and self.embeddings.d_max is None and len(self.embeddings) >= 2:
            compute_dmax(self.embeddings)

    def available(self, lang) -> dict[str, bool]:
        return {
            "geo": lang in self.speakers,
            "gen": self.embeddings is not None and lang in self.embeddings,
            "typ": (self.features is not None and self.islands is not None
                    and lang in self.features.language_index),
        }

    @property
    def languages(self) -> list:
        ids = dict.fromkeys(self.speakers)
        if self.embeddings is not None:
            ids.update(dict.fromkeys(self.embeddings.nodes))
        if self.features is not None:
            ids.update(dict.fromkeys(self.features.languages))
        return list(ids)

    def _require(self, modality, *langs):
        known = set(self.languages)
        for lang in langs:
            if lang not in known:
                raise UnknownLanguage(lang)
        for lang in langs:
            if not self.available(lang)[modality]:
                raise MissingModality(f"language {lang!r} has no {modality} data")

    def distance(self, modality: str, a, b) -> float:
        if modality == "geo":
            self._require("geo", a, b)
            return geo_distance(self.speakers[a], self.speakers[b])
        if modality == "gen":
            self._require("gen", a, b)
            return genetic_distance(a, b, self.embeddings)
        if modality == "typ":
            self._require("typ", a, b)
            return typology_distance(a, b, self.islands, self.features)
        if modality == "composite":
            parts = {}
            for m, w in self.weights:
                if w > 0:
                    parts[m] = self.distance(m, a, b)
                else:
                    parts[m] = None
            return composite_distance(parts, self.weights)
        raise ValueError(f"unknown modality {modality!r}; expected one of {(*MODALITIES, 'composite')}")
