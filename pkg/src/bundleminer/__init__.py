"""bundleminer: discover clusters of health-condition topics that share
clinical workflow topics, from EMR-style event logs and diagnosis records.
"""

__version__ = "0.1.0"

from .assoc import AssociationMatrix, TopicGraph, association, build_topic_graph
from .cluster import (
    ClusterReport,
    Partition,
    best_of_seeds,
    extract_phenotype_clusters,
    louvain,
    modularity,
)
from .ingest import (
    AccessEvent,
    CodeMap,
    DiagnosisRecord,
    PatientSequence,
    build_sequences,
    load_code_map,
    map_codes,
    parse_diagnosis_records,
    parse_event_log,
)
from .seqmine import (
    DocTermMatrix,
    bag_to_matrix,
    count_occurrences,
    mine_frequent_subsequences,
)
from .synth import GroundTruth, PlantedSpec, align_topics, clustering_agreement, generate_corpus
from .topics import (
    TopicModel,
    TopicSweepResult,
    best_fit,
    explanation_vector,
    fit_lda,
    select_topic_count,
    top_terms,
    topic_similarity,
)

__all__ = [
    "AccessEvent",
    "AssociationMatrix",
    "ClusterReport",
    "CodeMap",
    "DiagnosisRecord",
    "DocTermMatrix",
    "GroundTruth",
    "Partition",
    "PatientSequence",
    "PlantedSpec",
    "TopicGraph",
    "TopicModel",
    "TopicSweepResult",
    "align_topics",
    "association",
    "bag_to_matrix",
    "best_fit",
    "best_of_seeds",
    "build_sequences",
    "build_topic_graph",
    "clustering_agreement",
    "count_occurrences",
    "explanation_vector",
    "extract_phenotype_clusters",
    "fit_lda",
    "generate_corpus",
    "load_code_map",
    "louvain",
    "map_codes",
    "mine_frequent_subsequences",
    "modularity",
    "parse_diagnosis_records",
    "parse_event_log",
    "select_topic_count",
    "top_terms",
    "topic_similarity",
]
