"""Coverage-maximizing client-center selection and retrieval augmentation
over precomputed instruction embeddings, with exact desk-scale oracles."""

from .augment import (
    RetrievalResult,
    data_select,
    direct_retrieval_augment,
    feddca_augment,
    random_sampling_augment,
    retrieve_topk,
)
from .clustering import CandidateCenters, assign_labels, kmeans
from .errors import BudgetExceededError, FedcaError, ValidationError
from .fedsim import (
    ExperimentConfig,
    ExperimentLog,
    ProtocolMessage,
    compare_strategies,
    heterogeneity_sweep,
    run_experiment,
)
from .geometry import (
    CoverageValue,
    SimilarityMode,
    best_similarity,
    cosine,
    coverage,
    facility_value,
    marginal_gain,
)
from .metrics import MetricsReport, comm_cost, cross_client_coverage, icacs, ruai
from .partition import (
    PartitionPlan,
    dirichlet_partition,
    distinct_cluster_partition,
    iid_partition,
)
from .selection import (
    ApproximationReport,
    CenterSelection,
    SelectedCenter,
    SelectionProblem,
    approximation_report,
    beam_select,
    brute_force_select,
    greedy_select,
)
from .store import (
    EmbeddingStore,
    InstructionRecord,
    ingest_binary,
    ingest_jsonl,
    write_binary,
    write_jsonl,
)

__version__ = "0.1.0"

__all__ = [
    "ApproximationReport",
    "BudgetExceededError",
    "CandidateCenters",
    "CenterSelection",
    "CoverageValue",
    "EmbeddingStore",
    "ExperimentConfig",
    "ExperimentLog",
    "FedcaError",
    "InstructionRecord",
    "MetricsReport",
    "PartitionPlan",
    "ProtocolMessage",
    "RetrievalResult",
    "SelectedCenter",
    "SelectionProblem",
    "SimilarityMode",
    "ValidationError",
    "approximation_report",
    "assign_labels",
    "beam_select",
    "best_similarity",
    "brute_force_select",
    "comm_cost",
    "compare_strategies",
    "cosine",
    "coverage",
    "cross_client_coverage",
    "data_select",
    "dirichlet_partition",
    "direct_retrieval_augment",
    "distinct_cluster_partition",
    "facility_value",
    "feddca_augment",
    "greedy_select",
    "heterogeneity_sweep",
    "icacs",
    "iid_partition",
    "ingest_binary",
    "ingest_jsonl",
    "kmeans",
    "marginal_gain",
    "random_sampling_augment",
    "retrieve_topk",
    "ruai",
    "run_experiment",
    "write_binary",
    "write_jsonl",
]
