"""Federated clustering and diversity analysis for distributed molecular data."""

from .dataset import (
    ClientShard, DatasetManifest, MoleculeRecord, SyntheticSpec,
    generate_synthetic, read_dataset, tanimoto_distance, write_dataset,
)
from .federation import FederationConfig, ProtocolError, RoundMessage, run_federation
from .kmeans import CentroidModel, centralized_kmeans, fed_kmeans, kmeanspp_init
from .lsh import centralized_lsh, fed_lsh
from .metrics import (
    ClusterAssignment, MetricsReport, evaluate, icf, random_assignment,
    scaffold_kld, sf, sf_icf, x_f_icf,
)
from .partitioner import PartitionConfig, assign_scaffolds, soft_split
from .pca import ProjectionMatrix, fed_pca, fed_pca_kmeans, project
from .experiments import ExperimentConfig, grid_search, run_experiment

__version__ = "0.1.0"
