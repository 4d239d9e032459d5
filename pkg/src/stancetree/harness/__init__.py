from .config import ConfigError, ExperimentConfig, load_config, save_config
from .dataset_io import (
    LabelConflict,
    SchemaViolation,
    dataset_fingerprint,
    dump_dataset,
    dumps_dataset,
    load_dataset,
)
from .experiment import DatasetMismatch, ExperimentError, compare_runs, rerun_from_manifest, run_experiment
from .synthetic import InvalidSpec, SyntheticSpec, diagonal_transitions, edge_agreement, generate_synthetic
