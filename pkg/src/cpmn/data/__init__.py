"""Feature/annotation ingestion, the CPFT binary format, synthetic datasets,
and the training-time sampling strategies."""

from .io import (
    load_annotations,
    load_dataset,
    load_features,
    load_training_set,
    read_manifest,
    save_annotations,
    save_features,
    write_manifest,
)
from .sampling import (
    SamplerConfig,
    sample_indices,
    sample_shot,
    sample_sparse,
    sample_uniform,
    shot_boundaries,
)
from .synthetic import SyntheticDataset, SyntheticSpec, generate_synthetic
from .types import (
    MODALITIES,
    TrainingExample,
    UnitFeatureSequence,
    VideoRecord,
    label_vector,
)

__all__ = [
    "MODALITIES",
    "SamplerConfig",
    "SyntheticDataset",
    "SyntheticSpec",
    "TrainingExample",
    "UnitFeatureSequence",
    "VideoRecord",
    "generate_synthetic",
    "label_vector",
    "load_annotations",
    "load_dataset",
    "load_features",
    "load_training_set",
    "read_manifest",
    "sample_indices",
    "sample_shot",
    "sample_sparse",
    "sample_uniform",
    "save_annotations",
    "save_features",
    "shot_boundaries",
    "write_manifest",
]
