"""Resampling pipelines and tree ensembles for imbalanced survival
classification on categorical data."""

__version__ = "0.1.0"

from .data import Dataset, HorizonSpec, Schema, derive_survival_label, load_csv
from .errors import ConfigError, DegenerateError, ImbsurvError, ParseError, SchemaError
from .evaluation import ExperimentSpec, compute_metrics, confusion, run_experiment, stratified_folds
from .models import FitConfig, fit_model, predict, predict_proba
from .neighbors import MetricKind, NeighborIndex
from .sampling import SampleSet, SamplerSpec, SamplerStage, enn, renn, run_pipeline, smote
from .stats import anova_f, cramers_v, f_survival, screen_by_anova
from .synthgen import BlobConfig, CatGenConfig, generate_blobs, generate_categorical

__all__ = [
    "__version__",
    "Dataset", "HorizonSpec", "Schema", "derive_survival_label", "load_csv",
    "ConfigError", "DegenerateError", "ImbsurvError", "ParseError", "SchemaError",
    "ExperimentSpec", "compute_metrics", "confusion", "run_experiment", "stratified_folds",
    "FitConfig", "fit_model", "predict", "predict_proba",
    "MetricKind", "NeighborIndex",
    "SampleSet", "SamplerSpec", "SamplerStage", "enn", "renn", "run_pipeline", "smote",
    "anova_f", "cramers_v", "f_survival", "screen_by_anova",
    "BlobConfig", "CatGenConfig", "generate_blobs", "generate_categorical",
]
