"""Multimodal survival modeling with orthogonality-regularized deep fusion.

The package trains one encoder per data modality, gates and tensor-fuses
their embeddings, and fits the fused risk with a Cox partial likelihood
plus a penalty that pushes the per-modality embeddings toward mutually
orthogonal subspaces. Everything runs on a small built-in reverse-mode
autodiff core; synthetic survival cohorts, evaluation metrics, a Monte
Carlo cross-validation harness, and a CLI round out the toolkit.
"""

__version__ = "0.1.0"

from .datasets import (
    Cohort,
    CohortData,
    CohortOracle,
    CohortSpec,
    ModalitySpec,
    complementary_preset,
    generate,
    generate_preset,
    load_cohort,
    redundant_preset,
    save_cohort,
)
from .encoders import CoxEmbeddingNet, MultiBranchCoxNet, load_checkpoint
from .experiment import (
    GAMMA_SWEEP,
    ExperimentConfig,
    ExperimentResult,
    aggregate_patient_risk,
    compare_table,
    mc_splits,
    naive_late_fusion,
    run_experiment,
)
from .fusion import CorrelationFusionNet, OrthogonalFusionNet, mean_pairwise_cosine
from .losses import CombinedLoss, combined_loss, cox_pl_loss, mmo_loss
from .metrics import (
    HazardRatio,
    KMCurve,
    TestResult,
    assign_risk_groups,
    concordance_index,
    hazard_ratio,
    km_estimate,
    log_rank_test,
    mann_whitney_u,
)
from .radiomics import (
    LabeledVolume,
    RegionFeatures,
    extract_all_regions,
    extract_region,
    feature_names,
    read_volume,
    summarize_patient,
    write_volume,
)
from .validation import ConfigError, NumericError, SurvivalBatch, as_survival

__all__ = [
    "__version__",
    # errors and survival containers
    "ConfigError",
    "NumericError",
    "SurvivalBatch",
    "as_survival",
    # estimators
    "CoxEmbeddingNet",
    "MultiBranchCoxNet",
    "OrthogonalFusionNet",
    "CorrelationFusionNet",
    "load_checkpoint",
    # losses
    "CombinedLoss",
    "combined_loss",
    "cox_pl_loss",
    "mmo_loss",
    "mean_pairwise_cosine",
    # metrics
    "TestResult",
    "KMCurve",
    "HazardRatio",
    "concordance_index",
    "km_estimate",
    "log_rank_test",
    "hazard_ratio",
    "mann_whitney_u",
    "assign_risk_groups",
    # synthetic cohorts
    "ModalitySpec",
    "CohortSpec",
    "Cohort",
    "CohortData",
    "CohortOracle",
    "generate",
    "generate_preset",
    "complementary_preset",
    "redundant_preset",
    "save_cohort",
    "load_cohort",
    # experiment harness
    "ExperimentConfig",
    "ExperimentResult",
    "GAMMA_SWEEP",
    "run_experiment",
    "compare_table",
    "mc_splits",
    "naive_late_fusion",
    "aggregate_patient_risk",
    # radiomics
    "LabeledVolume",
    "RegionFeatures",
    "extract_region",
    "extract_all_regions",
    "summarize_patient",
    "feature_names",
    "read_volume",
    "write_volume",
]
