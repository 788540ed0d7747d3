"""Monte Carlo cross-validation harness for the fusion survival models.

One experiment = repeated random holdout splits at patient level. Per
fold: train one encoder per modality, then the fusion variants on top of
the shared encoders, score held-out patients, and aggregate per-sample
risks through the 75th percentile over every modality-sample combination.
Risk scores are pooled across validation folds per patient for the group
analyses (Kaplan-Meier, hazard ratio, log-rank).

Everything is deterministic given the config seed; per-fold and per-model
seeds are derived through ``numpy.random.SeedSequence``.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass

import numpy as np

from .encoders import CoxEmbeddingNet
from .fusion import CorrelationFusionNet, OrthogonalFusionNet, ablation_grid
from .metrics import (
    HazardRatio,
    TestResult,
    assign_risk_groups,
    concordance_index,
    hazard_ratio,
    km_estimate,
    log_rank_test,
    mann_whitney_u,
)
from .validation import ConfigError, NumericError, SurvivalBatch, as_survival

GAMMA_SWEEP = (0.0, 0.1, 0.25, 0.5, 1.0, 2.5)


@dataclass(frozen=True)
class ExperimentConfig:
    modalities: tuple[str, ...] | None = None
    gamma: float = 0.5
    folds: int = 15
    holdout: float = 0.2
    unimodal_epochs: int = 50
    fusion_epochs: int = 30
    freeze_epochs: int = 5
    unimodal_lr: float = 0.005
    fusion_lr: float = 0.005
    batch_size: int | None = 64
    hidden_width: int = 64
    embedding_size: int = 16
    fusion_hidden: int = 64
    scaled_size: int | None = 8
    similarity_weight: float = 50.0
    seed: int = 0
    output_dir: str | None = None

    def __post_init__(self):
        if not 0.0 < self.holdout < 1.0:
            raise ConfigError("holdout fraction must lie in (0, 1)")
        if self.folds < 1:
            raise ConfigError("folds must be at least 1")
        if min(self.unimodal_epochs, self.fusion_epochs) < 1:
            raise ConfigError("epoch counts must be positive")
        if self.gamma < 0:
            raise ConfigError("gamma must be non-negative")


def _derive_seed(*parts) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def mc_splits(n_patients: int, folds: int, fraction: float, seed: int):
    """Independent seeded shuffles; test size = round(fraction * N).

    Splits are at patient level by construction: the returned indices
    partition patients, and all samples of a patient follow its index.
    """
    if n_patients < 5:
        raise ConfigError("Monte Carlo splits need at least 5 patients")
    if not 0.0 < fraction < 1.0:
        raise ConfigError("holdout fraction must lie in (0, 1)")
    n_test = int(round(fraction * n_patients))
    if n_test < 1 or n_patients - n_test < 2:
        raise ConfigError(f"holdout fraction {fraction} leaves a degenerate split")
    splits = []
    for fold in range(folds):
        rng = np.random.default_rng([seed, fold])
        order = rng.permutation(n_patients)
        test = np.sort(order[:n_test])
        train = np.sort(order[n_test:])
        splits.append((train, test))
    return splits


def _subset_survival(survival: SurvivalBatch, idx) -> SurvivalBatch:
    return SurvivalBatch(survival.times[idx], survival.events[idx])


def train_unimodal(blocks, survival, config: ExperimentConfig, modality: str, seed: int):
    """50-epoch single-modality run; lr decays linearly to zero."""
    survival = as_survival(survival)
    if int(np.sum(survival.events)) < 1:
        raise ConfigError(f"no events in the training fold for modality '{modality}'")
    model = CoxEmbeddingNet(
        modality=modality,
        hidden_width=config.hidden_width,
        embedding_size=config.embedding_size,
        epochs=config.unimodal_epochs,
        lr=config.unimodal_lr,
        batch_size=config.batch_size,
        seed=seed,
    )
    return model.fit(blocks, survival)


def train_fusion(
    encoders,
    blocks_per_modality,
    survival,
    config: ExperimentConfig,
    seed: int,
    gamma: float | None = None,
    gating: bool = True,
    combine: str = "tensor-fusion",
):
    model = OrthogonalFusionNet(
        encoders=list(encoders),
        gamma=config.gamma if gamma is None else gamma,
        scaled_size=config.scaled_size,
        hidden_width=config.fusion_hidden,
        epochs=config.fusion_epochs,
        freeze_epochs=config.freeze_epochs,
        lr=config.fusion_lr,
        batch_size=config.batch_size,
        seed=seed,
        gating=gating,
        combine=combine,
    )
    return model.fit(blocks_per_modality, survival)


def combination_design(blocks_per_modality):
    """Cartesian product of each modality's samples, per patient.

    Returns one stacked matrix per modality plus (start, stop) row slices
    per patient, so a single predict call covers every combination.
    """
    if not blocks_per_modality:
        raise ConfigError("need at least one modality")
    n = len(blocks_per_modality[0])
    rows = [[] for _ in blocks_per_modality]
    slices = []
    start = 0
    for pi in range(n):
        counts = [blocks[pi].shape[0] for blocks in blocks_per_modality]
        for combo in itertools.product(*(range(c) for c in counts)):
            for mi, si in enumerate(combo):
                rows[mi].append(blocks_per_modality[mi][pi][si])
        stop = start + int(np.prod(counts))
        slices.append((start, stop))
        start = stop
    return [np.asarray(r) for r in rows], slices


def aggregate_patient_risk(thetas) -> float:
    """75th percentile (linear interpolation) of per-combination risks."""
    thetas = np.asarray(thetas, dtype=float)
    if thetas.size == 0:
        raise ConfigError("no risk scores to aggregate")
    return float(np.percentile(thetas, 75))


def _patient_risks(predict, blocks_per_modality, multimodal: bool) -> np.ndarray:
    mats, slices = combination_design(blocks_per_modality)
    theta = predict(mats if multimodal else mats[0])
    return np.array([aggregate_patient_risk(theta[a:b]) for a, b in slices])


def naive_late_fusion(per_modality_scores) -> np.ndarray:
    """Arithmetic mean of unimodal risk scores."""
    if len(per_modality_scores) < 2:
        raise ConfigError("late fusion needs at least two modalities")
    return np.mean(np.asarray(per_modality_scores, dtype=float), axis=0)


@dataclass(frozen=True)
class VariantResult:
    key: str
    fold_c: np.ndarray
    pooled_ids: np.ndarray
    pooled_scores: np.ndarray
    histories: tuple = ()

    @property
    def median_c(self) -> float:
        return float(np.median(self.fold_c))

    @property
    def std_c(self) -> float:
        return float(np.std(self.fold_c))

    @property
    def iqr(self) -> tuple[float, float]:
        return (
            float(np.percentile(self.fold_c, 25)),
            float(np.percentile(self.fold_c, 75)),
        )


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    modalities: tuple[str, ...]
    variant_order: tuple[str, ...]
    variants: dict
    comparisons: dict
    km_curves: dict
    hazard: HazardRatio | None
    logrank: TestResult | None
    fold_sizes: tuple[tuple[int, int], ...]

    def __post_init__(self):
        for v in self.variants.values():
            if len(v.fold_c) != self.config.folds:
                raise ConfigError("fold count disagrees with config")

    def to_summary(self) -> dict:
        cfg = asdict(self.config)
        cfg["modalities"] = list(self.modalities)
        out = {
            "config": cfg,
            "variants": {
                key: {
                    "median_c": v.median_c,
                    "std_c": v.std_c,
                    "iqr": list(v.iqr),
                    "fold_c": [float(c) for c in v.fold_c],
                }
                for key, v in self.variants.items()
            },
            "comparisons": {k: float(p) for k, p in self.comparisons.items()},
        }
        if self.hazard is not None:
            out["hazard_ratio"] = {
                "hr": self.hazard.hazard_ratio,
                "ci_low": self.hazard.ci_low,
                "ci_high": self.hazard.ci_high,
            }
        if self.logrank is not None:
            out["logrank"] = {"chi2": self.logrank.statistic, "p": self.logrank.p_value}
        return out


def _fusion_variant_defs(config, gammas, ablation):
    defs = [("fusion", config.gamma, True, "tensor-fusion")]
    if gammas is not None:
        for g in gammas:
            if abs(g - config.gamma) < 1e-12:
                continue  # the primary variant already covers it
            defs.append((f"fusion:gamma={g:g}", float(g), True, "tensor-fusion"))
    if ablation:
        for cell in ablation_grid()[1:]:
            label = "fusion:" + cell["combine"] + ("" if cell["gating"] else "+no-gating")
            defs.append((label, config.gamma, cell["gating"], cell["combine"]))
    return defs


def run_experiment(
    data,
    config: ExperimentConfig,
    *,
    gammas=None,
    ablation: bool = False,
    correlation: bool = False,
    group_analysis: bool = True,
) -> ExperimentResult:
    """Full battery: unimodal models, late fusion, fusion variants.

    Every fusion variant reuses the fold's unimodal encoders, so a gamma
    sweep or the ablation grid costs one extra fusion fit per cell, not a
    re-run of the whole pipeline. Any failure aborts with its fold id.
    ``group_analysis=False`` skips the pooled risk-group statistics (KM,
    hazard ratio, log-rank), for callers that only need fold C-indices.
    """
    data = getattr(data, "data", data)
    names = list(config.modalities) if config.modalities else list(data.modality_names)
    for name in names:
        if name not in data.modality_names:
            raise ConfigError(f"cohort has no modality named '{name}'")
    if not names:
        raise ConfigError("at least one modality is required")
    indices = [data.modality_names.index(n) for n in names]
    multimodal = len(names) >= 2

    splits = mc_splits(data.n_patients, config.folds, config.holdout, config.seed)
    fusion_defs = _fusion_variant_defs(config, gammas, ablation) if multimodal else []

    keys = [f"unimodal:{n}" for n in names]
    if multimodal:
        keys.append("late-fusion")
        keys.extend(d[0] for d in fusion_defs)
        if correlation:
            keys.append("correlation")
    fold_c = {k: [] for k in keys}
    pooled = {k: {} for k in keys}
    histories = {d[0]: [] for d in fusion_defs}

    for fold, (train_idx, test_idx) in enumerate(splits):
        if set(train_idx) & set(test_idx):
            raise ConfigError(f"fold {fold}: patient leaked across the split")
        try:
            _run_fold(
                data,
                config,
                fold,
                train_idx,
                test_idx,
                indices,
                names,
                fusion_defs,
                correlation and multimodal,
                fold_c,
                pooled,
                histories,
            )
        except (ConfigError, NumericError) as err:
            raise type(err)(f"fold {fold}: {err}") from err

    variants = {}
    for key in keys:
        ids = np.array(sorted(pooled[key]), dtype=int)
        scores = np.array([float(np.mean(pooled[key][i])) for i in ids])
        variants[key] = VariantResult(
            key=key,
            fold_c=np.array(fold_c[key]),
            pooled_ids=ids,
            pooled_scores=scores,
            histories=tuple(histories.get(key, ())),
        )

    primary = "fusion" if multimodal else keys[0]
    if group_analysis:
        km_curves, hazard, logrank = _group_analysis(variants[primary], data.survival)
    else:
        km_curves, hazard, logrank = {}, None, None
    comparisons = {}
    if multimodal:
        for key in keys:
            if key == "fusion":
                continue
            test = mann_whitney_u(variants["fusion"].fold_c, variants[key].fold_c)
            comparisons[f"fusion|{key}"] = test.p_value

    return ExperimentResult(
        config=config,
        modalities=tuple(names),
        variant_order=tuple(keys),
        variants=variants,
        comparisons=comparisons,
        km_curves=km_curves,
        hazard=hazard,
        logrank=logrank,
        fold_sizes=tuple((len(tr), len(te)) for tr, te in splits),
    )


def _run_fold(
    data,
    config,
    fold,
    train_idx,
    test_idx,
    indices,
    names,
    fusion_defs,
    correlation,
    fold_c,
    pooled,
    histories,
):
    train_surv = _subset_survival(data.survival, train_idx)
    test_surv = _subset_survival(data.survival, test_idx)
    train_blocks = [[data.samples[mi][p] for p in train_idx] for mi in indices]
    test_blocks = [[data.samples[mi][p] for p in test_idx] for mi in indices]

    def record(key, scores):
        fold_c[key].append(concordance_index(scores, test_surv))
        for pid, score in zip(test_idx, scores):
            pooled[key].setdefault(int(pid), []).append(float(score))

    encoders = []
    unimodal_scores = []
    for mi, name in enumerate(names):
        model = train_unimodal(
            train_blocks[mi], train_surv, config, name, _derive_seed(config.seed, fold, mi)
        )
        encoders.append(model)
        scores = _patient_risks(model.predict, [test_blocks[mi]], multimodal=False)
        unimodal_scores.append(scores)
        record(f"unimodal:{name}", scores)

    if len(names) < 2:
        return
    record("late-fusion", naive_late_fusion(unimodal_scores))

    for vi, (key, gamma, gating, combine) in enumerate(fusion_defs):
        model = train_fusion(
            encoders,
            train_blocks,
            train_surv,
            config,
            _derive_seed(config.seed, fold, 100 + vi),
            gamma=gamma,
            gating=gating,
            combine=combine,
        )
        histories[key].append(model.history_)
        record(key, _patient_risks(model.predict, test_blocks, multimodal=True))

    if correlation:
        model = CorrelationFusionNet(
            encoders=encoders,
            similarity_weight=config.similarity_weight,
            hidden_width=config.fusion_hidden,
            epochs=config.fusion_epochs,
            freeze_epochs=config.freeze_epochs,
            lr=config.fusion_lr,
            batch_size=config.batch_size,
            seed=_derive_seed(config.seed, fold, 999),
        )
        model.fit(train_blocks, train_surv)
        record("correlation", _patient_risks(model.predict, test_blocks, multimodal=True))


def _group_analysis(variant: VariantResult, survival: SurvivalBatch):
    ids = variant.pooled_ids
    scores = variant.pooled_scores
    pooled_surv = _subset_survival(survival, ids)
    labels = assign_risk_groups(scores)
    if labels.min() == labels.max():
        raise ConfigError(
            "risk grouping is degenerate: every pooled score fell on one side of zero"
        )
    low = _subset_survival(pooled_surv, labels == 0)
    high = _subset_survival(pooled_surv, labels == 1)
    km_curves = {"low": km_estimate(low), "high": km_estimate(high)}
    hazard = hazard_ratio(labels, pooled_surv)
    logrank = log_rank_test(low, high)
    return km_curves, hazard, logrank


# ---------------------------------------------------------------------------
# report tables


def folds_table(result: ExperimentResult):
    """Rows (variant, fold, c_index) in stable order."""
    rows = []
    for key in result.variant_order:
        for fold, c in enumerate(result.variants[key].fold_c):
            rows.append((key, fold, float(c)))
    return rows


def risk_table(result: ExperimentResult, variant: str | None = None):
    key = variant or ("fusion" if "fusion" in result.variants else result.variant_order[0])
    v = result.variants[key]
    labels = assign_risk_groups(v.pooled_scores)
    return [
        (int(pid), float(score), int(group))
        for pid, score, group in zip(v.pooled_ids, v.pooled_scores, labels)
    ]


def ablation_table(result: ExperimentResult):
    """The four-cell grid: combine mode x gating, medians across folds."""
    rows = []
    for cell in ablation_grid():
        key = "fusion" if cell == ablation_grid()[0] else (
            "fusion:" + cell["combine"] + ("" if cell["gating"] else "+no-gating")
        )
        if key not in result.variants:
            raise ConfigError("result does not contain the ablation variants")
        v = result.variants[key]
        rows.append(
            {
                "combine": cell["combine"],
                "gating": cell["gating"],
                "median_c": v.median_c,
                "std_c": v.std_c,
            }
        )
    return rows


def gamma_table(result: ExperimentResult):
    """Median concordance per orthogonalization weight, ascending gamma."""
    rows = []
    for key in result.variant_order:
        if key == "fusion":
            gamma = result.config.gamma
        elif key.startswith("fusion:gamma="):
            gamma = float(key.split("=", 1)[1])
        else:
            continue
        v = result.variants[key]
        rows.append({"gamma": gamma, "median_c": v.median_c, "std_c": v.std_c})
    rows.sort(key=lambda r: r["gamma"])
    return rows


def compare_table(data, config: ExperimentConfig):
    """Concordance per modality combination, with and without the
    orthogonalization penalty. Single-modality rows carry no gamma."""
    data = getattr(data, "data", data)
    names = list(config.modalities) if config.modalities else list(data.modality_names)
    if len(names) < 2:
        raise ConfigError("comparison table needs at least two modalities")
    rows = []
    full_run = None
    for size in range(2, len(names) + 1):
        for combo in itertools.combinations(names, size):
            cfg = ExperimentConfig(**{**asdict(config), "modalities": combo})
            run = run_experiment(data, cfg, gammas=(0.0,), group_analysis=False)
            if len(combo) == len(names):
                full_run = run
            zero_key = "fusion" if config.gamma == 0.0 else "fusion:gamma=0"
            rows.append(
                {
                    "modalities": "+".join(combo),
                    "gamma": 0.0,
                    "median_c": run.variants[zero_key].median_c,
                    "std_c": run.variants[zero_key].std_c,
                }
            )
            if config.gamma != 0.0:
                rows.append(
                    {
                        "modalities": "+".join(combo),
                        "gamma": config.gamma,
                        "median_c": run.variants["fusion"].median_c,
                        "std_c": run.variants["fusion"].std_c,
                    }
                )
    unimodal_rows = []
    for name in names:
        v = full_run.variants[f"unimodal:{name}"]
        unimodal_rows.append(
            {"modalities": name, "gamma": "", "median_c": v.median_c, "std_c": v.std_c}
        )
    return unimodal_rows + rows
