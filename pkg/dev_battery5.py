"""Preset E probe: does a stronger shared component give gamma real value?"""
import time

import numpy as np

from orthofusion.datasets import CohortSpec, ModalitySpec, generate
from orthofusion.experiment import (
    ExperimentConfig,
    _derive_seed,
    _patient_risks,
    _subset_survival,
    mc_splits,
    naive_late_fusion,
    train_fusion,
    train_unimodal,
)
from orthofusion.fusion import CorrelationFusionNet
from orthofusion.metrics import concordance_index, mann_whitney_u

GAMMAS = (0.0, 0.1, 0.25, 0.5, 1.0)
FOLDS = 10


def preset_e(n, seed):
    return CohortSpec(
        n_patients=n,
        modalities=(
            ModalitySpec("radiology", 56, shared_loading=1.0, unique_loading=2.5, samples=(2, 4)),
            ModalitySpec("genomic", 80, shared_loading=1.0, unique_loading=2.5),
            ModalitySpec("clinical", 80, shared_loading=1.0, unique_loading=2.5),
        ),
        noise=0.15, sample_jitter=0.05, baseline_hazard=0.1,
        shared_effect=1.0, unique_effects=(1.3, 1.0, 0.7),
        censoring_target=0.3, seed=seed,
    )


def battery(cohort_seed, split_seed):
    label = f"E-s{cohort_seed}"
    data = generate(preset_e(400, cohort_seed)).data
    config = ExperimentConfig(seed=split_seed, folds=FOLDS)
    names = list(data.modality_names)
    fold_c = {}
    mmo_drops = 0
    t0 = time.time()
    for fold, (tr, te) in enumerate(
        mc_splits(data.n_patients, config.folds, config.holdout, config.seed)
    ):
        train_surv = _subset_survival(data.survival, tr)
        test_surv = _subset_survival(data.survival, te)
        train_blocks = [[data.samples[mi][p] for p in tr] for mi in range(len(names))]
        test_blocks = [[data.samples[mi][p] for p in te] for mi in range(len(names))]

        def record(key, scores):
            fold_c.setdefault(key, []).append(concordance_index(scores, test_surv))

        encoders = []
        uni_scores = []
        for mi, name in enumerate(names):
            m = train_unimodal(
                train_blocks[mi], train_surv, config, name, _derive_seed(config.seed, fold, mi)
            )
            encoders.append(m)
            s = _patient_risks(m.predict, [test_blocks[mi]], multimodal=False)
            uni_scores.append(s)
            record(f"uni:{name}", s)
        record("late", naive_late_fusion(uni_scores))
        for gi, g in enumerate(GAMMAS):
            m = train_fusion(
                encoders, train_blocks, train_surv, config,
                _derive_seed(config.seed, fold, 100 + gi), gamma=g,
            )
            record(f"dof:g{g:g}", _patient_risks(m.predict, test_blocks, multimodal=True))
            if abs(g - 0.5) < 1e-9:
                orth = [h["orthogonality"] for h in m.history_]
                if orth[29] < orth[5]:
                    mmo_drops += 1
        cm = CorrelationFusionNet(
            encoders=encoders, similarity_weight=config.similarity_weight,
            hidden_width=config.fusion_hidden, epochs=config.fusion_epochs,
            freeze_epochs=config.freeze_epochs, lr=config.fusion_lr,
            batch_size=config.batch_size, seed=_derive_seed(config.seed, fold, 999),
        ).fit(train_blocks, train_surv)
        record("corr", _patient_risks(cm.predict, test_blocks, multimodal=True))
        print(f"  [{label}] fold {fold} {time.time() - t0:.0f}s", flush=True)

    meds = {k: float(np.median(v)) for k, v in fold_c.items()}
    best_uni = max(meds[k] for k in meds if k.startswith("uni:"))
    best_uni_key = max((k for k in meds if k.startswith("uni:")), key=lambda k: meds[k])
    p = mann_whitney_u(np.array(fold_c["dof:g0.5"]), np.array(fold_c[best_uni_key])).p_value
    print(f"== {label} ==", flush=True)
    for k in sorted(meds):
        print(f"  {k:14s} {meds[k]:.3f}")
    print(f"  g0.5-bestuni {meds['dof:g0.5'] - best_uni:+.3f} (MW p={p:.4f})")
    print(f"  g0.5-late    {meds['dof:g0.5'] - meds['late']:+.3f}")
    print(f"  g0.5-corr    {meds['dof:g0.5'] - meds['corr']:+.3f}")
    for g in GAMMAS[1:]:
        print(f"  g{g:g}-g0      {meds[f'dof:g{g:g}'] - meds['dof:g0']:+.3f}")
    print(f"  mmo drop 6->30 in {mmo_drops}/{FOLDS} folds")


battery(8, 2)
battery(9, 2)
