"""10-fold measurement: corr-vs-DOF margins on both presets, weight grid."""
import time

import numpy as np

from orthofusion.datasets import CohortSpec, ModalitySpec, complementary_preset, generate, redundant_preset
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
from orthofusion.metrics import concordance_index

WEIGHTS = (20.0, 50.0)
FOLDS = 10


def redundant_low_noise(n_patients=400, seed=8):
    spec = redundant_preset(n_patients=n_patients, seed=seed)
    return CohortSpec(
        n_patients=spec.n_patients,
        modalities=spec.modalities,
        noise=0.35,
        sample_jitter=spec.sample_jitter,
        baseline_hazard=spec.baseline_hazard,
        shared_effect=spec.shared_effect,
        unique_effects=spec.unique_effects,
        censoring_target=spec.censoring_target,
        seed=spec.seed,
    )


def battery(spec, label):
    data = generate(spec).data
    config = ExperimentConfig(seed=1, folds=FOLDS)
    names = list(data.modality_names)
    fold_c = {}
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
        m = train_fusion(
            encoders, train_blocks, train_surv, config, _derive_seed(config.seed, fold, 100)
        )
        record("dof", _patient_risks(m.predict, test_blocks, multimodal=True))
        for w in WEIGHTS:
            cm = CorrelationFusionNet(
                encoders=encoders,
                similarity_weight=w,
                hidden_width=config.fusion_hidden,
                epochs=config.fusion_epochs,
                freeze_epochs=config.freeze_epochs,
                lr=config.fusion_lr,
                batch_size=config.batch_size,
                seed=_derive_seed(config.seed, fold, 999),
            ).fit(train_blocks, train_surv)
            record(f"corr:w{w}", _patient_risks(cm.predict, test_blocks, multimodal=True))
        print(f"  [{label}] fold {fold} done {time.time() - t0:.0f}s", flush=True)

    print(f"== {label} ==", flush=True)
    meds = {k: float(np.median(v)) for k, v in fold_c.items()}
    for k in sorted(meds):
        print(f"  {k:16s} median={meds[k]:.3f}")
    dof = meds["dof"]
    for w in WEIGHTS:
        print(f"  margin dof-corr:w{w} = {dof - meds[f'corr:w{w}']:+.3f}")


battery(complementary_preset(n_patients=400, seed=8), "complementary-s8")
battery(redundant_preset(n_patients=400, seed=8), "redundant-s8")
battery(redundant_low_noise(), "redundant-lownoise-s8")
