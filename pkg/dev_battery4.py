"""Robustness check at frozen knobs: fresh dev seeds, 10 folds."""
import time

import numpy as np

from orthofusion.datasets import complementary_preset, generate, redundant_preset
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

FOLDS = 10


def battery(spec, label, split_seed):
    data = generate(spec).data
    config = ExperimentConfig(seed=split_seed, folds=FOLDS)
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
        m0 = train_fusion(
            encoders, train_blocks, train_surv, config,
            _derive_seed(config.seed, fold, 100), gamma=0.0,
        )
        record("dof:g0", _patient_risks(m0.predict, test_blocks, multimodal=True))
        cm = CorrelationFusionNet(
            encoders=encoders,
            similarity_weight=config.similarity_weight,
            hidden_width=config.fusion_hidden,
            epochs=config.fusion_epochs,
            freeze_epochs=config.freeze_epochs,
            lr=config.fusion_lr,
            batch_size=config.batch_size,
            seed=_derive_seed(config.seed, fold, 999),
        ).fit(train_blocks, train_surv)
        record("corr", _patient_risks(cm.predict, test_blocks, multimodal=True))
        print(f"  [{label}] fold {fold} {time.time() - t0:.0f}s", flush=True)

    meds = {k: float(np.median(v)) for k, v in fold_c.items()}
    best_uni_key = max((k for k in meds if k.startswith("uni:")), key=lambda k: meds[k])
    p = mann_whitney_u(np.array(fold_c["dof"]), np.array(fold_c[best_uni_key])).p_value
    print(f"== {label} ==", flush=True)
    for k in sorted(meds):
        print(f"  {k:14s} {meds[k]:.3f}")
    print(f"  dof-bestuni {meds['dof'] - meds[best_uni_key]:+.3f} (MW p={p:.4f})")
    print(f"  dof-late    {meds['dof'] - meds['late']:+.3f}")
    print(f"  dof-corr    {meds['dof'] - meds['corr']:+.3f}")
    print(f"  dof-g0      {meds['dof'] - meds['dof:g0']:+.3f}")


battery(complementary_preset(n_patients=400, seed=9), "comp-s9", split_seed=2)
battery(redundant_preset(n_patients=400, seed=9), "red-s9", split_seed=2)
battery(complementary_preset(n_patients=400, seed=10), "comp-s10", split_seed=2)
