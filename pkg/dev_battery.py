"""Dev battery: preset C + centered-cosine correlation baseline weight grid."""
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
from orthofusion.metrics import concordance_index

WEIGHTS = (2.0, 5.0, 20.0)


def battery(preset_fn, label):
    cohort = generate(preset_fn(n_patients=400, seed=8))
    data = cohort.data
    config = ExperimentConfig(seed=1, folds=3)
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
            encoders,
            train_blocks,
            train_surv,
            config,
            _derive_seed(config.seed, fold, 100),
            gamma=0.0,
        )
        record("dof:g0", _patient_risks(m0.predict, test_blocks, multimodal=True))

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
            if fold == 0:
                sims = [h["similarity"] for h in cm.history_]
                print(f"  [{label}] w={w} sim epoch1={sims[0]:.3f} epoch30={sims[-1]:.3f}", flush=True)
        print(f"  [{label}] fold {fold} done {time.time() - t0:.0f}s", flush=True)

    print(f"== {label} ==")
    uni_best = max(float(np.median(v)) for k, v in fold_c.items() if k.startswith("uni:"))
    for k in sorted(fold_c):
        print(f"  {k:16s} median={np.median(fold_c[k]):.3f} folds={[round(c, 3) for c in fold_c[k]]}")
    print(f"  best-uni={uni_best:.3f}")


battery(complementary_preset, "complementary")
battery(redundant_preset, "redundant")
