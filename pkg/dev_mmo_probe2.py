"""Which lever makes the logged MMO term fall between epochs 6 and 30?

Sweeps shared-signal strength and fusion lr on one fold, gamma 0.5, batch 64.
"""
import numpy as np

from orthofusion.datasets import CohortSpec, ModalitySpec, generate
from orthofusion.experiment import (
    ExperimentConfig,
    _derive_seed,
    _subset_survival,
    mc_splits,
    train_fusion,
    train_unimodal,
)


def preset(n, seed, shared_loading, shared_effect, unique_loading=2.5):
    return CohortSpec(
        n_patients=n,
        modalities=(
            ModalitySpec("radiology", 56, shared_loading=shared_loading,
                         unique_loading=unique_loading, samples=(2, 4)),
            ModalitySpec("genomic", 80, shared_loading=shared_loading,
                         unique_loading=unique_loading),
            ModalitySpec("clinical", 80, shared_loading=shared_loading,
                         unique_loading=unique_loading),
        ),
        noise=0.15, sample_jitter=0.05, baseline_hazard=0.1,
        shared_effect=shared_effect, unique_effects=(1.3, 1.0, 0.7),
        censoring_target=0.3, seed=seed,
    )


def one_fold(label, spec, lr):
    data = generate(spec).data
    config = ExperimentConfig(seed=2, folds=10, fusion_lr=lr)
    names = list(data.modality_names)
    tr, _ = next(iter(mc_splits(data.n_patients, config.folds, config.holdout, config.seed)))
    train_surv = _subset_survival(data.survival, tr)
    train_blocks = [[data.samples[mi][p] for p in tr] for mi in range(len(names))]
    encoders = [
        train_unimodal(train_blocks[mi], train_surv, config, name, _derive_seed(2, 0, mi))
        for mi, name in enumerate(names)
    ]
    m = train_fusion(encoders, train_blocks, train_surv, config, _derive_seed(2, 0, 100), gamma=0.5)
    orth = [h["orthogonality"] for h in m.history_]
    print(f"== {label} ==", flush=True)
    print("  orth:", " ".join(f"{v:.3f}" for v in orth))
    print(f"  e5 {orth[5]:.4f} -> e29 {orth[29]:.4f}  drop={orth[29] < orth[5]}")


one_fold("shared 1.0 / eff 1.0 lr5e-3 (preset E)", preset(400, 8, 1.0, 1.0), 0.005)
one_fold("shared 1.5 / eff 1.0 lr5e-3", preset(400, 8, 1.5, 1.0), 0.005)
one_fold("shared 2.0 / eff 1.5 lr5e-3", preset(400, 8, 2.0, 1.5), 0.005)
one_fold("shared 1.0 / eff 1.0 lr2e-3", preset(400, 8, 1.0, 1.0), 0.002)
one_fold("shared 2.5 / eff 1.5 uniq 1.5 lr5e-3", preset(400, 8, 2.5, 1.5, 1.5), 0.005)
