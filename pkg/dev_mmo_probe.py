"""Why does the logged MMO term rise between epochs 6 and 30?

One fold of preset E, several gammas, minibatch vs full batch. Prints the
per-epoch orthogonality trajectory and end-state embedding statistics.
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
from orthofusion.fusion import mean_pairwise_cosine
from orthofusion.linalg import nuclear_norm_value


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


def embed_stats(model, blocks):
    # one row per patient: first sample of each, keeps blocks rectangular
    mats = [np.asarray([np.atleast_2d(p)[0] for p in b], dtype=float) for b in blocks]
    embs = model._embeddings_for(mats)  # noqa: SLF001 - dev probe
    raw = float(mean_pairwise_cosine(embs).value)
    cen = float(mean_pairwise_cosine(embs, center=True).value)
    norms = [nuclear_norm_value(e.value) for e in embs]
    concat = nuclear_norm_value(np.concatenate([e.value for e in embs], axis=0))
    return raw, cen, norms, concat


data = generate(preset_e(400, 8)).data
config = ExperimentConfig(seed=2, folds=10)
names = list(data.modality_names)
tr, te = next(iter(mc_splits(data.n_patients, config.folds, config.holdout, config.seed)))
train_surv = _subset_survival(data.survival, tr)
train_blocks = [[data.samples[mi][p] for p in tr] for mi in range(len(names))]

encoders = []
for mi, name in enumerate(names):
    encoders.append(
        train_unimodal(train_blocks[mi], train_surv, config, name, _derive_seed(2, 0, mi))
    )

for label, gamma, batch in [
    ("g0.5 b64", 0.5, 64),
    ("g1.0 b64", 1.0, 64),
    ("g2.5 b64", 2.5, 64),
    ("g0.5 full", 0.5, None),
    ("g2.5 full", 2.5, None),
]:
    cfg = ExperimentConfig(seed=2, folds=10, batch_size=batch)
    m = train_fusion(encoders, train_blocks, train_surv, cfg, _derive_seed(2, 0, 100), gamma=gamma)
    orth = [h["orthogonality"] for h in m.history_]
    cox = [h["cox"] for h in m.history_]
    print(f"== {label} ==", flush=True)
    print("  orth:", " ".join(f"{v:.3f}" for v in orth))
    print(f"  cox e5 {cox[5]:.3f} -> e29 {cox[29]:.3f}")
    print(f"  orth e5 {orth[5]:.4f} -> e29 {orth[29]:.4f}  drop={orth[29] < orth[5]}")
    raw, cen, norms, concat = embed_stats(m, train_blocks)
    print(f"  end raw-cos {raw:+.3f} centered {cen:+.3f}")
    print(f"  end nuclear norms {[f'{v:.1f}' for v in norms]} concat {concat:.1f}")
