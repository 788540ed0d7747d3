"""Attention-gated tensor fusion of unimodal embeddings, plus baselines.

The fusion model consumes already-trained unimodal estimators, deep-copies
their encoder weights, and trains the fusion layers (then everything
jointly) against the combined survival + orthogonalization objective. A
correlation-driven baseline with the opposite inductive bias lives here
too, sharing the same training protocol so comparisons isolate the fusion
mechanism.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .autodiff import (
    Adam,
    Tensor,
    activation,
    add,
    add_const,
    backward,
    bilinear_forms,
    concat_rows,
    constant,
    elementwise_mul,
    kron_cols,
    linear,
    matmul,
    mul_const,
    param,
    pow_const,
    sigmoid,
    sub,
    sum_all,
    uniform_fan_in,
)
from .encoders import (
    _MODEL_REGISTRY,
    _as_design_matrix,
    _CheckpointMixin,
    _epoch_matrix,
    _batch_survival,
    _epoch_batches,
    _resolve_samples,
    clone_params,
    register_model,
    risk_head,
    training_epoch,
)
from .losses import combined_loss, cox_pl_loss
from .metrics import concordance_index
from .validation import ConfigError, as_survival

# pre-fusion scaled embedding width by modality count
_SCALED_SIZE_BY_M = {2: 32, 3: 16, 4: 8}

_COMBINE_MODES = ("tensor-fusion", "concatenation")


def default_scaled_size(n_modalities: int) -> int:
    if n_modalities not in _SCALED_SIZE_BY_M:
        raise ConfigError(
            f"no default scaled size for {n_modalities} modalities; pass scaled_size"
        )
    return _SCALED_SIZE_BY_M[n_modalities]


def init_attention_params(
    rng: np.random.Generator, prefix: str, l1: int, l2: int, n_modalities: int
) -> dict[str, Tensor]:
    """Bilinear gate tensor + bias and the linear pre-fusion scaling layer."""
    ctx_width = (n_modalities - 1) * l1
    bound = 1.0 / np.sqrt(l1 * ctx_width)
    params = {
        prefix + ".wa": param(rng.uniform(-bound, bound, size=(l1, l2, ctx_width)), prefix + ".wa"),
        prefix + ".abias": param(np.zeros((l2, 1)), prefix + ".abias"),
        prefix + ".ws": param(uniform_fan_in(rng, l2, l1), prefix + ".ws"),
        prefix + ".bs": param(np.zeros((l2, 1)), prefix + ".bs"),
    }
    return params


def scale_embedding(h: Tensor, params: dict[str, Tensor], prefix: str) -> Tensor:
    return linear(h, params[prefix + ".ws"], params[prefix + ".bs"])


def attention_gate(
    h: Tensor, others: list[Tensor], params: dict[str, Tensor], prefix: str
) -> Tensor:
    """Sigmoid bilinear gate against the other modalities, applied to the
    scaled embedding: sigmoid(h^T W_A ctx + bias) * (W_S h + b_S)."""
    if not others:
        raise ConfigError("attention gating needs at least one other modality")
    ctx = concat_rows(list(others))
    pre = bilinear_forms(h, params[prefix + ".wa"], ctx)
    n = h.shape[1]
    tiled_bias = matmul(params[prefix + ".abias"], constant(np.ones((1, n))))
    gate = sigmoid(add(pre, tiled_bias))
    return elementwise_mul(gate, scale_embedding(h, params, prefix))


def tensor_fuse(gated: list[Tensor]) -> Tensor:
    """Per-patient Kronecker product of [1; h_m] across modalities.

    Index order: modality 1 varies slowest. The prepended 1 keeps every
    lower-order interaction (including each unimodal block) in the output.
    """
    if len(gated) < 2:
        raise ConfigError("tensor fusion needs at least two modalities")
    n = gated[0].shape[1]
    fused = None
    for g in gated:
        if g.shape[1] != n:
            raise ConfigError("fused modalities must cover the same patients")
        with_one = concat_rows([constant(np.ones((1, n))), g])
        fused = with_one if fused is None else kron_cols(fused, with_one)
    return fused


def fused_width(n_modalities: int, scaled_size: int, combine: str) -> int:
    if combine == "tensor-fusion":
        return (scaled_size + 1) ** n_modalities
    return n_modalities * scaled_size


def fuse_forward(
    embeddings: list[Tensor],
    params: dict[str, Tensor],
    gating: bool = True,
    combine: str = "tensor-fusion",
) -> tuple[Tensor, Tensor]:
    """Gate (optional), combine, and run the post-fusion stack.

    Returns (fused embedding h_F, risk scores theta).
    """
    if combine not in _COMBINE_MODES:
        raise ConfigError(f"combine must be one of {_COMBINE_MODES}")
    gated = []
    for i, h in enumerate(embeddings):
        prefix = f"fuse.m{i}"
        if gating:
            others = [e for j, e in enumerate(embeddings) if j != i]
            gated.append(attention_gate(h, others, params, prefix))
        else:
            gated.append(scale_embedding(h, params, prefix))
    fused = tensor_fuse(gated) if combine == "tensor-fusion" else concat_rows(gated)
    h_f = activation(linear(fused, params["fuse.phi0.w"], params["fuse.phi0.b"]), "relu")
    h_f = activation(linear(h_f, params["fuse.phi1.w"], params["fuse.phi1.b"]), "relu")
    theta = risk_head(h_f, params["head.beta"], params["head.bias"])
    return h_f, theta


def ablation_grid() -> list[dict]:
    """The four gating x combination variants, default configuration first."""
    return [
        {"gating": True, "combine": "tensor-fusion"},
        {"gating": True, "combine": "concatenation"},
        {"gating": False, "combine": "tensor-fusion"},
        {"gating": False, "combine": "concatenation"},
    ]


def _build_shell(spec: dict, view: dict[str, Tensor]):
    """Reconstruct a unimodal estimator around an external parameter view."""
    cls = _MODEL_REGISTRY[spec["model"]]
    shell = cls(**spec["config"])
    for key, value in spec["fitted"].items():
        setattr(shell, key, value)
    shell.params_ = view
    return shell


class _FusionBase(_CheckpointMixin, BaseEstimator):
    """Shared plumbing: encoder adoption, schedules, prediction."""

    def _adopt_encoders(self):
        if not self.encoders or len(self.encoders) < 2:
            raise ConfigError("fusion needs at least two fitted unimodal models")
        sizes = set()
        specs = []
        for i, enc in enumerate(self.encoders):
            if not hasattr(enc, "params_"):
                raise ConfigError(f"unimodal model {i} is not fitted")
            sizes.add(enc.embedding_size)
            specs.append(
                {
                    "model": type(enc).__name__,
                    "config": enc.get_params(),
                    "fitted": enc._fitted_state(),
                }
            )
            for name, tensor in clone_params(enc.params_).items():
                self.params_[f"m{i}.{name}"] = tensor
        if len(sizes) != 1:
            raise ConfigError("all unimodal models must share one embedding size")
        self.encoder_specs_ = specs
        self._rebuild_shells()
        return sizes.pop()

    def _rebuild_shells(self):
        self._shells = []
        for i, spec in enumerate(self.encoder_specs_):
            prefix = f"m{i}."
            view = {
                name[len(prefix) :]: tensor
                for name, tensor in self.params_.items()
                if name.startswith(prefix)
            }
            self._shells.append(_build_shell(spec, view))

    def _restore_extra(self) -> None:
        self._rebuild_shells()

    def _checkpoint_config(self) -> dict:
        config = self.get_params()
        config.pop("encoders")
        return config

    def _resolve_designs(self, X):
        if not isinstance(X, (list, tuple)) or len(X) != len(self._shells):
            raise ConfigError("expected one design block per modality")
        return [_resolve_samples(block) for block in X]

    def _epoch_lr(self, epoch: int) -> float:
        # constant through the first 9 epochs, then linear decay toward 0
        if epoch < 9 or self.epochs <= 9:
            return self.lr
        return self.lr * (self.epochs - epoch) / (self.epochs - 9)

    def _embeddings_for(self, matrices) -> list[Tensor]:
        return [
            shell._embedding_graph(constant(m.T)) for shell, m in zip(self._shells, matrices)
        ]

    def _require_fitted(self):
        if not hasattr(self, "params_") or not hasattr(self, "_shells"):
            raise ConfigError("model is not fitted")

    def _inference_matrices(self, X):
        self._require_fitted()
        if not isinstance(X, (list, tuple)) or len(X) != len(self._shells):
            raise ConfigError("expected one design matrix per modality")
        mats = [_as_design_matrix(m) for m in X]
        ns = {m.shape[0] for m in mats}
        if len(ns) != 1:
            raise ConfigError("modalities disagree on patient count")
        return mats

    def predict(self, X) -> np.ndarray:
        mats = self._inference_matrices(X)
        _, theta = self._forward(self._embeddings_for(mats))
        return theta.value.ravel()

    def transform(self, X) -> np.ndarray:
        mats = self._inference_matrices(X)
        h_f, _ = self._forward(self._embeddings_for(mats))
        return h_f.value.T

    def modality_embeddings(self, X) -> list[np.ndarray]:
        """Per-modality embeddings as (N, l1) arrays, post-encoder."""
        mats = self._inference_matrices(X)
        return [e.value.T for e in self._embeddings_for(mats)]

    def score(self, X, y) -> float:
        return concordance_index(self.predict(X), as_survival(y))


@register_model
class OrthogonalFusionNet(_FusionBase):
    """Attention-gated tensor fusion trained with the combined Cox +
    orthogonalization objective.

    Training schedule: encoder weights frozen for the first ``freeze_epochs``
    epochs (fusion layers only), joint training afterwards; the learning
    rate stays at ``lr`` for nine epochs and then decays linearly.
    """

    def __init__(
        self,
        encoders=None,
        gamma: float = 0.5,
        scaled_size: int | None = None,
        hidden_width: int = 128,
        epochs: int = 30,
        freeze_epochs: int = 5,
        lr: float = 0.02,
        batch_size: int | None = None,
        seed: int = 0,
        gating: bool = True,
        combine: str = "tensor-fusion",
        mmo_scaling: str = "difference",
    ):
        self.encoders = encoders
        self.gamma = gamma
        self.scaled_size = scaled_size
        self.hidden_width = hidden_width
        self.epochs = epochs
        self.freeze_epochs = freeze_epochs
        self.lr = lr
        self.batch_size = batch_size
        self.seed = seed
        self.gating = gating
        self.combine = combine
        self.mmo_scaling = mmo_scaling

    def fit(self, X, y):
        if self.combine not in _COMBINE_MODES:
            raise ConfigError(f"combine must be one of {_COMBINE_MODES}")
        if self.gamma < 0:
            raise ConfigError("gamma must be non-negative")
        self.params_ = {}
        l1 = self._adopt_encoders()
        designs = self._resolve_designs(X)
        survival = as_survival(y)
        for block in designs:
            n = len(block) if isinstance(block, list) else block.shape[0]
            if n != survival.n:
                raise ConfigError("design blocks and survival outcomes disagree on N")
        m = len(self._shells)
        l2 = self.scaled_size if self.scaled_size is not None else default_scaled_size(m)
        rng = np.random.default_rng(self.seed)
        for i in range(m):
            self.params_.update(init_attention_params(rng, f"fuse.m{i}", l1, l2, m))
        width = fused_width(m, l2, self.combine)
        self.params_["fuse.phi0.w"] = param(
            uniform_fan_in(rng, self.hidden_width, width), "fuse.phi0.w"
        )
        self.params_["fuse.phi0.b"] = param(np.zeros((self.hidden_width, 1)), "fuse.phi0.b")
        self.params_["fuse.phi1.w"] = param(
            uniform_fan_in(rng, self.hidden_width, self.hidden_width), "fuse.phi1.w"
        )
        self.params_["fuse.phi1.b"] = param(np.zeros((self.hidden_width, 1)), "fuse.phi1.b")
        self.params_["head.beta"] = param(uniform_fan_in(rng, 1, self.hidden_width), "head.beta")
        self.params_["head.bias"] = param(np.zeros((1, 1)), "head.bias")

        fusion_names = [n for n in self.params_ if n.startswith(("fuse.", "head."))]
        opt = Adam(self.params_, lr=self.lr)
        self.history_ = []
        for epoch in range(self.epochs):
            with training_epoch(epoch):
                matrices = [_epoch_matrix(block, rng) for block in designs]
                lr = self._epoch_lr(epoch)
                names = fusion_names if epoch < self.freeze_epochs else None
                totals, coxes, orthos = [], [], []
                for idx in _epoch_batches(survival.n, self.batch_size, rng):
                    embeddings = self._embeddings_for([m[idx] for m in matrices])
                    _, theta = self._forward(embeddings)
                    combo = combined_loss(
                        theta,
                        _batch_survival(survival, idx),
                        embeddings,
                        gamma=self.gamma,
                        scaling=self.mmo_scaling,
                    )
                    backward(combo.total)
                    opt.step(lr=lr, names=names)
                    totals.append(combo.value)
                    coxes.append(combo.cox)
                    orthos.append(combo.orthogonality)
                self.history_.append(
                    {
                        "total": float(np.mean(totals)),
                        "cox": float(np.mean(coxes)),
                        "orthogonality": (
                            None if orthos[0] is None else float(np.mean(orthos))
                        ),
                    }
                )
        self.scaled_size_ = l2
        self.n_modalities_ = m
        return self

    def _forward(self, embeddings: list[Tensor]) -> tuple[Tensor, Tensor]:
        return fuse_forward(embeddings, self.params_, gating=self.gating, combine=self.combine)

    def _fitted_state(self) -> dict:
        return {
            "scaled_size_": self.scaled_size_,
            "n_modalities_": self.n_modalities_,
            "history_": list(self.history_),
            "encoder_specs_": self.encoder_specs_,
        }


@register_model
class CorrelationFusionNet(_FusionBase):
    """Correlation-driven fusion baseline.

    Embeddings are averaged (not gated or tensor-multiplied) and pushed
    through a deeper post-fusion stack; the loss rewards cross-modal
    similarity instead of penalizing shared directions. The similarity is
    computed on batch-centered embeddings so it behaves like a
    correlation; without centering a model can score near 1 by giving
    every patient the same large offset while hiding modality-specific
    signal in the residual, which enforces nothing. Same freeze/decay
    protocol as the orthogonal fusion model.
    """

    def __init__(
        self,
        encoders=None,
        similarity_weight: float = 50.0,
        hidden_width: int = 128,
        depth: int = 4,
        epochs: int = 30,
        freeze_epochs: int = 5,
        lr: float = 0.02,
        batch_size: int | None = None,
        seed: int = 0,
    ):
        self.encoders = encoders
        self.similarity_weight = similarity_weight
        self.hidden_width = hidden_width
        self.depth = depth
        self.epochs = epochs
        self.freeze_epochs = freeze_epochs
        self.lr = lr
        self.batch_size = batch_size
        self.seed = seed

    def fit(self, X, y):
        if self.similarity_weight < 0:
            raise ConfigError("similarity_weight must be non-negative")
        if self.depth < 1:
            raise ConfigError("depth must be at least 1")
        self.params_ = {}
        l1 = self._adopt_encoders()
        designs = self._resolve_designs(X)
        survival = as_survival(y)
        for block in designs:
            n = len(block) if isinstance(block, list) else block.shape[0]
            if n != survival.n:
                raise ConfigError("design blocks and survival outcomes disagree on N")
        rng = np.random.default_rng(self.seed)
        width = l1
        for d in range(self.depth):
            self.params_[f"fuse.phi{d}.w"] = param(
                uniform_fan_in(rng, self.hidden_width, width), f"fuse.phi{d}.w"
            )
            self.params_[f"fuse.phi{d}.b"] = param(
                np.zeros((self.hidden_width, 1)), f"fuse.phi{d}.b"
            )
            width = self.hidden_width
        self.params_["head.beta"] = param(uniform_fan_in(rng, 1, width), "head.beta")
        self.params_["head.bias"] = param(np.zeros((1, 1)), "head.bias")

        fusion_names = [n for n in self.params_ if n.startswith(("fuse.", "head."))]
        opt = Adam(self.params_, lr=self.lr)
        self.history_ = []
        for epoch in range(self.epochs):
            with training_epoch(epoch):
                matrices = [_epoch_matrix(block, rng) for block in designs]
                lr = self._epoch_lr(epoch)
                names = fusion_names if epoch < self.freeze_epochs else None
                totals, coxes, sims = [], [], []
                for idx in _epoch_batches(survival.n, self.batch_size, rng):
                    embeddings = self._embeddings_for([m[idx] for m in matrices])
                    _, theta = self._forward(embeddings)
                    cox = cox_pl_loss(theta, _batch_survival(survival, idx))
                    similarity = mean_pairwise_cosine(embeddings, center=True)
                    loss = add(cox, mul_const(similarity, -self.similarity_weight))
                    backward(loss)
                    opt.step(lr=lr, names=names)
                    totals.append(loss.item())
                    coxes.append(cox.item())
                    sims.append(similarity.item())
                self.history_.append(
                    {
                        "total": float(np.mean(totals)),
                        "cox": float(np.mean(coxes)),
                        "similarity": float(np.mean(sims)),
                    }
                )
        self.n_modalities_ = len(self._shells)
        return self

    def _forward(self, embeddings: list[Tensor]) -> tuple[Tensor, Tensor]:
        pooled = embeddings[0]
        for emb in embeddings[1:]:
            pooled = add(pooled, emb)
        h = mul_const(pooled, 1.0 / len(embeddings))
        for d in range(self.depth):
            h = activation(
                linear(h, self.params_[f"fuse.phi{d}.w"], self.params_[f"fuse.phi{d}.b"]), "relu"
            )
        theta = risk_head(h, self.params_["head.beta"], self.params_["head.bias"])
        return h, theta

    def _fitted_state(self) -> dict:
        return {
            "n_modalities_": self.n_modalities_,
            "history_": list(self.history_),
            "encoder_specs_": self.encoder_specs_,
        }


def mean_pairwise_cosine(embeddings: list[Tensor], center: bool = False) -> Tensor:
    """Mean cosine similarity over modality pairs and patients.

    With ``center=True`` every embedding dimension has its batch mean
    subtracted before the cosine, so the score reads as a correlation: a
    constant component shared by all patients counts for nothing, and the
    loss can only be satisfied by genuinely co-varying embeddings.
    Differentiable; norms are stabilized with a small epsilon so zero
    embeddings stay finite.
    """
    if len(embeddings) < 2:
        raise ConfigError("cosine similarity needs at least two modalities")
    l1 = embeddings[0].shape[0]
    n = embeddings[0].shape[1]
    if center:
        batch_mean = constant(np.full((n, n), 1.0 / n))
        embeddings = [sub(e, matmul(e, batch_mean)) for e in embeddings]
    row_ones = constant(np.ones((1, l1)))

    def col_norm(e):
        return pow_const(add_const(matmul(row_ones, elementwise_mul(e, e)), 1e-12), 0.5)

    norms = [col_norm(e) for e in embeddings]
    total = None
    pairs = 0
    for i in range(len(embeddings)):
        for j in range(i + 1, len(embeddings)):
            dots = matmul(row_ones, elementwise_mul(embeddings[i], embeddings[j]))
            cos = elementwise_mul(dots, pow_const(elementwise_mul(norms[i], norms[j]), -1.0))
            total = cos if total is None else add(total, cos)
            pairs += 1
    return mul_const(sum_all(total), 1.0 / (pairs * n))
