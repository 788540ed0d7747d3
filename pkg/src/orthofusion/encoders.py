"""Per-modality encoder networks and unimodal survival estimators.

Encoders map raw feature batches (columns are patients) to fixed-size
embeddings. The unimodal estimators wrap an encoder with a bounded Cox
risk head and train against the partial-likelihood loss. Estimators follow
the fit/predict/transform convention with rows-as-patients input; the
internal graphs keep patients in columns.
"""

from __future__ import annotations

import copy
import json
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .autodiff import (
    Adam,
    Tensor,
    activation,
    add_const,
    backward,
    concat_rows,
    constant,
    linear,
    mul_const,
    param,
    sigmoid,
    uniform_fan_in,
)
from .losses import cox_pl_loss
from .metrics import concordance_index
from .validation import (
    ConfigError,
    NumericError,
    SurvivalBatch,
    as_survival,
    check_positive_int,
)

CHECKPOINT_FORMAT = "orthofusion-checkpoint-v1"

# modalities encoded with the self-normalizing activation
_SNN_MODALITIES = ("genomic", "clinical")


@dataclass(frozen=True)
class EncoderConfig:
    """Width/depth/activation settings for a plain feed-forward encoder."""

    modality: str = "generic"
    input_width: int | None = None
    hidden_width: int = 128
    hidden_depth: int = 2
    embedding_size: int = 32
    activation: str | None = None

    def __post_init__(self):
        check_positive_int(self.hidden_width, "hidden_width")
        check_positive_int(self.hidden_depth, "hidden_depth")
        if self.embedding_size < 2:
            raise ConfigError("embedding_size must be at least 2")
        if self.input_width is not None:
            check_positive_int(self.input_width, "input_width")

    def resolved_activation(self) -> str:
        if self.activation is not None:
            return self.activation
        return "selu" if self.modality in _SNN_MODALITIES else "relu"


def _init_layer(rng, params, prefix: str, out_dim: int, in_dim: int) -> None:
    params[prefix + ".w"] = param(uniform_fan_in(rng, out_dim, in_dim), prefix + ".w")
    params[prefix + ".b"] = param(np.zeros((out_dim, 1)), prefix + ".b")


def _apply_layer(x: Tensor, params, prefix: str, kind: str | None) -> Tensor:
    y = linear(x, params[prefix + ".w"], params[prefix + ".b"])
    return y if kind is None else activation(y, kind)


def init_mlp_params(rng: np.random.Generator, cfg: EncoderConfig) -> dict[str, Tensor]:
    if cfg.input_width is None:
        raise ConfigError("input_width must be set before initializing parameters")
    params: dict[str, Tensor] = {}
    width = cfg.input_width
    for i in range(cfg.hidden_depth):
        _init_layer(rng, params, f"enc.h{i}", cfg.hidden_width, width)
        width = cfg.hidden_width
    _init_layer(rng, params, "enc.out", cfg.embedding_size, width)
    return params


def mlp_encode(x: Tensor, params: dict[str, Tensor], cfg: EncoderConfig) -> Tensor:
    """Feed-forward encoder: (input_width x N) -> (embedding_size x N).

    Hidden layers use the config activation; the embedding layer is linear.
    """
    if cfg.input_width is not None and x.shape[0] != cfg.input_width:
        raise ConfigError(
            f"encoder expects input width {cfg.input_width}, got {x.shape[0]}"
        )
    kind = cfg.resolved_activation()
    h = x
    for i in range(cfg.hidden_depth):
        h = _apply_layer(h, params, f"enc.h{i}", kind)
    return _apply_layer(h, params, "enc.out", None)


def init_radiology_params(
    rng: np.random.Generator,
    cfg: EncoderConfig,
    seq1_width: int,
    seq2_width: int,
    handcrafted_width: int,
) -> dict[str, Tensor]:
    w = cfg.hidden_width
    params: dict[str, Tensor] = {}
    for name, width in (("seq1", seq1_width), ("seq2", seq2_width)):
        _init_layer(rng, params, f"enc.{name}.h0", w, width)
        _init_layer(rng, params, f"enc.{name}.h1", w, w)
    _init_layer(rng, params, "enc.seqjoin", w, 2 * w)
    _init_layer(rng, params, "enc.hand", w, handcrafted_width)
    _init_layer(rng, params, "enc.trunk0", w, 2 * w)
    _init_layer(rng, params, "enc.trunk1", w, w)
    _init_layer(rng, params, "enc.out", cfg.embedding_size, w)
    return params


def radiology_featurenet(
    seq1: Tensor,
    seq2: Tensor,
    handcrafted: Tensor,
    params: dict[str, Tensor],
    cfg: EncoderConfig,
) -> Tensor:
    """Three-branch radiology encoder.

    Two imaging-sequence branches are encoded separately (two hidden layers
    each), joined through one fully connected layer; the handcrafted-feature
    branch passes through its own layer; the concatenation feeds two further
    hidden layers and the linear embedding layer.
    """
    n = seq1.shape[1]
    if seq2.shape[1] != n or handcrafted.shape[1] != n:
        raise ConfigError("all radiology branches must cover the same patients")
    kind = cfg.resolved_activation()
    b1 = _apply_layer(_apply_layer(seq1, params, "enc.seq1.h0", kind), params, "enc.seq1.h1", kind)
    b2 = _apply_layer(_apply_layer(seq2, params, "enc.seq2.h0", kind), params, "enc.seq2.h1", kind)
    seq = _apply_layer(concat_rows([b1, b2]), params, "enc.seqjoin", kind)
    hand = _apply_layer(handcrafted, params, "enc.hand", kind)
    trunk = concat_rows([seq, hand])
    trunk = _apply_layer(trunk, params, "enc.trunk0", kind)
    trunk = _apply_layer(trunk, params, "enc.trunk1", kind)
    return _apply_layer(trunk, params, "enc.out", None)


def init_risk_head(rng: np.random.Generator, params: dict[str, Tensor], l1: int) -> None:
    params["head.beta"] = param(uniform_fan_in(rng, 1, l1), "head.beta")
    params["head.bias"] = param(np.zeros((1, 1)), "head.bias")


def risk_head(h: Tensor, beta: Tensor, bias: Tensor) -> Tensor:
    """Bounded log-hazard scores: theta = -3 + 6 * sigmoid(beta^T h + b)."""
    return add_const(mul_const(sigmoid(linear(h, beta, bias)), 6.0), -3.0)


# ---------------------------------------------------------------------------
# checkpoint plumbing

_MODEL_REGISTRY: dict[str, type] = {}


def register_model(cls):
    _MODEL_REGISTRY[cls.__name__] = cls
    return cls


def params_to_manifest(params: dict[str, Tensor]) -> dict:
    return {
        name: {"shape": list(t.value.shape), "data": t.value.ravel().tolist()}
        for name, t in params.items()
    }


def params_from_manifest(manifest: dict) -> dict[str, Tensor]:
    out = {}
    for name, entry in manifest.items():
        arr = np.asarray(entry["data"], dtype=float).reshape(entry["shape"])
        out[name] = param(arr, name)
    return out


def load_checkpoint(path):
    """Reconstruct any registered fitted model from its JSON checkpoint."""
    with open(path, "r", encoding="utf-8") as fh:
        blob = json.load(fh)
    if blob.get("format") != CHECKPOINT_FORMAT:
        raise ConfigError(f"unrecognized checkpoint format in {path}")
    name = blob.get("model")
    if name not in _MODEL_REGISTRY:
        raise ConfigError(f"unknown model kind '{name}' in checkpoint")
    return _MODEL_REGISTRY[name]._from_checkpoint(blob)


class _CheckpointMixin:
    """Shared JSON (de)serialization for fitted estimators."""

    def save(self, path) -> None:
        if not hasattr(self, "params_"):
            raise ConfigError("cannot checkpoint an unfitted model")
        blob = {
            "format": CHECKPOINT_FORMAT,
            "model": type(self).__name__,
            "config": self._checkpoint_config(),
            "fitted": self._fitted_state(),
            "params": params_to_manifest(self.params_),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(blob, fh, sort_keys=True)

    @classmethod
    def _from_checkpoint(cls, blob: dict):
        model = cls(**blob["config"])
        for key, value in blob["fitted"].items():
            setattr(model, key, value)
        model.params_ = params_from_manifest(blob["params"])
        model._restore_extra()
        return model

    def _checkpoint_config(self) -> dict:
        return self.get_params()

    def _fitted_state(self) -> dict:
        return {}

    def _restore_extra(self) -> None:
        pass


def _as_design_matrix(X) -> np.ndarray:
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2:
        raise ConfigError("expected a 2-d design matrix (patients x features)")
    if not np.isfinite(arr).all():
        raise ConfigError("design matrix contains non-finite values")
    return arr


def _resolve_samples(X):
    """Accept an (N, d) matrix or a list of per-patient (k_i, d) sample blocks."""
    if isinstance(X, (list, tuple)):
        blocks = [_as_design_matrix(b) for b in X]
        widths = {b.shape[1] for b in blocks}
        if len(widths) != 1:
            raise ConfigError("per-patient sample blocks must share a feature width")
        if any(b.shape[0] == 0 for b in blocks):
            raise ConfigError("every patient needs at least one sample")
        return blocks
    return _as_design_matrix(X)


def _epoch_matrix(design, rng) -> np.ndarray:
    # ragged per-patient samples: draw one sample per patient per epoch
    if isinstance(design, list):
        rows = [b[rng.integers(0, b.shape[0])] for b in design]
        return np.asarray(rows)
    return design


@contextmanager
def training_epoch(epoch: int):
    """Tag numeric failures inside one epoch with the epoch index."""
    try:
        yield
    except NumericError as err:
        raise NumericError(f"training aborted at epoch {epoch}: {err}") from err


def _epoch_batches(n: int, batch_size, rng):
    """Seeded minibatch index blocks; a single block when batching is off.

    The partial-likelihood needs at least two patients, so a length-1 tail
    chunk is folded into its predecessor.
    """
    if batch_size is None or batch_size >= n:
        yield np.arange(n)
        return
    if batch_size < 2:
        raise ConfigError("batch_size must be at least 2")
    order = rng.permutation(n)
    chunks = [order[s : s + batch_size] for s in range(0, n, batch_size)]
    if len(chunks[-1]) < 2:
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    yield from chunks


def _batch_survival(survival: SurvivalBatch, idx) -> SurvivalBatch:
    return SurvivalBatch(survival.times[idx], survival.events[idx])


@register_model
class CoxEmbeddingNet(_CheckpointMixin, BaseEstimator):
    """Single-modality survival model: MLP encoder plus bounded Cox head.

    ``fit`` accepts patients as rows, either a plain matrix or a list of
    per-patient sample blocks (one random sample drawn per epoch). The
    learning rate decays linearly from ``lr`` to 0 across ``epochs``.
    """

    def __init__(
        self,
        modality: str = "generic",
        hidden_width: int = 128,
        hidden_depth: int = 2,
        embedding_size: int = 32,
        activation: str | None = None,
        epochs: int = 50,
        lr: float = 0.05,
        batch_size: int | None = None,
        seed: int = 0,
    ):
        self.modality = modality
        self.hidden_width = hidden_width
        self.hidden_depth = hidden_depth
        self.embedding_size = embedding_size
        self.activation = activation
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.seed = seed

    def _config(self, input_width=None) -> EncoderConfig:
        return EncoderConfig(
            modality=self.modality,
            input_width=input_width,
            hidden_width=self.hidden_width,
            hidden_depth=self.hidden_depth,
            embedding_size=self.embedding_size,
            activation=self.activation,
        )

    def fit(self, X, y):
        design = _resolve_samples(X)
        survival = as_survival(y)
        n = len(design) if isinstance(design, list) else design.shape[0]
        if n != survival.n:
            raise ConfigError("design matrix and survival outcomes disagree on N")
        width = design[0].shape[1] if isinstance(design, list) else design.shape[1]
        cfg = self._config(width)
        rng = np.random.default_rng(self.seed)
        self.params_ = init_mlp_params(rng, cfg)
        init_risk_head(rng, self.params_, cfg.embedding_size)
        opt = Adam(self.params_, lr=self.lr)
        self.history_ = []
        for epoch in range(self.epochs):
            with training_epoch(epoch):
                matrix = _epoch_matrix(design, rng)
                lr = self.lr * (1.0 - epoch / self.epochs)
                losses = []
                for idx in _epoch_batches(n, self.batch_size, rng):
                    x = constant(matrix[idx].T)
                    theta = risk_head(
                        mlp_encode(x, self.params_, cfg),
                        self.params_["head.beta"],
                        self.params_["head.bias"],
                    )
                    loss = cox_pl_loss(theta, _batch_survival(survival, idx))
                    backward(loss)
                    opt.step(lr=lr)
                    losses.append(loss.item())
                self.history_.append(float(np.mean(losses)))
        self.input_width_ = width
        self.n_features_in_ = width
        return self

    def _require_fitted(self):
        if not hasattr(self, "params_"):
            raise ConfigError("model is not fitted")

    def _embedding_graph(self, x: Tensor, params=None) -> Tensor:
        self._require_fitted()
        return mlp_encode(x, params or self.params_, self._config(self.input_width_))

    def _risk_graph(self, x: Tensor) -> Tensor:
        return risk_head(
            self._embedding_graph(x), self.params_["head.beta"], self.params_["head.bias"]
        )

    def transform(self, X) -> np.ndarray:
        self._require_fitted()
        x = constant(_as_design_matrix(X).T)
        return self._embedding_graph(x).value.T

    def predict(self, X) -> np.ndarray:
        self._require_fitted()
        x = constant(_as_design_matrix(X).T)
        return self._risk_graph(x).value.ravel()

    def score(self, X, y) -> float:
        return concordance_index(self.predict(X), as_survival(y))

    def _fitted_state(self) -> dict:
        return {
            "input_width_": self.input_width_,
            "n_features_in_": self.n_features_in_,
            "history_": list(self.history_),
        }


@register_model
class MultiBranchCoxNet(_CheckpointMixin, BaseEstimator):
    """Radiology-style survival model with two sequence branches plus a
    handcrafted-feature branch.

    The design matrix holds the branches side by side:
    columns [0, seq1_width) then [seq1_width, seq1_width + seq2_width) then
    the handcrafted block.
    """

    def __init__(
        self,
        seq1_width: int = 9,
        seq2_width: int = 9,
        handcrafted_width: int = 56,
        hidden_width: int = 128,
        embedding_size: int = 32,
        activation: str | None = None,
        epochs: int = 50,
        lr: float = 0.05,
        batch_size: int | None = None,
        seed: int = 0,
    ):
        self.seq1_width = seq1_width
        self.seq2_width = seq2_width
        self.handcrafted_width = handcrafted_width
        self.hidden_width = hidden_width
        self.embedding_size = embedding_size
        self.activation = activation
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.seed = seed

    @property
    def input_width_(self) -> int:
        return self.seq1_width + self.seq2_width + self.handcrafted_width

    def _config(self) -> EncoderConfig:
        return EncoderConfig(
            modality="radiology",
            hidden_width=self.hidden_width,
            embedding_size=self.embedding_size,
            activation=self.activation,
        )

    def _split(self, x: Tensor) -> tuple[Tensor, Tensor, Tensor]:
        total = self.input_width_
        if x.shape[0] != total:
            raise ConfigError(f"expected {total} stacked branch features, got {x.shape[0]}")
        arr = x.value
        s1, s2 = self.seq1_width, self.seq2_width
        return (
            constant(arr[:s1]),
            constant(arr[s1 : s1 + s2]),
            constant(arr[s1 + s2 :]),
        )

    def fit(self, X, y):
        design = _resolve_samples(X)
        survival = as_survival(y)
        n = len(design) if isinstance(design, list) else design.shape[0]
        if n != survival.n:
            raise ConfigError("design matrix and survival outcomes disagree on N")
        cfg = self._config()
        rng = np.random.default_rng(self.seed)
        self.params_ = init_radiology_params(
            rng, cfg, self.seq1_width, self.seq2_width, self.handcrafted_width
        )
        init_risk_head(rng, self.params_, cfg.embedding_size)
        opt = Adam(self.params_, lr=self.lr)
        self.history_ = []
        for epoch in range(self.epochs):
            with training_epoch(epoch):
                matrix = _epoch_matrix(design, rng)
                lr = self.lr * (1.0 - epoch / self.epochs)
                losses = []
                for idx in _epoch_batches(n, self.batch_size, rng):
                    x = constant(matrix[idx].T)
                    seq1, seq2, hand = self._split(x)
                    theta = risk_head(
                        radiology_featurenet(seq1, seq2, hand, self.params_, cfg),
                        self.params_["head.beta"],
                        self.params_["head.bias"],
                    )
                    loss = cox_pl_loss(theta, _batch_survival(survival, idx))
                    backward(loss)
                    opt.step(lr=lr)
                    losses.append(loss.item())
                self.history_.append(float(np.mean(losses)))
        self.n_features_in_ = self.input_width_
        return self

    def _require_fitted(self):
        if not hasattr(self, "params_"):
            raise ConfigError("model is not fitted")

    def _embedding_graph(self, x: Tensor, params=None) -> Tensor:
        self._require_fitted()
        seq1, seq2, hand = self._split(x)
        return radiology_featurenet(seq1, seq2, hand, params or self.params_, self._config())

    def _risk_graph(self, x: Tensor) -> Tensor:
        return risk_head(
            self._embedding_graph(x), self.params_["head.beta"], self.params_["head.bias"]
        )

    def transform(self, X) -> np.ndarray:
        self._require_fitted()
        return self._embedding_graph(constant(_as_design_matrix(X).T)).value.T

    def predict(self, X) -> np.ndarray:
        self._require_fitted()
        return self._risk_graph(constant(_as_design_matrix(X).T)).value.ravel()

    def score(self, X, y) -> float:
        return concordance_index(self.predict(X), as_survival(y))

    def _fitted_state(self) -> dict:
        return {
            "n_features_in_": self.n_features_in_,
            "history_": list(self.history_),
        }


def clone_params(params: dict[str, Tensor]) -> dict[str, Tensor]:
    """Fresh parameter tensors holding copies of the given values."""
    return {name: param(copy.deepcopy(t.value), name) for name, t in params.items()}
