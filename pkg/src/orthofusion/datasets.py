"""Seeded multimodal survival cohorts with controllable signal overlap.

Each patient carries one shared latent plus one latent per modality.
Modality features are linear loadings of (shared, own-unique) latents plus
noise; survival times are exponential with a log-linear hazard in the
latents, censored uniformly with the cutoff solved to hit a target rate.

The hidden true risk lives in a separate oracle object that the CSV
serialization never touches, so training code cannot leak it.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .validation import ConfigError, SurvivalBatch

COHORT_FORMAT = "orthofusion-cohort-v1"

_LOADING_STYLES = ("unit-norm", "per-feature")


@dataclass(frozen=True)
class ModalitySpec:
    """One modality: feature width, loading weights, samples per patient."""

    name: str
    width: int
    shared_loading: float = 0.5
    unique_loading: float = 1.0
    samples: tuple[int, int] = (1, 1)

    def __post_init__(self):
        if self.width < 1:
            raise ConfigError(f"modality '{self.name}' needs a positive width")
        lo, hi = self.samples
        if lo < 1 or hi < lo:
            raise ConfigError(f"modality '{self.name}' has invalid sample bounds {self.samples}")


@dataclass(frozen=True)
class CohortSpec:
    n_patients: int = 176
    modalities: tuple[ModalitySpec, ...] = ()
    noise: float = 0.5
    sample_jitter: float = 0.05
    baseline_hazard: float = 0.1
    shared_effect: float = 1.0
    unique_effects: tuple[float, ...] = ()
    censoring_target: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.n_patients < 10:
            raise ConfigError("cohorts need at least 10 patients")
        if not self.modalities:
            raise ConfigError("at least one modality is required")
        if len(self.unique_effects) != len(self.modalities):
            raise ConfigError("unique_effects must list one effect per modality")
        if not 0.0 <= self.censoring_target < 1.0:
            raise ConfigError("censoring_target must be in [0, 1)")
        if self.noise < 0 or self.sample_jitter < 0:
            raise ConfigError("noise levels must be non-negative")
        if self.baseline_hazard <= 0:
            raise ConfigError("baseline_hazard must be positive")
        n_latents = len(self.modalities) + 1
        for m in self.modalities:
            if m.width < n_latents:
                raise ConfigError(
                    f"modality '{m.name}' width {m.width} is below the latent count {n_latents}"
                )


@dataclass(frozen=True)
class CohortOracle:
    """Ground truth for tests only; never serialized with the cohort."""

    true_risk: np.ndarray
    latents: np.ndarray  # (N, M+1): shared column first


@dataclass(frozen=True)
class CohortData:
    """The training-facing view: samples and outcomes, nothing hidden."""

    modality_names: tuple[str, ...]
    widths: tuple[int, ...]
    samples: tuple[tuple[np.ndarray, ...], ...]  # [modality][patient] -> (k, width)
    survival: SurvivalBatch

    @property
    def n_patients(self) -> int:
        return self.survival.n

    def sample_blocks(self, modality) -> list[np.ndarray]:
        """Per-patient sample arrays for a modality (by name or index)."""
        idx = (
            modality
            if isinstance(modality, int)
            else self.modality_names.index(modality)
        )
        return list(self.samples[idx])

    def first_sample_matrix(self, modality) -> np.ndarray:
        return np.stack([block[0] for block in self.sample_blocks(modality)])


@dataclass(frozen=True)
class Cohort:
    spec: CohortSpec
    data: CohortData
    oracle: CohortOracle


def _solve_censoring_cutoff(event_times, uniforms, target, tol=0.02, max_iter=200):
    """Bisection on the realized censoring rate.

    With fixed uniform draws, patient i is censored iff cutoff * u_i < t_i,
    so the realized rate is a decreasing step function of the cutoff.
    """
    if target == 0.0:
        return float(np.max(event_times / np.maximum(uniforms, 1e-12)) * 2.0)

    def rate(cutoff):
        return float(np.mean(cutoff * uniforms < event_times))

    lo, hi = 0.0, float(np.max(event_times / np.maximum(uniforms, 1e-12)) * 2.0)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        r = rate(mid)
        if abs(r - target) <= tol:
            return mid
        if r > target:
            lo = mid
        else:
            hi = mid
    raise ConfigError(
        f"censoring target {target} unattainable within +-{tol} for this cohort size"
    )


def _loading_matrix(rng, m: ModalitySpec, n_latents, modality_index, style):
    """(width, M+1) loadings: shared column plus this modality's unique one."""
    width = m.width
    loadings = np.zeros((width, n_latents))

    def direction():
        if style == "per-feature":
            return np.ones(width)
        d = rng.standard_normal(width)
        return d / np.sqrt((d * d).sum())

    loadings[:, 0] = m.shared_loading * direction()
    loadings[:, 1 + modality_index] = m.unique_loading * direction()
    return loadings


def generate(spec: CohortSpec, loading_style: str = "unit-norm") -> Cohort:
    """Draw a cohort: latents -> features, exponential survival, censoring.

    Deterministic per spec.seed. The returned oracle (true risk, latents)
    exists for test assertions only.
    """
    if loading_style not in _LOADING_STYLES:
        raise ConfigError(f"loading_style must be one of {_LOADING_STYLES}")
    rng = np.random.default_rng(spec.seed)
    n = spec.n_patients
    n_mod = len(spec.modalities)
    n_latents = n_mod + 1
    latents = rng.standard_normal((n, n_latents))
    effects = np.concatenate([[spec.shared_effect], np.asarray(spec.unique_effects, dtype=float)])
    true_risk = latents @ effects

    # base features per modality, then per-patient jittered samples
    all_samples = []
    for mi, mspec in enumerate(spec.modalities):
        loadings = _loading_matrix(rng, mspec, n_latents, mi, loading_style)
        base = latents @ loadings.T + spec.noise * rng.standard_normal((n, mspec.width))
        lo, hi = mspec.samples
        counts = rng.integers(lo, hi + 1, size=n)
        patient_blocks = []
        for i in range(n):
            jitter = spec.sample_jitter * rng.standard_normal((counts[i], mspec.width))
            patient_blocks.append(base[i] + jitter)
        all_samples.append(tuple(patient_blocks))

    rates = spec.baseline_hazard * np.exp(true_risk)
    event_times = rng.exponential(1.0 / rates)
    uniforms = rng.random(n)
    cutoff = _solve_censoring_cutoff(event_times, uniforms, spec.censoring_target)
    censor_times = cutoff * uniforms
    events = (event_times <= censor_times).astype(int)
    times = np.minimum(event_times, censor_times)
    # exponential draws are strictly positive; keep uniform zeros out
    times = np.maximum(times, 1e-12)

    data = CohortData(
        modality_names=tuple(m.name for m in spec.modalities),
        widths=tuple(m.width for m in spec.modalities),
        samples=tuple(all_samples),
        survival=SurvivalBatch(times, events),
    )
    return Cohort(spec=spec, data=data, oracle=CohortOracle(true_risk=true_risk, latents=latents))


# ---------------------------------------------------------------------------
# presets


def complementary_preset(n_patients: int = 400, seed: int = 7) -> CohortSpec:
    """Three modalities that each carry mostly unique prognostic signal.

    Widths echo the handcrafted-radiology (56) and omics-panel (80) feature
    counts. No single modality can reach the multimodal oracle.
    """
    return CohortSpec(
        n_patients=n_patients,
        modalities=(
            ModalitySpec("radiology", 56, shared_loading=0.5, unique_loading=2.5, samples=(2, 4)),
            ModalitySpec("genomic", 80, shared_loading=0.5, unique_loading=2.5),
            ModalitySpec("clinical", 80, shared_loading=0.5, unique_loading=2.5),
        ),
        noise=0.15,
        sample_jitter=0.05,
        baseline_hazard=0.1,
        shared_effect=0.5,
        unique_effects=(1.3, 1.0, 0.7),
        censoring_target=0.3,
        seed=seed,
    )


def redundant_preset(n_patients: int = 400, seed: int = 7) -> CohortSpec:
    """Three modalities that all read out the same shared latent."""
    return CohortSpec(
        n_patients=n_patients,
        modalities=(
            ModalitySpec("radiology", 56, shared_loading=1.2, unique_loading=0.0, samples=(2, 4)),
            ModalitySpec("genomic", 80, shared_loading=1.2, unique_loading=0.0),
            ModalitySpec("clinical", 80, shared_loading=1.2, unique_loading=0.0),
        ),
        noise=0.5,
        sample_jitter=0.05,
        baseline_hazard=0.1,
        shared_effect=1.5,
        unique_effects=(0.0, 0.0, 0.0),
        censoring_target=0.3,
        seed=seed,
    )


def generate_preset(name: str, n_patients: int = 400, seed: int = 7) -> Cohort:
    if name == "complementary":
        return generate(complementary_preset(n_patients, seed))
    if name == "redundant":
        # dense loadings make the shared signal visible per feature
        return generate(redundant_preset(n_patients, seed), loading_style="per-feature")
    raise ConfigError(f"unknown preset '{name}' (expected complementary or redundant)")


# ---------------------------------------------------------------------------
# CSV bundle serialization (training view only)


def _float_repr(x: float) -> str:
    return repr(float(x))


def save_cohort(cohort, directory) -> None:
    """Write outcomes.csv, one <modality>.csv per modality, manifest.json.

    Accepts a Cohort or a bare CohortData; only the training view is
    written. Output bytes are deterministic for a given cohort.
    """
    data: CohortData = getattr(cohort, "data", cohort)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "outcomes.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["patient_id", "time", "event"])
        for i in range(data.n_patients):
            writer.writerow([i, _float_repr(data.survival.times[i]), int(data.survival.events[i])])
    manifest = {
        "format": COHORT_FORMAT,
        "n_patients": data.n_patients,
        "outcomes": "outcomes.csv",
        "modalities": [
            {"name": name, "width": width, "file": f"{name}.csv"}
            for name, width in zip(data.modality_names, data.widths)
        ],
    }
    for mi, name in enumerate(data.modality_names):
        with open(directory / f"{name}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["patient_id", "sample_id"] + [f"f{j}" for j in range(data.widths[mi])]
            )
            for pi, block in enumerate(data.samples[mi]):
                for si in range(block.shape[0]):
                    writer.writerow([pi, si] + [_float_repr(v) for v in block[si]])
    with open(directory / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_cohort(directory) -> CohortData:
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"no cohort manifest under {directory}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != COHORT_FORMAT:
        raise ConfigError(f"unrecognized cohort format in {manifest_path}")
    n = manifest["n_patients"]
    times = np.zeros(n)
    events = np.zeros(n, dtype=int)
    with open(directory / manifest["outcomes"], "r", newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            i = int(row["patient_id"])
            times[i] = float(row["time"])
            events[i] = int(row["event"])
    names, widths, samples = [], [], []
    for entry in manifest["modalities"]:
        width = entry["width"]
        per_patient: list[list[np.ndarray]] = [[] for _ in range(n)]
        with open(directory / entry["file"], "r", newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if len(header) != 2 + width:
                raise ConfigError(f"{entry['file']} width disagrees with manifest")
            for row in reader:
                per_patient[int(row[0])].append(np.array([float(v) for v in row[2:]]))
        if any(not rows for rows in per_patient):
            raise ConfigError(f"{entry['file']} is missing samples for some patients")
        names.append(entry["name"])
        widths.append(width)
        samples.append(tuple(np.stack(rows) for rows in per_patient))
    return CohortData(
        modality_names=tuple(names),
        widths=tuple(widths),
        samples=tuple(samples),
        survival=SurvivalBatch(times, events),
    )


def spec_to_dict(spec: CohortSpec) -> dict:
    return asdict(spec)


def spec_from_dict(blob: dict) -> CohortSpec:
    blob = dict(blob)
    blob["modalities"] = tuple(
        ModalitySpec(
            name=m["name"],
            width=m["width"],
            shared_loading=m.get("shared_loading", 0.5),
            unique_loading=m.get("unique_loading", 1.0),
            samples=tuple(m.get("samples", (1, 1))),
        )
        for m in blob.get("modalities", ())
    )
    blob["unique_effects"] = tuple(blob.get("unique_effects", ()))
    return CohortSpec(**blob)
