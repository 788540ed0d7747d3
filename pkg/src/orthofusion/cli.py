"""Command line front end.

Config file: a JSON object with two optional sections.

  {
    "cohort": {
      "preset": "complementary",      one of: complementary, redundant
      "n_patients": 400,
      "seed": 7
      // or instead of a preset, a full generator spec under "spec":
      // "spec": {"n_patients": ..., "modalities": [{"name", "width", ...}], ...}
    },
    "experiment": {
      // any field of ExperimentConfig, e.g.
      "gamma": 0.5, "folds": 15, "holdout": 0.2, "seed": 0,
      "unimodal_epochs": 50, "fusion_epochs": 30, "freeze_epochs": 5,
      "unimodal_lr": 0.005, "fusion_lr": 0.005, "batch_size": 64,
      "hidden_width": 64, "embedding_size": 16, "fusion_hidden": 64,
      "scaled_size": 8, "similarity_weight": 50.0, "modalities": null
    }
  }

Subcommands read the cohort either from ``--cohort DIR`` (a bundle written
by ``generate``) or by generating it from the config's cohort section.
Relative ``--out`` paths resolve under $ORTHOFUSION_OUTPUT_ROOT when set.

Outputs are byte-deterministic for a given config and seed: floats are
written with ``repr``, JSON keys are sorted, and nothing records wall
time. Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import fields as dataclass_fields
from pathlib import Path

import numpy as np

from .datasets import (
    generate,
    generate_preset,
    load_cohort,
    save_cohort,
    spec_from_dict,
)
from .encoders import CoxEmbeddingNet
from .experiment import (
    GAMMA_SWEEP,
    ExperimentConfig,
    ablation_table,
    compare_table,
    folds_table,
    gamma_table,
    risk_table,
    run_experiment,
    train_fusion,
    train_unimodal,
    _derive_seed,
)
from .radiomics import feature_names, read_volume, extract_all_regions, summarize_patient
from .validation import ConfigError, NumericError

_ENV_OUTPUT_ROOT = "ORTHOFUSION_OUTPUT_ROOT"


def _resolve_out(out: str) -> Path:
    path = Path(out)
    if not path.is_absolute():
        root = os.environ.get(_ENV_OUTPUT_ROOT)
        if root:
            path = Path(root) / path
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    cfg_path = Path(path)
    if not cfg_path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(cfg_path, "r", encoding="utf-8") as fh:
            blob = json.load(fh)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file is not valid JSON: {err}") from err
    if not isinstance(blob, dict):
        raise ConfigError("config file must contain a JSON object")
    return blob


def _experiment_config(blob: dict, args) -> ExperimentConfig:
    section = dict(blob.get("experiment", {}))
    known = {f.name for f in dataclass_fields(ExperimentConfig)}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown experiment config keys: {sorted(unknown)}")
    for name in ("seed", "folds", "gamma"):
        value = getattr(args, name, None)
        if value is not None:
            section[name] = value
    if section.get("modalities") is not None:
        section["modalities"] = tuple(section["modalities"])
    return ExperimentConfig(**section)


def _cohort_data(blob: dict, args):
    if getattr(args, "cohort", None):
        return load_cohort(args.cohort)
    section = blob.get("cohort")
    if not section:
        raise ConfigError("no cohort: pass --cohort DIR or a 'cohort' config section")
    return _generate_cohort(section).data


def _generate_cohort(section: dict):
    if "spec" in section:
        return generate(spec_from_dict(section["spec"]))
    preset = section.get("preset")
    if not preset:
        raise ConfigError("cohort section needs a 'preset' name or a 'spec' object")
    return generate_preset(
        preset,
        n_patients=section.get("n_patients", 400),
        seed=section.get("seed", 7),
    )


# ---------------------------------------------------------------------------
# deterministic writers


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path: Path, blob: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_result(result, out: Path) -> None:
    _write_csv(out / "folds.csv", ["variant", "fold", "c_index"], folds_table(result))
    _write_csv(
        out / "risk_scores.csv",
        ["patient_id", "risk_score", "risk_group"],
        risk_table(result),
    )
    for group, curve in result.km_curves.items():
        _write_csv(
            out / f"km_{group}.csv",
            ["time", "survival", "at_risk", "censored"],
            zip(curve.times, curve.survival, curve.at_risk, curve.censored),
        )
    _write_json(out / "summary.json", result.to_summary())


# ---------------------------------------------------------------------------
# subcommands


def _cmd_generate(args) -> int:
    blob = _load_config(args.config)
    section = dict(blob.get("cohort", {}))
    if args.preset:
        section["preset"] = args.preset
    if args.patients is not None:
        section["n_patients"] = args.patients
    if args.seed is not None:
        section["seed"] = args.seed
    cohort = _generate_cohort(section)
    out = _resolve_out(args.out)
    save_cohort(cohort, out)
    print(f"cohort bundle written to {out}")
    return 0


def _cmd_train(args) -> int:
    blob = _load_config(args.config)
    config = _experiment_config(blob, args)
    data = _cohort_data(blob, args)
    names = list(config.modalities) if config.modalities else list(data.modality_names)
    out = _resolve_out(args.out)

    encoders = []
    train_c = {}
    for mi, name in enumerate(names):
        blocks = data.sample_blocks(name)
        model = train_unimodal(
            blocks, data.survival, config, name, _derive_seed(config.seed, 1_000_000, mi)
        )
        model.save(out / f"unimodal_{name}.json")
        encoders.append(model)
        train_c[f"unimodal:{name}"] = model.score(
            np.stack([b[0] for b in blocks]), data.survival
        )
    if len(names) >= 2:
        blocks = [data.sample_blocks(n) for n in names]
        fusion = train_fusion(
            encoders,
            blocks,
            data.survival,
            config,
            _derive_seed(config.seed, 1_000_000, 100),
        )
        fusion.save(out / "fusion.json")
        first = [np.stack([b[0] for b in blk]) for blk in blocks]
        train_c["fusion"] = fusion.score(first, data.survival)
    _write_json(out / "summary.json", {"modalities": names, "train_c": train_c})
    print(f"checkpoints written to {out}")
    return 0


def _run_and_write(args, *, gammas=None, ablation=False, correlation=False):
    blob = _load_config(args.config)
    config = _experiment_config(blob, args)
    data = _cohort_data(blob, args)
    result = run_experiment(
        data, config, gammas=gammas, ablation=ablation, correlation=correlation
    )
    out = _resolve_out(args.out)
    _write_result(result, out)
    return result, out


def _cmd_evaluate(args) -> int:
    result, out = _run_and_write(args, correlation=True)
    fusion = result.variants.get("fusion")
    headline = fusion or result.variants[result.variant_order[0]]
    print(f"median C-index ({headline.key}): {headline.median_c:.4f}")
    print(f"results written to {out}")
    return 0


def _cmd_sweep_gamma(args) -> int:
    result, out = _run_and_write(args, gammas=tuple(args.gammas))
    rows = [(r["gamma"], r["median_c"], r["std_c"]) for r in gamma_table(result)]
    _write_csv(out / "gamma_sweep.csv", ["gamma", "median_c", "std_c"], rows)
    for gamma, median, _ in rows:
        print(f"gamma={gamma:g}: median C-index {median:.4f}")
    print(f"results written to {out}")
    return 0


def _cmd_ablate(args) -> int:
    result, out = _run_and_write(args, ablation=True)
    rows = [
        (r["combine"], r["gating"], r["median_c"], r["std_c"])
        for r in ablation_table(result)
    ]
    _write_csv(out / "ablation.csv", ["combine", "gating", "median_c", "std_c"], rows)
    for combine, gating, median, _ in rows:
        gate = "gating" if gating else "no gating"
        print(f"{combine} + {gate}: median C-index {median:.4f}")
    print(f"results written to {out}")
    return 0


def _cmd_radiomics(args) -> int:
    sequences = []
    for path in (args.seq1, args.seq2):
        volume = read_volume(path)
        sequences.append(extract_all_regions(volume))
    vector = summarize_patient(sequences)
    out = _resolve_out(args.out)
    _write_csv(out / "features.csv", feature_names(), [vector])
    print(f"features written to {out / 'features.csv'}")
    return 0


def _cmd_compare(args) -> int:
    blob = _load_config(args.config)
    config = _experiment_config(blob, args)
    data = _cohort_data(blob, args)
    rows = compare_table(data, config)
    out = _resolve_out(args.out)
    _write_csv(
        out / "comparison.csv",
        ["modalities", "gamma", "median_c", "std_c"],
        [(r["modalities"], r["gamma"], r["median_c"], r["std_c"]) for r in rows],
    )
    _write_json(out / "summary.json", {"comparison": rows})
    for r in rows:
        gamma = f" gamma={r['gamma']:g}" if r["gamma"] != "" else ""
        print(f"{r['modalities']}{gamma}: median C-index {r['median_c']:.4f}")
    print(f"results written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="orthofusion",
        description="Multimodal survival fusion experiments on synthetic cohorts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, cohort=True):
        p.add_argument("--config", help="JSON config file")
        if cohort:
            p.add_argument("--cohort", help="cohort bundle directory (from 'generate')")
        p.add_argument("--out", default="results", help="output directory")
        p.add_argument("--seed", type=int, help="override the experiment seed")
        p.add_argument("--folds", type=int, help="override the fold count")
        p.add_argument("--gamma", type=float, help="override the orthogonalization weight")

    p = sub.add_parser("generate", help="write a synthetic cohort bundle")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--preset", help="cohort preset (complementary or redundant)")
    p.add_argument("--patients", type=int, help="cohort size")
    p.add_argument("--seed", type=int, help="generator seed")
    p.add_argument("--out", default="cohort", help="output directory")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("train", help="train encoders and the fusion model on a full cohort")
    common(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="Monte Carlo cross-validation battery")
    common(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep-gamma", help="repeat the experiment across gamma values")
    common(p)
    p.add_argument(
        "--gammas",
        type=float,
        nargs="+",
        default=list(GAMMA_SWEEP),
        help="gamma grid (default: 0 0.1 0.25 0.5 1 2.5)",
    )
    p.set_defaults(func=_cmd_sweep_gamma)

    p = sub.add_parser("ablate", help="fusion ablation grid (combine mode x gating)")
    common(p)
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("radiomics", help="extract the 56-feature vector from two volumes")
    p.add_argument("seq1", help="first sequence volume file")
    p.add_argument("seq2", help="second sequence volume file")
    p.add_argument("--out", default="radiomics", help="output directory")
    p.set_defaults(func=_cmd_radiomics)

    p = sub.add_parser("compare", help="concordance per modality combination")
    common(p)
    p.set_defaults(func=_cmd_compare)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        # missing/unreadable inputs are usage errors, same lane as bad config
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except NumericError as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
