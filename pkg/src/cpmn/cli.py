"""Command-line driver: cpmn synth|train|infer|eval|ablate.

Exit codes: 0 success, 2 usage/config error, 3 numerical failure during
training or inference.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .data import io as data_io
from .data.synthetic import SyntheticSpec, generate_synthetic
from .errors import CpmnError, NumericalError, ValidationError
from .evaluation import PRESETS, evaluate
from .localization import LocalizationOptions
from .nnkernel import sigmoid
from . import pipeline, reference
from .util import stable_hash


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


# --- synth -------------------------------------------------------------------

def _write_split(pairs, split_dir: Path, config_hash: str, warnings: list[str]) -> None:
    (split_dir / "features").mkdir(parents=True, exist_ok=True)
    (split_dir / "annotations").mkdir(parents=True, exist_ok=True)
    entries = []
    for seq, record in pairs:
        feat_rel = f"features/{seq.video_id}.cpft"
        ann_rel = f"annotations/{seq.video_id}.json"
        data_io.save_features(split_dir / feat_rel, seq)
        data_io.save_annotations(split_dir / ann_rel, record)
        entries.append({"features": feat_rel, "annotations": ann_rel})
    data_io.write_manifest(split_dir / "manifest.json", entries,
                           config_hash=config_hash, warnings=warnings)


def cmd_synth(args) -> int:
    spec_doc = json.loads(Path(args.spec).read_text()) if args.spec else {}
    spec = SyntheticSpec.from_json_dict(spec_doc)
    dataset = generate_synthetic(spec)
    out = Path(args.out)
    spec_hash = stable_hash(spec.to_json_dict())
    _write_split(dataset.train, out / "train", spec_hash, dataset.warnings)
    _write_split(dataset.test, out / "test", spec_hash, dataset.warnings)
    _write_json(out / "spec.json", spec.to_json_dict())
    print(f"wrote {len(dataset.train)} train / {len(dataset.test)} test videos to {out}")
    return 0


# --- train -------------------------------------------------------------------

def _load_run_config(args) -> RunConfig:
    return load_config(args.config, args.set or [])


def _write_training_log(path: Path, history: dict, config_hash: str) -> None:
    columns: dict[str, dict[int, float]] = {}
    for model, rows in sorted(history.items()):
        if model.startswith("ccm"):
            columns[f"{model}_bce_a"] = {r["epoch"]: r["bce_a"] for r in rows}
            columns[f"{model}_bce_b"] = {r["epoch"]: r["bce_b"] for r in rows}
        else:
            columns[f"{model}_bce"] = {r["epoch"]: r["bce"] for r in rows}
    epochs = sorted({e for col in columns.values() for e in col})
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["epoch", *columns.keys()])
        for epoch in epochs:
            writer.writerow([epoch] + [f"{col[epoch]:.6f}" if epoch in col else ""
                                       for col in columns.values()])


def cmd_train(args) -> int:
    config = _load_run_config(args)
    if not config.manifest:
        raise ValidationError("config needs a training manifest path")
    train_set = data_io.load_training_set(config.manifest)
    out = Path(config.out_dir)
    ckpt_dir = out / "checkpoints"
    init = None
    start_epochs = (0, 0)
    if args.resume:
        init = pipeline.load_models(ckpt_dir, config.modalities)
        start_epochs = (init.ccm_epochs, init.pam_epochs)
    models, history = pipeline.train_all(train_set, config, init=init,
                                         start_epochs=start_epochs)
    config_hash = config.config_hash()
    pipeline.save_models(models, ckpt_dir, config_hash)
    _write_training_log(out / "training_log.csv", history, config_hash)
    _write_json(out / "config.json", {"config_hash": config_hash,
                                      **config.to_json_dict()})
    print(f"checkpoints and training log written to {out}")
    return 0


# --- infer -------------------------------------------------------------------

def _export_cas(result, out_dir: Path, modalities, score_form: str) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir.mkdir(parents=True, exist_ok=True)
    for label in result.classes:
        fig, axes = plt.subplots(len(modalities), 1, figsize=(10, 3 * len(modalities)),
                                 squeeze=False)
        for row, modality in enumerate(modalities):
            tr = result.traces[modality]
            units = np.arange(tr["fused"].shape[0])
            table = np.column_stack([
                units,
                tr["stage_a"][:, label],
                tr["stage_b"][:, label],
                tr["cascade"][:, label],
                tr["heatmap"][:, label],
                tr["fused"][:, label],
            ])
            csv_path = out_dir / f"{result.video_id}.class{label}.{modality}.csv"
            with csv_path.open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["unit", "m_a", "m_b", "m_cas", "h", "phi"])
                for r in table:
                    writer.writerow([int(r[0])] + [f"{v:.10g}" for v in r[1:]])
            ax = axes[row][0]
            for column, name in ((1, "stage A"), (2, "stage B"), (3, "cascade"),
                                 (4, "heatmap"), (5, "fused")):
                ax.plot(table[:, 0], table[:, column], label=name, linewidth=1.0)
            ax.set_title(f"{result.video_id} class {label} [{modality}]")
            ax.set_xlabel("unit")
            ax.legend(loc="upper right", fontsize=7)
        fig.tight_layout()
        fig.savefig(out_dir / f"{result.video_id}.class{label}.svg")
        plt.close(fig)


def cmd_infer(args) -> int:
    config = _load_run_config(args)
    manifest = args.manifest or config.test_manifest or config.manifest
    if not manifest:
        raise ValidationError("no manifest to run inference on")
    ckpt_dir = Path(args.checkpoints or Path(config.out_dir) / "checkpoints")
    models = pipeline.load_models(ckpt_dir, config.modalities)
    pairs = data_io.load_dataset(manifest)
    videos = [seq for seq, _ in pairs]
    results = pipeline.infer_dataset(videos, models, config,
                                     keep_traces=args.export_cas)
    out = Path(args.out or Path(config.out_dir) / "detections")
    out.mkdir(parents=True, exist_ok=True)
    config_hash = config.config_hash()
    combined = []
    for result in results:
        doc = {"video_id": result.video_id, "config_hash": config_hash,
               "detections": result.detections}
        _write_json(out / f"{result.video_id}.json", doc)
        combined.append(doc)
    _write_json(out / "detections.json",
                {"format": "cpmn-detections", "config_hash": config_hash,
                 "videos": combined})
    if args.export_cas:
        for result in results:
            _export_cas(result, out / "cas", config.modalities,
                        config.localization.score_form)
    total = sum(len(r.detections) for r in results)
    print(f"{len(results)} videos, {total} detections -> {out}")
    return 0


# --- eval --------------------------------------------------------------------

def _load_detections_doc(path: Path) -> tuple[list, str]:
    if path.is_dir():
        path = path / "detections.json"
    doc = json.loads(path.read_text())
    if doc.get("format") != "cpmn-detections":
        raise ValidationError(f"{path}: not a detections file")
    dets = []
    from .evaluation import Detection
    for video in doc["videos"]:
        for d in video["detections"]:
            dets.append(Detection(video_id=video["video_id"], start=d["start_unit"],
                                  end=d["end_unit"], label=d["class"],
                                  score=d["p_conf"]))
    return dets, doc.get("config_hash", "")


def cmd_eval(args) -> int:
    if args.preset not in PRESETS:
        raise ValidationError(f"unknown preset {args.preset!r} "
                              f"(expected one of {sorted(PRESETS)})")
    preset = PRESETS[args.preset]
    detections, config_hash = _load_detections_doc(Path(args.detections))
    pairs = data_io.load_dataset(args.gt)
    ground_truth = pipeline.ground_truth_from_records(pairs)
    report = evaluate(detections, ground_truth, preset["thresholds"],
                      average=preset["average"])
    doc = {"config_hash": config_hash, **report.to_json_dict()}
    out = Path(args.out)
    _write_json(out / "report.json", doc)
    (out / "report.txt").write_text(report.format_table() + "\n")
    print(report.format_table())
    if args.show_reference:
        print("\npublished reference (full datasets, not comparable at desk scale):")
        print("  THUMOS14 mAP@0.1..0.7:",
              " ".join(f"{reference.THUMOS14_MAP[a]:.1f}" for a in sorted(reference.THUMOS14_MAP)))
        print(f"  ActivityNet-1.3 average mAP: {reference.ACTIVITYNET13_AVERAGE_MAP:.2f}")
    return 0


# --- ablate --------------------------------------------------------------------

ARCHITECTURE_VARIANTS = {
    # Evaluated in the literal (no-sigmoid) fusion form so rows are comparable:
    # without the heatmap, sigmoid compression would destroy the 20%-of-max rule.
    "original": LocalizationOptions(use_mining=False, use_pam=False, score_form="literal"),
    "mining": LocalizationOptions(use_mining=True, use_pam=False, score_form="literal"),
    "pam": LocalizationOptions(use_mining=True, use_pam=True, score_form="literal"),
}


def _map_at_05(models, test_pairs, config, options) -> float:
    videos = [seq for seq, _ in test_pairs]
    results = pipeline.infer_dataset(videos, models, config, options=options)
    dets = pipeline.detections_for_eval(results)
    gts = pipeline.ground_truth_from_records(test_pairs)
    report = evaluate(dets, gts, (0.5,))
    return report.map_at[0.5]


def cmd_ablate(args) -> int:
    config = _load_run_config(args)
    if not (config.manifest and config.test_manifest):
        raise ValidationError("ablation needs train and test manifests in the config")
    spec = json.loads(Path(args.spec).read_text()) if args.spec else {}
    variants = spec.get("variants", ["original", "mining", "pam"])
    zetas = spec.get("zeta", [])
    samplers = spec.get("samplers", [])
    if not (variants or zetas or samplers):
        raise ValidationError("ablation spec selects no configurations")
    unknown = [v for v in variants if v not in ARCHITECTURE_VARIANTS]
    if unknown:
        raise ValidationError(f"unknown architecture variants: {unknown}")

    train_set = data_io.load_training_set(config.manifest)
    test_pairs = data_io.load_dataset(config.test_manifest)
    rows = []

    base_models = None
    if variants:
        base_models, _ = pipeline.train_all(train_set, config)
        for name in variants:
            score = _map_at_05(base_models, test_pairs, config,
                               ARCHITECTURE_VARIANTS[name])
            rows.append({"configuration": f"architecture={name}", "map_at_05": score})
    for zeta in zetas:
        zcfg = replace(config, ccm=replace(config.ccm, zeta=float(zeta)))
        models, _ = pipeline.train_all(train_set, zcfg)
        score = _map_at_05(models, test_pairs, zcfg, zcfg.localization)
        rows.append({"configuration": f"zeta={zeta}", "map_at_05": score})
    for mode in samplers:
        scfg = replace(config, ccm=replace(
            config.ccm, sampler=replace(config.ccm.sampler, mode=mode)))
        models, _ = pipeline.train_all(train_set, scfg)
        score = _map_at_05(models, test_pairs, scfg, scfg.localization)
        rows.append({"configuration": f"sampler={mode}", "map_at_05": score})

    out = Path(args.out or Path(config.out_dir) / "ablation")
    _write_json(out / "ablation.json", {"config_hash": config.config_hash(),
                                        "rows": rows})
    width = max(len(r["configuration"]) for r in rows)
    lines = [f"{'configuration':<{width}}  mAP@0.5"]
    lines += [f"{r['configuration']:<{width}}  {r['map_at_05']:7.4f}" for r in rows]
    table = "\n".join(lines)
    (out / "ablation.txt").write_text(table + "\n")
    print(table)
    return 0


# --- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpmn",
        description="Weakly supervised temporal action localization pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--spec", help="synthetic spec JSON (defaults apply if omitted)")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(func=cmd_synth)

    for name, fn, extra in (("train", cmd_train, "train all models"),
                            ("infer", cmd_infer, "run localization"),
                            ("ablate", cmd_ablate, "compare configurations")):
        p = sub.add_parser(name, help=extra)
        p.add_argument("--config", help="run config JSON")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config field (dotted path)")
        if name == "train":
            p.add_argument("--resume", action="store_true",
                           help="continue from existing checkpoints")
        if name == "infer":
            p.add_argument("--checkpoints", help="checkpoint directory")
            p.add_argument("--manifest", help="dataset manifest to localize")
            p.add_argument("--out", help="output directory for detections")
            p.add_argument("--export-cas", action="store_true",
                           help="write per-class activation CSVs and SVG plots")
        if name == "ablate":
            p.add_argument("--spec", help="ablation spec JSON")
            p.add_argument("--out", help="output directory")
        p.set_defaults(func=fn)

    p = sub.add_parser("eval", help="score detections against ground truth")
    p.add_argument("--detections", required=True,
                   help="detections.json or the directory containing it")
    p.add_argument("--gt", required=True, help="manifest with ground-truth segments")
    p.add_argument("--preset", default="thumos", help="thumos | activitynet")
    p.add_argument("--out", default="eval_out", help="report output directory")
    p.add_argument("--show-reference", action="store_true",
                   help="print published benchmark numbers for context")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (CpmnError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
