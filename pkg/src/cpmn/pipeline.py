"""End-to-end orchestration: training all four models (two cascade stages and
a pyramid per modality), running per-video inference, and persisting
checkpoints, detections, and evaluation inputs."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import ccm as ccm_mod
from . import pam as pam_mod
from .ccm import CcmStageParams, Tcas, cascade_fuse, compute_tcas, erase_features, \
    make_mask, normalize_tcas, normalize_tcas_live, stage_forward
from .config import RunConfig
from .data.sampling import sample_uniform
from .data.types import TrainingExample, UnitFeatureSequence, VideoRecord
from .errors import CheckpointError, ValidationError
from .evaluation import Detection, GroundTruth
from .localization import (
    LocalizationOptions,
    attention_fuse,
    extract_proposals,
    map_to_units,
    nms,
    score_proposal,
    select_top_classes,
)
from .pam import PamParams, infer_heatmap
from .nnkernel import load_tensors, save_tensors
from .training import total_epochs


@dataclass
class TrainedModels:
    cascade: dict[str, tuple[CcmStageParams, CcmStageParams]]
    pyramid: dict[str, PamParams]
    num_classes: int
    ccm_epochs: int = 0
    pam_epochs: int = 0


def infer_num_classes(train_set: Sequence[TrainingExample]) -> int:
    return 1 + max(max(ex.labels) for ex in train_set)


def train_all(train_set: Sequence[TrainingExample], config: RunConfig,
              *, init: TrainedModels | None = None,
              start_epochs: tuple[int, int] = (0, 0)) -> tuple[TrainedModels, dict]:
    """Train CCM (both stages) and PAM for every configured modality.

    Returns the models plus per-model epoch histories for the loss log."""
    num_classes = config.num_classes or infer_num_classes(train_set)
    cascade = {}
    pyramid = {}
    history: dict[str, list[dict]] = {}
    for modality in config.modalities:
        ccm_init = init.cascade[modality] if init is not None else None
        result = ccm_mod.train_ccm(train_set, config.ccm, modality, num_classes,
                                   seed=config.seed, init=ccm_init,
                                   start_epoch=start_epochs[0])
        cascade[modality] = (result.stage_a, result.stage_b)
        history[f"ccm_{modality}"] = result.history
        pam_init = init.pyramid[modality] if init is not None else None
        pres = pam_mod.train_pam(train_set, config.pam, modality, num_classes,
                                 seed=config.seed, init=pam_init,
                                 start_epoch=start_epochs[1])
        pyramid[modality] = pres.params
        history[f"pam_{modality}"] = pres.history
    models = TrainedModels(cascade=cascade, pyramid=pyramid, num_classes=num_classes,
                           ccm_epochs=total_epochs(config.ccm.lr_schedule),
                           pam_epochs=total_epochs(config.pam.lr_schedule))
    return models, history


# --- checkpoint persistence -------------------------------------------------

def _meta_tensor(text: str) -> np.ndarray:
    return np.frombuffer(text.encode("utf-8"), dtype=np.uint8).astype(np.float64)


def _meta_text(values: np.ndarray) -> str:
    return bytes(np.asarray(values).astype(np.uint8)).decode("utf-8")


def save_models(models: TrainedModels, out_dir: str | Path, config_hash: str) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for modality, (stage_a, stage_b) in models.cascade.items():
        tensors = {f"{modality}.stageA.{k}": v for k, v in stage_a.tensors().items()}
        tensors.update({f"{modality}.stageB.{k}": v for k, v in stage_b.tensors().items()})
        tensors["meta.config_hash"] = _meta_tensor(config_hash)
        tensors["meta.epochs_trained"] = np.array([models.ccm_epochs], dtype=np.float64)
        tensors["meta.num_classes"] = np.array([models.num_classes], dtype=np.float64)
        path = out_dir / f"ccm_{modality}.cpmn"
        save_tensors(path, tensors)
        written.append(path)
    for modality, params in models.pyramid.items():
        tensors = {f"{modality}.pam.{k}": v for k, v in params.tensors().items()}
        tensors["meta.config_hash"] = _meta_tensor(config_hash)
        tensors["meta.epochs_trained"] = np.array([models.pam_epochs], dtype=np.float64)
        tensors["meta.num_classes"] = np.array([models.num_classes], dtype=np.float64)
        path = out_dir / f"pam_{modality}.cpmn"
        save_tensors(path, tensors)
        written.append(path)
    return written


def load_models(checkpoint_dir: str | Path, modalities: Sequence[str]) -> TrainedModels:
    checkpoint_dir = Path(checkpoint_dir)
    cascade = {}
    pyramid = {}
    num_classes = 0
    ccm_epochs = pam_epochs = 0
    for modality in modalities:
        ccm_path = checkpoint_dir / f"ccm_{modality}.cpmn"
        pam_path = checkpoint_dir / f"pam_{modality}.cpmn"
        if not ccm_path.exists() or not pam_path.exists():
            raise CheckpointError(f"missing checkpoints for modality {modality!r} "
                                  f"in {checkpoint_dir}")
        ccm_tensors = load_tensors(ccm_path)
        a_prefix = f"{modality}.stageA."
        b_prefix = f"{modality}.stageB."
        stage_a = CcmStageParams.from_tensors(
            {k[len(a_prefix):]: v for k, v in ccm_tensors.items() if k.startswith(a_prefix)})
        stage_b = CcmStageParams.from_tensors(
            {k[len(b_prefix):]: v for k, v in ccm_tensors.items() if k.startswith(b_prefix)})
        cascade[modality] = (stage_a, stage_b)
        ccm_epochs = int(ccm_tensors["meta.epochs_trained"][0])
        num_classes = int(ccm_tensors["meta.num_classes"][0])
        pam_tensors = load_tensors(pam_path)
        p_prefix = f"{modality}.pam."
        pyramid[modality] = PamParams.from_tensors(
            {k[len(p_prefix):]: v for k, v in pam_tensors.items() if k.startswith(p_prefix)})
        pam_epochs = int(pam_tensors["meta.epochs_trained"][0])
    return TrainedModels(cascade=cascade, pyramid=pyramid, num_classes=num_classes,
                         ccm_epochs=ccm_epochs, pam_epochs=pam_epochs)


def checkpoint_config_hash(path: str | Path) -> str:
    tensors = load_tensors(path)
    return _meta_text(tensors["meta.config_hash"])


# --- inference ---------------------------------------------------------------

@dataclass
class VideoInference:
    video_id: str
    detections: list[dict]
    classes: list[int]
    # Per-modality traces in full unit coordinates, for CAS export/plots.
    traces: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)


def infer_video(seq: UnitFeatureSequence, models: TrainedModels, config: RunConfig,
                options: LocalizationOptions | None = None,
                keep_traces: bool = False) -> VideoInference:
    """Run the full localization cascade on one video."""
    opts = options or config.localization
    l_u = seq.l_u
    num_classes = models.num_classes

    sampled: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    stage_a_out: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    score_vectors: list[np.ndarray] = []
    for modality in config.modalities:
        x, idx = sample_uniform(seq.stream(modality).astype(np.float64),
                                config.infer_interval)
        sampled[modality] = (x, idx)
        stage_a, _ = models.cascade[modality]
        z_a, logits_a = stage_forward(x, stage_a)
        stage_a_out[modality] = (z_a, logits_a)
        score_vectors.append(logits_a)

    heatmaps: dict[str, np.ndarray] = {}
    if opts.use_pam:
        for modality in config.modalities:
            heat, pam_logits = infer_heatmap(seq.stream(modality).astype(np.float64),
                                             models.pyramid[modality],
                                             config.pam.window_len,
                                             config.pam.activation)
            heatmaps[modality] = heat
            score_vectors.append(pam_logits)

    classes, p_class = select_top_classes(score_vectors, k=opts.top_k)
    mask_classes = [c for c in classes if p_class[c] >= opts.mask_score_floor]
    if not mask_classes:
        mask_classes = classes[:1]

    fused: dict[str, np.ndarray] = {}
    traces: dict[str, dict[str, np.ndarray]] = {}
    for modality in config.modalities:
        x, idx = sampled[modality]
        z_a, _ = stage_a_out[modality]
        stage_a, stage_b = models.cascade[modality]
        tcas_a = Tcas(compute_tcas(z_a, stage_a.dense), "A", modality, idx)
        norm_a = normalize_tcas(tcas_a)
        if opts.use_mining:
            mask = make_mask(tcas_a, config.ccm.zeta, set(mask_classes),
                             normalize=config.ccm.normalize_before_mask)
            x_b = erase_features(x, mask)
            z_b, _ = stage_forward(x_b, stage_b)
            norm_b = normalize_tcas(Tcas(compute_tcas(z_b, stage_b.dense),
                                         "B", modality, idx))
            cas = cascade_fuse(norm_a, norm_b)
        else:
            norm_b = None
            cas = Tcas(norm_a.values, "cascaded", modality, idx)
        cas_full = map_to_units(cas.values, idx, l_u)
        heat_full = heatmaps.get(modality)
        if heat_full is None:
            heat_full = np.ones((l_u, num_classes))
        fused[modality] = attention_fuse(cas_full, heat_full, opts.score_form)
        if keep_traces:
            traces[modality] = {
                "stage_a": map_to_units(norm_a.values, idx, l_u),
                "stage_b": (map_to_units(norm_b.values, idx, l_u)
                            if norm_b is not None else np.zeros((l_u, num_classes))),
                "cascade": cas_full,
                "heatmap": heat_full,
                "fused": fused[modality],
            }

    drafts = []
    for modality in config.modalities:
        drafts.extend(extract_proposals(fused[modality], classes, modality,
                                        opts.threshold_ratio))
    proposals = [score_proposal(start, end, label, fused, p_class[label], modality)
                 for start, end, label, modality in drafts]
    kept = nms(proposals, opts.nms_threshold)
    kept.sort(key=lambda p: (-p.p_conf, p.start, p.end, p.label, p.modality))

    unit_seconds = seq.n_u / config.fps
    detections = [{
        "start_unit": int(p.start),
        "end_unit": int(p.end),
        "start_sec": p.start * unit_seconds,
        "end_sec": p.end * unit_seconds,
        "class": int(p.label),
        "p_act": p.p_act,
        "p_class": p.p_class,
        "p_conf": p.p_conf,
        "modality": p.modality,
    } for p in kept]
    return VideoInference(video_id=seq.video_id, detections=detections,
                          classes=classes, traces=traces)


def _worker_count(config: RunConfig) -> int:
    cap = os.environ.get("CPMN_THREADS")
    workers = config.workers
    if cap:
        workers = min(workers, max(1, int(cap)))
    return workers


def infer_dataset(videos: Sequence[UnitFeatureSequence], models: TrainedModels,
                  config: RunConfig, options: LocalizationOptions | None = None,
                  keep_traces: bool = False) -> list[VideoInference]:
    """Per-video localization; videos are independent, so a thread pool sized
    by config/CPMN_THREADS may run them concurrently. Results keep input order."""
    workers = _worker_count(config)
    if workers == 1 or len(videos) <= 1:
        return [infer_video(v, models, config, options, keep_traces) for v in videos]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(infer_video, v, models, config, options, keep_traces)
                   for v in videos]
        return [f.result() for f in futures]


# --- evaluation adapters ------------------------------------------------------

def detections_for_eval(results: Sequence[VideoInference]) -> list[Detection]:
    return [Detection(video_id=r.video_id, start=d["start_unit"], end=d["end_unit"],
                      label=d["class"], score=d["p_conf"])
            for r in results for d in r.detections]


def ground_truth_from_records(pairs: Sequence[tuple[UnitFeatureSequence, VideoRecord]]
                              ) -> list[GroundTruth]:
    out = []
    for _, record in pairs:
        if record.gt_segments is None:
            raise ValidationError(f"{record.video_id}: no ground-truth segments")
        out.extend(GroundTruth(video_id=record.video_id, start=s, end=e, label=c)
                   for s, e, c in record.gt_segments)
    return out
