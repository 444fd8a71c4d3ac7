"""Run configuration: one JSON document, flag overrides, stable hashing.

Defaults follow the published training recipe (erase threshold 0.4, window 64,
regularization 0.0025, batch 16, learning rate 1e-3 for 30 epochs then 1e-4
for 120). Desk-scale experiment configs override the schedule and filter
counts; see configs shipped under scripts/.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .ccm import CcmHyper
from .data.sampling import SamplerConfig
from .errors import ValidationError
from .localization import LocalizationOptions
from .pam import PamHyper
from .util import stable_hash


@dataclass
class RunConfig:
    manifest: str | None = None        # training split
    test_manifest: str | None = None   # evaluation split
    out_dir: str = "runs/out"
    modalities: tuple[str, ...] = ("rgb", "flow")
    num_classes: int | None = None     # inferred from annotations when None
    seed: int = 0
    fps: float = 25.0
    workers: int = 1
    infer_interval: int = 1            # uniform sampling interval at inference
    ccm: CcmHyper = field(default_factory=CcmHyper)
    pam: PamHyper = field(default_factory=PamHyper)
    localization: LocalizationOptions = field(default_factory=LocalizationOptions)

    def __post_init__(self):
        self.modalities = tuple(self.modalities)
        if not self.modalities or any(m not in ("rgb", "flow") for m in self.modalities):
            raise ValidationError(f"bad modality set {self.modalities!r}")
        if self.infer_interval < 1:
            raise ValidationError("inference sampling interval must be >= 1")
        if self.workers < 1:
            raise ValidationError("worker count must be >= 1")

    def to_json_dict(self) -> dict[str, Any]:
        doc = asdict(self)
        doc["modalities"] = list(self.modalities)
        doc["ccm"]["lr_schedule"] = [list(p) for p in self.ccm.lr_schedule]
        doc["pam"]["lr_schedule"] = [list(p) for p in self.pam.lr_schedule]
        return doc

    def config_hash(self) -> str:
        return stable_hash(self.to_json_dict())


def _build_dataclass(cls, doc: dict[str, Any]):
    allowed = set(cls.__dataclass_fields__)
    unknown = set(doc) - allowed
    if unknown:
        raise ValidationError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    return cls(**doc)


def config_from_dict(doc: dict[str, Any]) -> RunConfig:
    doc = dict(doc)
    if "ccm" in doc:
        ccm = dict(doc["ccm"])
        if "sampler" in ccm:
            ccm["sampler"] = _build_dataclass(SamplerConfig, dict(ccm["sampler"]))
        if "lr_schedule" in ccm:
            ccm["lr_schedule"] = tuple((int(n), float(lr)) for n, lr in ccm["lr_schedule"])
        doc["ccm"] = _build_dataclass(CcmHyper, ccm)
    if "pam" in doc:
        pam = dict(doc["pam"])
        if "lr_schedule" in pam:
            pam["lr_schedule"] = tuple((int(n), float(lr)) for n, lr in pam["lr_schedule"])
        doc["pam"] = _build_dataclass(PamHyper, pam)
    if "localization" in doc:
        doc["localization"] = _build_dataclass(LocalizationOptions, dict(doc["localization"]))
    if "modalities" in doc:
        doc["modalities"] = tuple(doc["modalities"])
    return _build_dataclass(RunConfig, doc)


def load_config(path: str | Path | None, overrides: list[str] = ()) -> RunConfig:
    """Read a JSON config file and apply dotted key=value overrides, e.g.
    ``--set ccm.zeta=0.5`` or ``--set modalities='["rgb"]'``. Values parse as
    JSON first and fall back to plain strings."""
    doc: dict[str, Any] = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ValidationError(f"config {path} must hold a JSON object")
    for item in overrides:
        if "=" not in item:
            raise ValidationError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = doc
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ValidationError(f"override path {key!r} crosses a non-object")
        node[parts[-1]] = value
    return config_from_dict(doc)
