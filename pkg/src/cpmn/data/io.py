"""On-disk formats: the CPFT binary feature file, annotation JSON documents,
and the dataset manifest.

CPFT layout (little-endian):

    magic    4 bytes  b"CPFT"
    version  u16      currently 1
    id_len   u32, then video_id UTF-8 bytes
    l_u      u32
    n_u      u32
    G        u32      per-stream feature dimension
    starts   u32 * l_u    unit start frames
    rgb      float32 * (l_u * G), row-major
    flow     float32 * (l_u * G), row-major

Annotations are JSON: {"video_id": str, "labels": [int], "segments": [[s, e, c], ...]}
with inclusive unit intervals; "segments" is optional and never consumed by
training code paths.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CorruptFileError, FormatError, ValidationError
from .types import TrainingExample, UnitFeatureSequence, VideoRecord

FEATURE_MAGIC = b"CPFT"
FEATURE_VERSION = 1


def save_features(path: str | Path, seq: UnitFeatureSequence) -> None:
    out = bytearray()
    out += FEATURE_MAGIC
    out += struct.pack("<H", FEATURE_VERSION)
    vid = seq.video_id.encode("utf-8")
    out += struct.pack("<I", len(vid))
    out += vid
    out += struct.pack("<III", seq.l_u, seq.n_u, seq.feature_dim)
    out += seq.unit_start_frames.astype("<u4").tobytes()
    out += np.ascontiguousarray(seq.rgb, dtype="<f4").tobytes()
    out += np.ascontiguousarray(seq.flow, dtype="<f4").tobytes()
    Path(path).write_bytes(bytes(out))


def load_features(path: str | Path) -> UnitFeatureSequence:
    raw = Path(path).read_bytes()
    if len(raw) < 6 or raw[:4] != FEATURE_MAGIC:
        raise FormatError(f"{path}: not a CPFT feature file (bad magic)")
    (version,) = struct.unpack_from("<H", raw, 4)
    if version != FEATURE_VERSION:
        raise FormatError(f"{path}: unsupported CPFT version {version}")
    offset = 6
    try:
        (id_len,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        if len(raw) < offset + id_len:
            raise struct.error("truncated video id")
        video_id = raw[offset:offset + id_len].decode("utf-8")
        offset += id_len
        l_u, n_u, dim = struct.unpack_from("<III", raw, offset)
        offset += 12
        if l_u == 0:
            raise ValidationError(f"{path}: empty feature sequence (l_u == 0)")
        starts_end = offset + 4 * l_u
        block = 4 * l_u * dim
        if len(raw) != starts_end + 2 * block:
            raise CorruptFileError(
                f"{path}: payload size does not match header "
                f"(expected {starts_end + 2 * block} bytes, found {len(raw)})")
        starts = np.frombuffer(raw, dtype="<u4", count=l_u, offset=offset)
        rgb = np.frombuffer(raw, dtype="<f4", count=l_u * dim, offset=starts_end)
        flow = np.frombuffer(raw, dtype="<f4", count=l_u * dim, offset=starts_end + block)
    except (struct.error, UnicodeDecodeError) as exc:
        raise CorruptFileError(f"{path}: truncated feature file ({exc})") from exc
    return UnitFeatureSequence(
        video_id=video_id,
        n_u=int(n_u),
        unit_start_frames=starts.copy(),
        rgb=rgb.reshape(l_u, dim).copy(),
        flow=flow.reshape(l_u, dim).copy(),
    )


def save_annotations(path: str | Path, record: VideoRecord) -> None:
    doc: dict = {"video_id": record.video_id, "labels": sorted(record.labels)}
    if record.gt_segments is not None:
        doc["segments"] = [[int(s), int(e), int(c)] for s, e, c in record.gt_segments]
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def load_annotations(path: str | Path) -> VideoRecord:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid annotation JSON ({exc})") from exc
    try:
        segments = None
        if "segments" in doc:
            segments = [(int(s), int(e), int(c)) for s, e, c in doc["segments"]]
        return VideoRecord(
            video_id=str(doc["video_id"]),
            labels=frozenset(int(c) for c in doc["labels"]),
            gt_segments=segments,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed annotation document ({exc})") from exc


def write_manifest(path: str | Path, entries: list[dict], *, config_hash: str = "",
                   warnings: list[str] | None = None) -> None:
    doc = {
        "format": "cpmn-dataset",
        "config_hash": config_hash,
        "warnings": warnings or [],
        "videos": entries,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def read_manifest(path: str | Path) -> dict:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid manifest JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != "cpmn-dataset":
        raise FormatError(f"{path}: not a dataset manifest")
    return doc


def _manifest_videos(path: str | Path) -> list[tuple[Path, Path]]:
    path = Path(path)
    doc = read_manifest(path)
    pairs = []
    for entry in doc["videos"]:
        feat = path.parent / entry["features"]
        ann = path.parent / entry["annotations"]
        pairs.append((feat, ann))
    return pairs


def load_dataset(manifest_path: str | Path) -> list[tuple[UnitFeatureSequence, VideoRecord]]:
    """Full records including any ground-truth segments (evaluation use)."""
    out = []
    for feat_path, ann_path in _manifest_videos(manifest_path):
        seq = load_features(feat_path)
        record = load_annotations(ann_path)
        if record.video_id != seq.video_id:
            raise ValidationError(
                f"{feat_path}: video id mismatch with {ann_path}")
        record.validate_against(seq.l_u)
        out.append((seq, record))
    return out


def load_training_set(manifest_path: str | Path) -> list[TrainingExample]:
    """Weak-supervision view: features plus video-level labels, nothing else."""
    return [TrainingExample(features=seq, labels=record.labels)
            for seq, record in load_dataset(manifest_path)]
