"""Dataset directories and model checkpoints on disk.

Dataset layout::

    <dir>/manifest.jsonl        one JSON object per embryo, UTF-8
    <dir>/frames/<id>.u8        frames x H x W unsigned bytes, row-major

Checkpoint layout (all integers little-endian)::

    8 bytes   magic b"EMBNCKPT"
    uint32    format version
    uint32    header length in bytes
    header    UTF-8 JSON: kind, architecture, metadata, tensor names and shapes
    payload   float32 tensors, in header order
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .autoencoder import AutoencoderModel, EncoderSpec, parameter_shapes
from .errors import (
    CheckpointFormatError, CheckpointShapeError, CheckpointTruncatedError, CheckpointVersionError,
    DatasetError,
)
from .nn.lstm import GATES
from .records import SUBSETS, Dataset, EmbryoRecord
from .sequence import HEAD_SIZES, SequenceModel

MANIFEST = "manifest.jsonl"
FRAMES_DIR = "frames"
MAGIC = b"EMBNCKPT"
CHECKPOINT_VERSION = 1


def quantize_frames(frames: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(np.asarray(frames, dtype=np.float64) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def _manifest_entry(r: EmbryoRecord) -> dict:
    entry = {
        "embryo_id": r.embryo_id,
        "patient_id": r.patient_id,
        "subset": r.subset,
        "frames_path": f"{FRAMES_DIR}/{r.embryo_id}.u8",
        "frame_count": r.frame_count,
        "frame_size": r.frame_size,
    }
    if r.grades is not None:
        entry["grades"] = [int(g) for g in r.grades]
    if r.label is not None:
        entry["kid_label"] = int(r.label)
    return entry


def _manifest_line(r: EmbryoRecord) -> str:
    return json.dumps(_manifest_entry(r), sort_keys=True, separators=(",", ":"))


def save_dataset(dataset: Dataset, directory) -> Path:
    directory = Path(directory)
    (directory / FRAMES_DIR).mkdir(parents=True, exist_ok=True)
    lines = []
    for r in dataset:
        (directory / FRAMES_DIR / f"{r.embryo_id}.u8").write_bytes(quantize_frames(r.frames).tobytes())
        lines.append(_manifest_line(r))
    (directory / MANIFEST).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return directory


def _validate_entry(entry: dict, lineno: int) -> None:
    eid = entry.get("embryo_id")
    for key in ("embryo_id", "patient_id", "subset", "frames_path", "frame_count", "frame_size"):
        if key not in entry:
            raise DatasetError(f"manifest line {lineno} lacks {key!r}", embryo_id=eid)
    subset = entry["subset"]
    if subset not in SUBSETS:
        raise DatasetError(f"unknown subset {subset!r}", embryo_id=eid)
    # kid embryos keep their panel grades for the panel comparison
    if (subset == "unlabeled") == ("grades" in entry):
        raise DatasetError("grades must be present exactly for graded and kid embryos", embryo_id=eid)
    if (subset == "kid") != ("kid_label" in entry):
        raise DatasetError("kid_label must be present exactly for kid embryos", embryo_id=eid)


def load_dataset(directory) -> Dataset:
    directory = Path(directory)
    manifest = directory / MANIFEST
    if not manifest.is_file():
        raise DatasetError("manifest not found", path=manifest)
    dataset = Dataset()
    seen = set()
    for lineno, line in enumerate(manifest.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"manifest line {lineno} is not JSON: {exc}", path=manifest) from None
        _validate_entry(entry, lineno)
        eid = entry["embryo_id"]
        if eid in seen:
            raise DatasetError("duplicate embryo_id", embryo_id=eid)
        seen.add(eid)
        path = directory / entry["frames_path"]
        if not path.is_file():
            raise DatasetError("frame file missing", path=path, embryo_id=eid)
        raw = path.read_bytes()
        t, size = int(entry["frame_count"]), int(entry["frame_size"])
        if len(raw) != t * size * size:
            raise DatasetError(f"frame file holds {len(raw)} bytes, manifest implies {t * size * size}",
                               path=path, embryo_id=eid)
        frames = (np.frombuffer(raw, dtype=np.uint8).reshape(t, size, size) / 255.0).astype(np.float32)
        grades = tuple(int(g) for g in entry["grades"]) if "grades" in entry else None
        label = int(entry["kid_label"]) if "kid_label" in entry else None
        dataset.subset(entry["subset"]).append(
            EmbryoRecord(eid, entry["patient_id"], frames, entry["subset"], grades, label))
    return dataset


def dataset_fingerprint(dataset: Dataset) -> str:
    """SHA-256 over manifest lines and quantized frame bytes, in record order."""
    h = hashlib.sha256()
    for r in dataset:
        h.update(_manifest_line(r).encode())
        h.update(quantize_frames(r.frames).tobytes())
    return h.hexdigest()


def _model_header(model) -> tuple[dict, dict[str, np.ndarray]]:
    if isinstance(model, AutoencoderModel):
        return {"kind": "autoencoder", "spec": model.spec.to_dict()}, model.params
    if isinstance(model, SequenceModel):
        tensors = {f"trunk.{k}": v for k, v in model.trunk.items()}
        tensors.update({f"head.{k}": v for k, v in model.head.items()})
        return {"kind": model.head_kind,
                "dims": {"input_dim": model.input_dim, "hidden_dim": model.hidden_dim}}, tensors
    raise TypeError(f"cannot checkpoint {type(model).__name__}")


def _expected_shapes(header: dict) -> dict[str, tuple[int, ...]]:
    kind = header.get("kind")
    if kind == "autoencoder":
        return parameter_shapes(EncoderSpec.from_dict(header["spec"]))
    if kind in HEAD_SIZES:
        d, u = int(header["dims"]["input_dim"]), int(header["dims"]["hidden_dim"])
        shapes = {}
        for gate in GATES:
            shapes[f"trunk.W_{gate}"] = (u, d + u)
            shapes[f"trunk.b_{gate}"] = (u,)
        shapes["head.W"] = (HEAD_SIZES[kind], u)
        shapes["head.b"] = (HEAD_SIZES[kind],)
        return shapes
    raise CheckpointFormatError(f"unknown model kind {kind!r}")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def save_checkpoint(model, path) -> Path:
    path = Path(path)
    header, tensors = _model_header(model)
    names = sorted(tensors)
    header["metadata"] = _jsonable(model.metadata)
    header["tensors"] = [{"name": n, "shape": list(tensors[n].shape)} for n in names]
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(tensors[n], dtype="<f4").tobytes() for n in names)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(MAGIC + struct.pack("<II", CHECKPOINT_VERSION, len(header_bytes)) + header_bytes + payload)
    return path


def load_checkpoint(path):
    """Load an autoencoder, grade or binary model; raises before building anything on error."""
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:8] != MAGIC:
        raise CheckpointFormatError(f"{path}: not a checkpoint (bad magic)")
    version, header_len = struct.unpack("<II", data[8:16])
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"{path}: format version {version}, expected {CHECKPOINT_VERSION}")
    if 16 + header_len > len(data):
        raise CheckpointTruncatedError(f"{path}: header runs past end of file")
    try:
        header = json.loads(data[16:16 + header_len].decode("utf-8"))
        declared = {t["name"]: tuple(int(s) for s in t["shape"]) for t in header["tensors"]}
        order = [t["name"] for t in header["tensors"]]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CheckpointFormatError(f"{path}: corrupted header ({exc})") from None
    try:
        expected = _expected_shapes(header)
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointFormatError(f"{path}: corrupted header ({exc})") from None
    if declared != expected:
        raise CheckpointShapeError(f"{path}: tensor shapes do not match the declared architecture")

    payload = data[16 + header_len:]
    n_floats = sum(int(np.prod(declared[n])) for n in order)
    if len(payload) != 4 * n_floats:
        raise CheckpointTruncatedError(f"{path}: payload has {len(payload)} bytes, expected {4 * n_floats}")
    flat = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    tensors, offset = {}, 0
    for name in order:
        size = int(np.prod(declared[name]))
        tensors[name] = flat[offset:offset + size].reshape(declared[name]).copy()
        offset += size

    meta = header.get("metadata", {})
    if header["kind"] == "autoencoder":
        return AutoencoderModel(EncoderSpec.from_dict(header["spec"]), tensors, meta)
    trunk = {k[len("trunk."):]: v for k, v in tensors.items() if k.startswith("trunk.")}
    head = {k[len("head."):]: v for k, v in tensors.items() if k.startswith("head.")}
    return SequenceModel(trunk, head, header["kind"], meta)
