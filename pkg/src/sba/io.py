"""Readers and writers for every on-disk artifact.

Binary formats (SBAT tensors, SBAV vector batches, SBAP whitening models) are
little-endian with a 4-byte ASCII magic and a u32 version.  Text formats
(manifests, detector sets, ground truth, rankings, predictions) are UTF-8 with
LF line endings and tab-separated fields.  Round-trips are bitwise exact.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    CorruptError,
    DuplicateError,
    FormatError,
    ShapeError,
)

SBAT_MAGIC = b"SBAT"
SBAV_MAGIC = b"SBAV"
SBAP_MAGIC = b"SBAP"
SBADET_MAGIC = "SBADET"
FORMAT_VERSION = 1

_HEADER_U32 = struct.Struct("<I")


@dataclass
class FeatureTensor:
    """One image's conv activations, shape (C, H, W), float32.

    Values must be finite.  Negative values (pre-ReLU exports) are allowed
    with a warning; the aggregation stage clamps them where the math needs
    non-negativity.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 3:
            raise ValueError(f"tensor must be 3-D (C, H, W), got shape {arr.shape}")
        if any(s < 1 for s in arr.shape):
            raise ValueError(f"tensor dims must all be >= 1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor contains NaN or Inf")
        if np.any(arr < 0):
            warnings.warn(
                "tensor contains negative activations (pre-ReLU layer?); "
                "aggregation clamps them to 0 where required",
                stacklevel=2,
            )
        self.data = arr

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class ManifestRecord:
    image_id: str
    tensor_path: str
    label: str | None = None


@dataclass
class DatasetManifest:
    """Ordered image records; index positions are significant downstream."""

    records: list[ManifestRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i: int) -> ManifestRecord:
        return self.records[i]

    @property
    def image_ids(self) -> list[str]:
        return [r.image_id for r in self.records]


def _read_u32(buf: bytes, offset: int) -> int:
    return _HEADER_U32.unpack_from(buf, offset)[0]


def read_tensor(path) -> FeatureTensor:
    """Read an SBAT file: magic, version, C, H, W, then C*H*W f32 LE."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 20:
        raise CorruptError(f"{path}: file shorter than SBAT header (20 bytes)")
    if raw[:4] != SBAT_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}, expected {SBAT_MAGIC!r}")
    version = _read_u32(raw, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported SBAT version {version}")
    c, h, w = (_read_u32(raw, o) for o in (8, 12, 16))
    if c < 1 or h < 1 or w < 1:
        raise FormatError(f"{path}: non-positive dims C={c} H={h} W={w}")
    expected = 20 + 4 * c * h * w
    if len(raw) != expected:
        raise CorruptError(
            f"{path}: size {len(raw)} does not match header "
            f"(C={c} H={h} W={w} wants {expected} bytes)"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=20).reshape(c, h, w)
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{path}: tensor payload contains NaN or Inf")
    return FeatureTensor(data.copy())


def write_tensor(tensor: FeatureTensor, path) -> None:
    """Write an SBAT file readable by read_tensor, bitwise round-trip exact."""
    if not isinstance(tensor, FeatureTensor):
        tensor = FeatureTensor(tensor)
    c, h, w = tensor.data.shape
    header = SBAT_MAGIC + struct.pack("<IIII", FORMAT_VERSION, c, h, w)
    payload = np.ascontiguousarray(tensor.data, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_manifest(path) -> DatasetManifest:
    """Parse a tab-separated manifest: image_id, tensor_path, optional label."""
    records: list[ManifestRecord] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) < 2:
                raise FormatError(
                    f"{path}:{lineno}: expected at least 2 tab-separated fields"
                )
            image_id, tensor_path = fields[0], fields[1]
            label = fields[2] if len(fields) > 2 else None
            if image_id in seen:
                raise DuplicateError(f"{path}:{lineno}: duplicate image_id {image_id!r}")
            seen.add(image_id)
            records.append(ManifestRecord(image_id, tensor_path, label))
    return DatasetManifest(records)


def write_manifest(manifest: DatasetManifest, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in manifest:
            if rec.label is None:
                fh.write(f"{rec.image_id}\t{rec.tensor_path}\n")
            else:
                fh.write(f"{rec.image_id}\t{rec.tensor_path}\t{rec.label}\n")


def read_vector_batch(path) -> np.ndarray:
    """Read an SBAV batch file into a (count, dim) float32 array."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 16:
        raise CorruptError(f"{path}: file shorter than SBAV header (16 bytes)")
    if raw[:4] != SBAV_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}, expected {SBAV_MAGIC!r}")
    version = _read_u32(raw, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported SBAV version {version}")
    count, dim = _read_u32(raw, 8), _read_u32(raw, 12)
    expected = 16 + 4 * count * dim
    if len(raw) != expected:
        raise CorruptError(
            f"{path}: size {len(raw)} does not match header "
            f"(count={count} dim={dim} wants {expected} bytes)"
        )
    return np.frombuffer(raw, dtype="<f4", offset=16).reshape(count, dim).copy()


def write_vector_batch(vectors: np.ndarray, path) -> None:
    """Write a (count, dim) array as an SBAV batch file, rows in given order."""
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    if vectors.ndim != 2:
        raise ShapeError(f"vector batch must be 2-D, got shape {vectors.shape}")
    count, dim = vectors.shape
    with open(path, "wb") as fh:
        fh.write(SBAV_MAGIC + struct.pack("<III", FORMAT_VERSION, count, dim))
        fh.write(vectors.tobytes())


def write_detector_set(detectors, path) -> None:
    """Persist a DetectorSet as the SBADET text format."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            f"{SBADET_MAGIC} {FORMAT_VERSION} "
            f"{detectors.source_channels} {len(detectors.indices)}\n"
        )
        for idx, var in zip(detectors.indices, detectors.variances):
            fh.write(f"{int(idx)}\t{float(var)!r}\n")


def read_detector_set(path):
    from .detectors import DetectorSet

    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != SBADET_MAGIC:
            raise FormatError(f"{path}: bad SBADET header")
        if int(header[1]) != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported SBADET version {header[1]}")
        c, n = int(header[2]), int(header[3])
        indices, variances = [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise FormatError(f"{path}:{lineno}: expected index<TAB>variance")
            indices.append(int(fields[0]))
            variances.append(float(fields[1]))
    if len(indices) != n:
        raise CorruptError(f"{path}: header promises {n} detectors, found {len(indices)}")
    return DetectorSet(
        indices=np.asarray(indices, dtype=np.int64),
        variances=np.asarray(variances, dtype=np.float64),
        source_channels=c,
    )


def write_whitening_model(model, path) -> None:
    """Persist a fitted whitening model as the SBAP binary format."""
    input_dim = int(model.mean.shape[0])
    m = int(model.projection.shape[0])
    with open(path, "wb") as fh:
        fh.write(SBAP_MAGIC + struct.pack("<III", FORMAT_VERSION, input_dim, m))
        fh.write(np.ascontiguousarray(model.mean, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(model.projection, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(model.singular_values, dtype="<f4").tobytes())


def read_whitening_model(path):
    from .postprocess import PcaWhitenModel

    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 16:
        raise CorruptError(f"{path}: file shorter than SBAP header (16 bytes)")
    if raw[:4] != SBAP_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}, expected {SBAP_MAGIC!r}")
    version = _read_u32(raw, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported SBAP version {version}")
    input_dim, m = _read_u32(raw, 8), _read_u32(raw, 12)
    expected = 16 + 4 * (input_dim + m * input_dim + m)
    if len(raw) != expected:
        raise CorruptError(f"{path}: size {len(raw)} does not match header")
    body = np.frombuffer(raw, dtype="<f4", offset=16)
    mean = body[:input_dim].astype(np.float64)
    projection = body[input_dim : input_dim + m * input_dim].reshape(m, input_dim)
    singular_values = body[input_dim + m * input_dim :].astype(np.float64)
    return PcaWhitenModel(
        mean=mean,
        projection=projection.astype(np.float64),
        singular_values=singular_values,
    )


def read_ground_truth(path) -> dict[str, dict[str, set[str]]]:
    """Parse ground-truth lines `query_id<TAB>image_id<TAB>{good|ok|junk}`."""
    gt: dict[str, dict[str, set[str]]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3 or fields[2] not in ("good", "ok", "junk"):
                raise FormatError(
                    f"{path}:{lineno}: expected query_id<TAB>image_id<TAB>"
                    "{good|ok|junk}"
                )
            query_id, image_id, relevance = fields
            entry = gt.setdefault(
                query_id, {"good": set(), "ok": set(), "junk": set()}
            )
            entry[relevance].add(image_id)
    return gt


def write_ranked_lists(ranked_lists, path) -> None:
    """Write rankings as `query_id<TAB>rank<TAB>image_id<TAB>distance`.

    Distances are printed at 6 significant digits.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rl in ranked_lists:
            for rank_pos, (image_id, dist) in enumerate(rl.entries, start=1):
                fh.write(f"{rl.query_id}\t{rank_pos}\t{image_id}\t{dist:.6g}\n")


def read_ranked_lists(path):
    from .retrieval import RankedList

    per_query: dict[str, list[tuple[str, float]]] = {}
    order: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise FormatError(
                    f"{path}:{lineno}: expected query_id<TAB>rank<TAB>image_id"
                    "<TAB>distance"
                )
            query_id, _, image_id, dist = fields
            if query_id not in per_query:
                per_query[query_id] = []
                order.append(query_id)
            per_query[query_id].append((image_id, float(dist)))
    return [RankedList(query_id=q, entries=per_query[q]) for q in order]


def write_predictions(predictions, path) -> None:
    """Write classifier output lines `image_id<TAB>predicted_label<TAB>top_score`."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for image_id, label, score in predictions:
            fh.write(f"{image_id}\t{label}\t{int(score)}\n")
