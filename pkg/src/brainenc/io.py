"""On-disk containers and dataset manifests.

Matrices travel in the ENC1 binary container: a 4-byte ASCII magic ``ENC1``,
a little-endian u32 header length, a UTF-8 JSON header ``{"dtype", "shape",
"order"}``, then the row-major IEEE-754 little-endian payload. Datasets are
described by a JSON manifest pointing at bold/feature containers, an atlas
CSV and a word-record JSON-lines file; all manifest invariants are checked
eagerly at load time so analyses can assume well-formed inputs.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"ENC1"
NETWORKS = ("Vis", "SomMot", "DorsAttn", "SalVentAttn", "Limbic", "Cont", "Default", "Subcortex")

_DTYPES = {"f32": "<f4", "f64": "<f8"}
_DTYPE_NAMES = {np.dtype("float32"): "f32", np.dtype("float64"): "f64"}


class ContainerError(ValueError):
    """Base class for ENC1 container failures."""


class BadMagicError(ContainerError):
    pass


class TruncatedPayloadError(ContainerError):
    pass


class ShapeMismatchError(ContainerError):
    """Payload length inconsistent with the declared shape."""


class HeaderError(ContainerError):
    """Malformed or unsupported header."""


class ManifestError(ValueError):
    """Manifest fails validation."""


def write_matrix(m: np.ndarray, path) -> None:
    """Write a float32/float64 matrix as an ENC1 container."""
    m = np.asarray(m)
    if m.dtype not in _DTYPE_NAMES:
        raise HeaderError(f"unsupported dtype {m.dtype}; expected float32 or float64")
    if m.ndim == 0 or any(d < 1 for d in m.shape):
        raise HeaderError(f"shape must be non-empty with all dims >= 1, got {m.shape}")
    header = json.dumps(
        {"dtype": _DTYPE_NAMES[m.dtype], "shape": list(m.shape), "order": "row-major"},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(np.ascontiguousarray(m).astype(_DTYPES[_DTYPE_NAMES[m.dtype]], copy=False).tobytes())


def read_matrix(path) -> np.ndarray:
    """Read an ENC1 container back into an array."""
    with open(path, "rb") as f:
        data = f.read()
    shape, dtype, payload = _parse_container(data, path)
    n = int(np.prod(shape))
    want = n * dtype.itemsize
    if len(payload) < want:
        raise TruncatedPayloadError(f"{path}: payload has {len(payload)} bytes, shape implies {want}")
    if len(payload) > want:
        raise ShapeMismatchError(f"{path}: payload has {len(payload)} bytes, shape implies {want}")
    return np.frombuffer(payload, dtype=dtype).reshape(shape).copy()


def read_matrix_header(path) -> tuple[list[int], str]:
    """Return (shape, dtype name) without loading the payload."""
    with open(path, "rb") as f:
        head = f.read(8)
        if len(head) < 8 or head[:4] != MAGIC:
            raise BadMagicError(f"{path}: bad magic {head[:4]!r}")
        (hlen,) = struct.unpack("<I", head[4:8])
        raw = f.read(hlen)
    if len(raw) < hlen:
        raise TruncatedPayloadError(f"{path}: truncated header")
    meta = _decode_header(raw, path)
    return list(meta["shape"]), meta["dtype"]


def _parse_container(data: bytes, path) -> tuple[list[int], np.dtype, bytes]:
    if len(data) < 8 or data[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {data[:4]!r}")
    (hlen,) = struct.unpack("<I", data[4:8])
    if len(data) < 8 + hlen:
        raise TruncatedPayloadError(f"{path}: truncated header")
    meta = _decode_header(data[8:8 + hlen], path)
    dtype = np.dtype(_DTYPES[meta["dtype"]])
    return list(meta["shape"]), dtype, data[8 + hlen:]


def _decode_header(raw: bytes, path) -> dict:
    try:
        meta = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise HeaderError(f"{path}: unreadable header: {e}") from None
    for key in ("dtype", "shape", "order"):
        if key not in meta:
            raise HeaderError(f"{path}: header missing {key!r}")
    if meta["dtype"] not in _DTYPES:
        raise HeaderError(f"{path}: unknown dtype {meta['dtype']!r}")
    if meta["order"] != "row-major":
        raise HeaderError(f"{path}: unsupported order {meta['order']!r}")
    shape = meta["shape"]
    if not shape or any(not isinstance(d, int) or d < 1 for d in shape):
        raise HeaderError(f"{path}: invalid shape {shape!r}")
    return meta


@dataclass(frozen=True)
class WordRecord:
    word: str
    onset_sec: float
    run_id: str
    word_index: int


@dataclass(frozen=True)
class RunSpec:
    run_id: str
    tr_seconds: float
    n_tr: int
    bold_path: str  # may contain a {subject} placeholder


@dataclass
class Atlas:
    roi_ids: np.ndarray
    names: list[str]
    networks: list[str]
    hemispheres: list[str]

    @property
    def n_rois(self) -> int:
        return len(self.roi_ids)

    def network_members(self) -> dict[str, np.ndarray]:
        """ROI positions grouped by network label, in atlas order."""
        nets = {}
        for pos, net in enumerate(self.networks):
            nets.setdefault(net, []).append(pos)
        return {net: np.asarray(pos) for net, pos in nets.items()}


@dataclass
class DatasetManifest:
    language: str
    subjects: list[str]
    runs: list[RunSpec]
    atlas_path: str
    feature_paths: dict[int, str]  # layer -> ENC1 path, contiguous from 1
    word_records_path: str
    root: Path = field(default_factory=Path)

    @property
    def layers(self) -> list[int]:
        return sorted(self.feature_paths)

    def resolve(self, rel: str) -> Path:
        return self.root / rel

    def bold_path(self, subject: str, run: RunSpec) -> Path:
        return self.root / run.bold_path.format(subject=subject)

    def load_atlas(self) -> Atlas:
        return load_atlas(self.resolve(self.atlas_path))

    def load_words(self) -> list[WordRecord]:
        return load_word_records(self.resolve(self.word_records_path))

    def load_features(self, layer: int) -> np.ndarray:
        return read_matrix(self.resolve(self.feature_paths[layer]))

    def load_bold(self, subject: str, run: RunSpec) -> np.ndarray:
        return read_matrix(self.bold_path(subject, run))


def load_atlas(path) -> Atlas:
    """Read an atlas CSV (roi_id,name,network,hemisphere) and validate it."""
    roi_ids, names, networks, hemis = [], [], [], []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        for row in reader:
            roi_ids.append(int(row["roi_id"]))
            names.append(row["name"])
            networks.append(row["network"])
            hemis.append(row["hemisphere"])
    if not roi_ids:
        raise ManifestError(f"{path}: empty atlas")
    ids = np.asarray(roi_ids)
    if sorted(roi_ids) != list(range(len(roi_ids))):
        raise ManifestError(f"{path}: roi ids must be unique and dense starting at 0")
    bad = sorted(set(networks) - set(NETWORKS))
    if bad:
        raise ManifestError(f"{path}: unknown network labels {bad}; expected one of {NETWORKS}")
    order = np.argsort(ids)
    return Atlas(
        roi_ids=ids[order],
        names=[names[i] for i in order],
        networks=[networks[i] for i in order],
        hemispheres=[hemis[i] for i in order],
    )


def write_atlas(atlas: Atlas, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["roi_id", "name", "network", "hemisphere"])
        for i in range(atlas.n_rois):
            w.writerow([int(atlas.roi_ids[i]), atlas.names[i], atlas.networks[i], atlas.hemispheres[i]])


def load_word_records(path) -> list[WordRecord]:
    """Read word records from JSON lines: {word, onset_sec, run_id, word_index}."""
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                records.append(WordRecord(str(obj["word"]), float(obj["onset_sec"]),
                                          str(obj["run_id"]), int(obj["word_index"])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise ManifestError(f"{path}:{lineno}: bad word record: {e}") from None
    indices = sorted(r.word_index for r in records)
    if indices != list(range(len(records))):
        raise ManifestError(f"{path}: word_index values must be dense 0..{len(records) - 1}")
    return sorted(records, key=lambda r: r.word_index)


def write_word_records(records, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps({"word": r.word, "onset_sec": r.onset_sec,
                                "run_id": r.run_id, "word_index": r.word_index}) + "\n")


def load_manifest(path) -> DatasetManifest:
    """Load and eagerly validate a dataset manifest.

    Checks: TR > 0, bold containers exist with first dimension equal to the
    declared TR count and matching ROI counts, feature layers contiguous from
    1 with row counts equal to the word-record count, atlas parses.
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise ManifestError(f"{path}: manifest file not found") from None
    except json.JSONDecodeError as e:
        raise ManifestError(f"{path}: invalid JSON: {e}") from None

    for key in ("language", "subjects", "runs", "atlas_path", "feature_paths", "word_records_path"):
        if key not in raw:
            raise ManifestError(f"{path}: missing field {key!r}")
    if not raw["subjects"]:
        raise ManifestError(f"{path}: no subjects declared")

    runs = []
    for r in raw["runs"]:
        spec = RunSpec(str(r["run_id"]), float(r["tr_seconds"]), int(r["n_tr"]), str(r["bold_path"]))
        if spec.tr_seconds <= 0:
            raise ManifestError(f"{path}: run {spec.run_id}: TR must be > 0, got {spec.tr_seconds}")
        if spec.n_tr < 1:
            raise ManifestError(f"{path}: run {spec.run_id}: TR count must be >= 1")
        runs.append(spec)
    if not runs:
        raise ManifestError(f"{path}: no runs declared")
    if len({r.run_id for r in runs}) != len(runs):
        raise ManifestError(f"{path}: duplicate run ids")

    try:
        layer_map = {int(k): str(v) for k, v in raw["feature_paths"].items()}
    except (TypeError, ValueError):
        raise ManifestError(f"{path}: feature_paths must map layer index -> path") from None
    if sorted(layer_map) != list(range(1, len(layer_map) + 1)):
        raise ManifestError(
            f"{path}: layer indices must be contiguous starting at 1, got {sorted(layer_map)}")

    manifest = DatasetManifest(
        language=str(raw["language"]),
        subjects=[str(s) for s in raw["subjects"]],
        runs=runs,
        atlas_path=str(raw["atlas_path"]),
        feature_paths=layer_map,
        word_records_path=str(raw["word_records_path"]),
        root=path.parent,
    )
    _validate_manifest(manifest)
    return manifest


def _validate_manifest(m: DatasetManifest) -> None:
    atlas = m.load_atlas()
    words = m.load_words()
    run_ids = {r.run_id for r in m.runs}
    for rec in words:
        if rec.run_id not in run_ids:
            raise ManifestError(f"word {rec.word_index} references unknown run {rec.run_id!r}")

    if len(m.subjects) > 1 and m.runs and "{subject}" not in m.runs[0].bold_path:
        raise ManifestError("multiple subjects require a {subject} placeholder in bold paths")
    for run in m.runs:
        for subject in m.subjects:
            p = m.bold_path(subject, run)
            if not p.exists():
                raise ManifestError(f"missing bold file {p}")
            shape, _ = read_matrix_header(p)
            if len(shape) != 2 or shape[0] != run.n_tr:
                raise ManifestError(
                    f"{p}: bold shape {shape} does not match declared {run.n_tr} TRs")
            if shape[1] != atlas.n_rois:
                raise ManifestError(f"{p}: {shape[1]} ROIs but atlas has {atlas.n_rois}")

    for layer in m.layers:
        p = m.resolve(m.feature_paths[layer])
        if not p.exists():
            raise ManifestError(f"missing feature file {p}")
        shape, _ = read_matrix_header(p)
        if len(shape) != 2 or shape[0] != len(words):
            raise ManifestError(
                f"{p}: feature shape {shape} does not match {len(words)} word records")


def write_manifest(m: DatasetManifest, path) -> None:
    raw = {
        "language": m.language,
        "subjects": m.subjects,
        "runs": [{"run_id": r.run_id, "tr_seconds": r.tr_seconds, "n_tr": r.n_tr,
                  "bold_path": r.bold_path} for r in m.runs],
        "atlas_path": m.atlas_path,
        "feature_paths": {str(k): v for k, v in sorted(m.feature_paths.items())},
        "word_records_path": m.word_records_path,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(raw, f, indent=2, sort_keys=True)
        f.write("\n")


def format_float(x) -> str:
    """Canonical float formatting for CSV artifacts (shortest round-trip)."""
    x = float(x)
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def write_csv(path, header: list[str], rows) -> None:
    """Write a CSV with deterministic float formatting."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
