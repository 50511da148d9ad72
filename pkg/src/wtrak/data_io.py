"""Feature/dataset file formats, deterministic synthetic generators, JSON output.

Binary feature file layout (all integers little-endian)::

    offset  size  field
    0       8     magic  b"WTRAKF01"
    8       8     n      uint64
    16      8     d      uint64
    24      8     flags  uint64, bit 0 = labels present
    32      8*n*d row-major float64 (little-endian) values
    ...     n     labels as bytes in {0, 1} (only if flag bit 0 set)

CSV dialect: comma separated, ``.`` decimal point, no quoting, mandatory header
``id,f0,...,f{d-1}[,label]`` for features and ``id,x0,...,x{p-1},y[,flipped]``
for labeled datasets.  Floats are written with ``repr`` (17 significant digits).

Random numbers come from :class:`CounterRNG`, a SplitMix64 counter generator:
draw ``k`` of stream ``s`` is ``mix64(seed + (k + 1) * 0x9E3779B97F4A7C15)``
with the key ``seed = mix64(seed64 ^ (s * 0xD1B54A32D192ED03))``, where
``mix64`` uses the shifts 30/27/31 and multipliers ``0xBF58476D1CE4E5B9`` and
``0x94D049BB133111EB``.  Uniforms take the top 53 bits; normals use the
Box-Muller transform on consecutive uniform pairs.
"""

from __future__ import annotations

import enum
import io
import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .exceptions import BadMagic, BadSpec, InputError, NonFiniteValue, TruncatedFile
from .geometry import FeatureMatrix

MAGIC = b"WTRAKF01"
_HEADER = struct.Struct("<8sQQQ")
FLAG_LABELS = 1

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_STREAM = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class CounterRNG:
    """Counter-based SplitMix64 stream; output depends only on (seed, stream, position)."""

    def __init__(self, seed: int, stream: int = 0):
        with np.errstate(over="ignore"):
            s = np.array([(int(seed) & 0xFFFFFFFFFFFFFFFF)], dtype=np.uint64)
            s = s ^ (np.uint64(stream & 0xFFFFFFFFFFFFFFFF) * _STREAM)
            self._key = _mix64(s)[0]
        self._counter = 0

    def bits(self, size: int) -> np.ndarray:
        k = np.arange(self._counter + 1, self._counter + 1 + size, dtype=np.uint64)
        self._counter += size
        with np.errstate(over="ignore"):
            return _mix64(self._key + k * _GAMMA)

    def uniform(self, size: int) -> np.ndarray:
        """Uniform doubles in [0, 1)."""
        return (self.bits(size) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53

    def normal(self, size: int) -> np.ndarray:
        m = (size + 1) // 2
        u = self.uniform(2 * m)
        u1 = 1.0 - u[0::2]  # (0, 1]
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        out = np.empty(2 * m)
        out[0::2] = r * np.cos(2.0 * np.pi * u2)
        out[1::2] = r * np.sin(2.0 * np.pi * u2)
        return out[:size]

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.uniform(n), kind="stable")


class SynthKind(str, enum.Enum):
    SPECTRUM = "spectrum"
    TWO_CLUSTER = "two_cluster"


@dataclass(frozen=True)
class SynthSpec:
    kind: SynthKind
    n: int
    d: int
    kappa: float = 1.0
    separation: float = 4.0
    corruption_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", SynthKind(self.kind))
        if int(self.n) < 1 or int(self.d) < 1:
            raise BadSpec(f"n and d must be >= 1, got n={self.n}, d={self.d}")
        if not (math.isfinite(self.kappa) and self.kappa >= 1):
            raise BadSpec(f"kappa must be >= 1, got {self.kappa}")
        if not (0.0 <= self.corruption_rate < 0.5):
            raise BadSpec(f"corruption_rate must lie in [0, 0.5), got {self.corruption_rate}")
        if not (math.isfinite(self.separation) and self.separation >= 0):
            raise BadSpec(f"separation must be >= 0, got {self.separation}")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["kind"] = self.kind.value
        return out


def spectrum_eigenvalues(d: int, kappa: float) -> np.ndarray:
    """Log-uniformly spaced variances from 1 down to 1/kappa (exact endpoints)."""
    if d == 1:
        return np.ones(1)
    return kappa ** (-np.arange(d) / (d - 1))


def generate_spectrum_features(spec: SynthSpec, stream: int = 0) -> FeatureMatrix:
    """Zero-mean Gaussian rows with axis-aligned covariance ``diag(spectrum_eigenvalues)``."""
    if spec.kind is not SynthKind.SPECTRUM:
        raise BadSpec(f"expected kind 'spectrum', got {spec.kind.value!r}")
    rng = CounterRNG(spec.seed, stream)
    z = rng.normal(spec.n * spec.d).reshape(spec.n, spec.d)
    values = z * np.sqrt(spectrum_eigenvalues(spec.d, spec.kappa))
    return FeatureMatrix(values)


@dataclass(frozen=True)
class LabeledDataset:
    """Inputs ``X`` (n x p), labels ``y`` and the indices whose labels were flipped."""

    X: np.ndarray
    y: np.ndarray
    ids: tuple = ()
    flipped: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise InputError(f"dataset shapes inconsistent: X {X.shape}, y {y.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise NonFiniteValue("dataset contains non-finite values")
        ids = tuple(str(i) for i in self.ids) if len(self.ids) else tuple(str(i) for i in range(X.shape[0]))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "flipped", np.sort(np.asarray(self.flipped, dtype=np.int64)))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def flip_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[self.flipped] = True
        return mask


def generate_label_noise_dataset(spec: SynthSpec, stream: int = 0) -> LabeledDataset:
    """Two Gaussian clusters at ``+-separation/2`` along the first axis, labels {0, 1}.

    Exactly ``floor(corruption_rate * n)`` labels are flipped; which ones is
    drawn from the same counter stream, so the set is reproducible.
    """
    if spec.kind is not SynthKind.TWO_CLUSTER:
        raise BadSpec(f"expected kind 'two_cluster', got {spec.kind.value!r}")
    rng = CounterRNG(spec.seed, stream)
    n, d = spec.n, spec.d
    y = (rng.uniform(n) < 0.5).astype(np.float64)
    X = rng.normal(n * d).reshape(n, d)
    X[:, 0] += (2.0 * y - 1.0) * (spec.separation / 2.0)
    n_flip = int(math.floor(spec.corruption_rate * n))
    flipped = np.sort(rng.permutation(n)[:n_flip])
    y[flipped] = 1.0 - y[flipped]
    return LabeledDataset(X, y, flipped=flipped)


# --------------------------------------------------------------------------- files


def save_features(path, features: FeatureMatrix) -> None:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        _save_features_csv(path, features)
        return
    flags = FLAG_LABELS if features.labels is not None else 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, features.n, features.d, flags))
        fh.write(np.ascontiguousarray(features.values, dtype="<f8").tobytes())
        if features.labels is not None:
            fh.write(features.labels.astype(np.uint8).tobytes())


def load_features(path) -> FeatureMatrix:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _load_features_csv(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        if blob[:8] != MAGIC[: len(blob[:8])]:
            raise BadMagic(f"{path}: not a feature file")
        raise TruncatedFile(f"{path}: header truncated")
    magic, n, d, flags = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    payload = n * d * 8
    need = _HEADER.size + payload + (n if flags & FLAG_LABELS else 0)
    if len(blob) < need:
        raise TruncatedFile(f"{path}: expected {need} bytes, found {len(blob)}")
    values = np.frombuffer(blob, dtype="<f8", count=n * d, offset=_HEADER.size).reshape(n, d)
    if not np.all(np.isfinite(values)):
        raise NonFiniteValue(f"{path}: non-finite feature values")
    labels = None
    if flags & FLAG_LABELS:
        raw = np.frombuffer(blob, dtype=np.uint8, count=n, offset=_HEADER.size + payload)
        if np.any(raw > 1):
            raise InputError(f"{path}: labels must be 0 or 1")
        labels = raw.astype(bool)
    return FeatureMatrix(values.astype(np.float64), labels=labels)


def _fmt(x: float) -> str:
    return repr(float(x))


def _save_features_csv(path: Path, features: FeatureMatrix) -> None:
    header = ["id"] + [f"f{k}" for k in range(features.d)]
    if features.labels is not None:
        header.append("label")
    lines = [",".join(header)]
    for r, rid in enumerate(features.ids):
        cells = [rid] + [_fmt(v) for v in features.values[r]]
        if features.labels is not None:
            cells.append(str(int(features.labels[r])))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_csv(path: Path):
    text = path.read_text(encoding="utf-8").splitlines()
    rows = [line.split(",") for line in text if line.strip()]
    if not rows:
        raise TruncatedFile(f"{path}: empty CSV")
    header, body = rows[0], rows[1:]
    if header[0] != "id":
        raise InputError(f"{path}: CSV header must start with 'id'")
    for k, row in enumerate(body):
        if len(row) != len(header):
            raise TruncatedFile(f"{path}: row {k + 1} has {len(row)} fields, header has {len(header)}")
    return header, body


def _load_features_csv(path: Path) -> FeatureMatrix:
    header, body = _read_csv(path)
    has_label = header[-1] == "label"
    d = len(header) - 1 - int(has_label)
    if header[1:1 + d] != [f"f{k}" for k in range(d)]:
        raise InputError(f"{path}: feature columns must be named f0..f{d - 1}")
    if not body:
        raise TruncatedFile(f"{path}: no data rows")
    try:
        values = np.array([[float(c) for c in row[1:1 + d]] for row in body], dtype=np.float64)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc
    if not np.all(np.isfinite(values)):
        raise NonFiniteValue(f"{path}: non-finite feature values")
    labels = np.array([int(row[-1]) for row in body]).astype(bool) if has_label else None
    return FeatureMatrix(values, tuple(row[0] for row in body), labels)


def save_dataset(path, data: LabeledDataset) -> None:
    p = data.X.shape[1]
    flips = data.flip_mask
    lines = [",".join(["id"] + [f"x{k}" for k in range(p)] + ["y", "flipped"])]
    for r, rid in enumerate(data.ids):
        lines.append(",".join([rid] + [_fmt(v) for v in data.X[r]] + [_fmt(data.y[r]), str(int(flips[r]))]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_dataset(path) -> LabeledDataset:
    path = Path(path)
    header, body = _read_csv(path)
    has_flip = header[-1] == "flipped"
    y_col = len(header) - 1 - int(has_flip)
    if header[y_col] != "y":
        raise InputError(f"{path}: dataset CSV needs a 'y' column")
    if not body:
        raise TruncatedFile(f"{path}: no data rows")
    try:
        X = np.array([[float(c) for c in row[1:y_col]] for row in body], dtype=np.float64)
        y = np.array([float(row[y_col]) for row in body])
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc
    flipped = np.flatnonzero([int(row[-1]) for row in body]) if has_flip else np.zeros(0, dtype=np.int64)
    return LabeledDataset(X, y, tuple(row[0] for row in body), flipped)


# --------------------------------------------------------------------------- reports


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, enum.Enum):
        return obj.value
    return obj


def dumps_report(report: dict) -> str:
    """UTF-8 JSON with sorted keys; non-finite floats become ``null``."""
    return json.dumps(_jsonable(report), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(path, report: dict) -> None:
    Path(path).write_text(dumps_report(report), encoding="utf-8")


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(c) if isinstance(c, (float, np.floating)) else str(c) for c in row) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def feature_spec_echo(spec: SynthSpec, extra: Optional[dict] = None) -> dict:
    out = {"spec": spec.to_dict()}
    if extra:
        out.update(extra)
    return out
