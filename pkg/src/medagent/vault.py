"""Model persistence: a small versioned binary container plus a registry.

File layout (extension .imbm): magic `IMBM` · format_version (LE u32) ·
metadata length (LE u32) · canonical JSON metadata (UTF-8, sorted keys,
compact separators) · weight payload (row-major little-endian float64,
weight matrix then bias vector per layer) · FNV-1a 64-bit checksum (LE u64)
over everything after the magic.  Identical artifacts serialize to
identical bytes.

On load the checksum is verified before the version gate: a flipped bit in
the version field reports corruption, while an intact file written by a
newer format reports UnsupportedVersion.
"""

from __future__ import annotations

import json
import struct
import threading
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Encoder
from .errors import AgentError
from .network import HyperparameterSetting, NetworkWeights, predict_batch
from .rng import MASK64

MAGIC = b"IMBM"
FORMAT_VERSION = 1
HORIZONS = (5, 10, 15)

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211

_HEADER = struct.Struct("<I")
_CHECKSUM = struct.Struct("<Q")


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & MASK64
    return h


class VaultError(AgentError):
    code = "vault_error"


class BadMagic(VaultError):
    code = "bad_magic"

    def __init__(self):
        super().__init__("not a model file: magic bytes missing")


class ChecksumMismatch(VaultError):
    code = "checksum_mismatch"

    def __init__(self, detail: str = "stored checksum does not match file contents"):
        super().__init__(f"model file corrupt: {detail}")


class UnsupportedVersion(VaultError):
    code = "unsupported_version"

    def __init__(self, version: int):
        self.version = version
        super().__init__(f"model format version {version} is not supported "
                         f"(this build reads version {FORMAT_VERSION})")


class MalformedModel(VaultError):
    code = "malformed_model"


class EncoderWidthMismatch(VaultError):
    code = "encoder_width_mismatch"

    def __init__(self, encoder_width: int, input_width: int):
        self.encoder_width = encoder_width
        self.input_width = input_width
        super().__init__(f"encoder produces {encoder_width} features but the "
                         f"network expects {input_width}")


class HorizonUnavailable(VaultError):
    code = "horizon_unavailable"

    def __init__(self, horizon):
        self.horizon = horizon
        super().__init__(f"no model registered for the {horizon}-year horizon")


class AnswerError(VaultError):
    code = "answer_error"


class MissingAnswer(AnswerError):
    code = "missing_answer"

    def __init__(self, predictor: str, allowed):
        self.predictor = predictor
        self.allowed = tuple(allowed)
        super().__init__(f"no value given for predictor {predictor!r}; "
                         f"allowed values: {', '.join(self.allowed)}")


class UnknownPredictor(AnswerError):
    code = "unknown_predictor"

    def __init__(self, name: str, known):
        self.predictor = name
        self.known = tuple(known)
        super().__init__(f"unknown predictor {name!r}; model predictors: "
                         f"{', '.join(self.known)}")


class InvalidValue(AnswerError):
    code = "invalid_value"

    def __init__(self, predictor: str, value, allowed):
        self.predictor = predictor
        self.value = value
        self.allowed = tuple(allowed)
        super().__init__(f"{value!r} is not an allowed value for {predictor!r}; "
                         f"allowed values: {', '.join(self.allowed)}")


@dataclass(frozen=True)
class Predictor:
    name: str
    question: str
    values: tuple[str, ...]


@dataclass(frozen=True)
class PredictorCatalog:
    """Ordered predictors; order defines the dialogue question order."""

    predictors: tuple[Predictor, ...]

    def __post_init__(self):
        names = [p.name for p in self.predictors]
        if len(set(names)) != len(names):
            raise VaultError("predictor names must be unique")
        for p in self.predictors:
            if len(p.values) == 0:
                raise VaultError(f"predictor {p.name!r} has no allowed values")

    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.predictors)

    def get(self, name: str) -> Predictor:
        for p in self.predictors:
            if p.name == name:
                return p
        raise UnknownPredictor(name, self.names())

    def to_meta(self) -> list:
        return [{"name": p.name, "question": p.question, "values": list(p.values)}
                for p in self.predictors]

    @classmethod
    def from_meta(cls, items: list) -> "PredictorCatalog":
        return cls(tuple(Predictor(i["name"], i["question"], tuple(i["values"]))
                         for i in items))


def catalog_from_encoder(encoder: Encoder,
                         questions: dict[str, str] | None = None) -> PredictorCatalog:
    """Derive a catalog from an encoder's feature layout (default question
    text unless overridden per column)."""
    questions = questions or {}
    preds = []
    for col in encoder.feature_columns:
        q = questions.get(col, f"Select a value for {col}.")
        preds.append(Predictor(col, q, encoder.categories[col]))
    return PredictorCatalog(tuple(preds))


@dataclass(eq=False)
class ModelArtifact:
    """A trained network plus everything needed to use it standalone."""

    setting: HyperparameterSetting
    encoder: Encoder
    catalog: PredictorCatalog
    weights: NetworkWeights
    provenance: str
    horizon: int | None = None
    format_version: int = FORMAT_VERSION
    checksum: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.horizon is not None and self.horizon not in HORIZONS:
            raise VaultError(f"horizon must be one of {HORIZONS}, got {self.horizon}")
        if self.encoder.width != self.weights.input_width:
            raise EncoderWidthMismatch(self.encoder.width, self.weights.input_width)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ModelArtifact):
            return NotImplemented
        if (self.format_version, self.horizon, self.setting, self.provenance) != \
                (other.format_version, other.horizon, other.setting, other.provenance):
            return False
        if self.encoder.to_meta() != other.encoder.to_meta():
            return False
        if self.catalog.to_meta() != other.catalog.to_meta():
            return False
        a, b = self.weights.layers, other.weights.layers
        return len(a) == len(b) and all(
            np.array_equal(wa, wb) and np.array_equal(ba, bb)
            for (wa, ba), (wb, bb) in zip(a, b))

    def predict(self, answers: dict[str, str]) -> float:
        """Probability for one predictor->value assignment, validated
        against the catalog."""
        known = self.catalog.names()
        for name in answers:
            if name not in known:
                raise UnknownPredictor(name, known)
        for p in self.catalog.predictors:
            if p.name not in answers:
                raise MissingAnswer(p.name, p.values)
            if answers[p.name] not in p.values:
                raise InvalidValue(p.name, answers[p.name], p.values)
        x = self.encoder.encode_assignment(answers)
        return float(predict_batch(self.weights, self.setting, x.reshape(1, -1))[0])


def _metadata_dict(a: ModelArtifact) -> dict:
    return {
        "catalog": a.catalog.to_meta(),
        "encoder": a.encoder.to_meta(),
        "horizon": a.horizon,
        "layer_dims": a.weights.layer_dims(),
        "provenance": a.provenance,
        "setting": a.setting.to_dict(),
    }


def serialize(a: ModelArtifact) -> bytes:
    meta = json.dumps(_metadata_dict(a), sort_keys=True,
                      separators=(",", ":"), ensure_ascii=False).encode("utf-8")
    payload = b"".join(
        w.astype("<f8").tobytes(order="C") + b.astype("<f8").tobytes()
        for w, b in a.weights.layers)
    body = _HEADER.pack(a.format_version) + _HEADER.pack(len(meta)) + meta + payload
    checksum = fnv1a64(body)
    a.checksum = checksum
    return MAGIC + body + _CHECKSUM.pack(checksum)


def save(a: ModelArtifact, destination) -> int:
    """Write the artifact; returns the byte count.  destination may be a
    path or a binary file-like object."""
    blob = serialize(a)
    if hasattr(destination, "write"):
        destination.write(blob)
    else:
        Path(destination).write_bytes(blob)
    return len(blob)


def deserialize(data: bytes) -> ModelArtifact:
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic()
    if len(data) < 4 + 4 + 4 + 8:
        raise ChecksumMismatch("file truncated")
    (stored,) = _CHECKSUM.unpack(data[-8:])
    if fnv1a64(data[4:-8]) != stored:
        raise ChecksumMismatch()
    (version,) = _HEADER.unpack(data[4:8])
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(version)
    (meta_len,) = _HEADER.unpack(data[8:12])
    meta_end = 12 + meta_len
    if meta_end > len(data) - 8:
        raise MalformedModel("metadata length exceeds file size")
    try:
        meta = json.loads(data[12:meta_end].decode("utf-8"))
        encoder = Encoder.from_meta(meta["encoder"])
        catalog = PredictorCatalog.from_meta(meta["catalog"])
        setting = HyperparameterSetting.from_dict(meta["setting"])
        dims = [int(v) for v in meta["layer_dims"]]
        horizon = meta["horizon"]
        provenance = meta["provenance"]
    except (KeyError, TypeError, ValueError, UnicodeDecodeError) as e:
        raise MalformedModel(f"metadata block unreadable: {e}") from e

    expected = sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1)) * 8
    payload = data[meta_end:-8]
    if len(payload) != expected:
        raise MalformedModel("weight payload size does not match layer dimensions")
    if encoder.width != dims[0]:
        raise EncoderWidthMismatch(encoder.width, dims[0])

    layers = []
    pos = 0
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        w = np.frombuffer(payload, dtype="<f8", count=fan_in * fan_out,
                          offset=pos).astype(np.float64).reshape(fan_in, fan_out)
        pos += fan_in * fan_out * 8
        b = np.frombuffer(payload, dtype="<f8", count=fan_out,
                          offset=pos).astype(np.float64)
        pos += fan_out * 8
        w.setflags(write=False)
        b.setflags(write=False)
        layers.append((w, b))

    return ModelArtifact(
        setting=setting, encoder=encoder, catalog=catalog,
        weights=NetworkWeights(layers=tuple(layers)), provenance=provenance,
        horizon=horizon, format_version=version, checksum=stored)


def load(source) -> ModelArtifact:
    """Read and verify an artifact from a path or binary file-like object."""
    if hasattr(source, "read"):
        data = source.read()
    else:
        data = Path(source).read_bytes()
    return deserialize(data)


class ModelRegistry:
    """Horizon-keyed lookup over the .imbm files in one directory.

    Reads are lock-free after construction; registering a new model takes
    the exclusive lock.  Unreadable files are skipped with a warning so a
    stray file cannot take the service down.
    """

    def __init__(self, directory, do_scan: bool = True):
        self.directory = Path(directory)
        self._lock = threading.Lock()
        self._by_horizon: dict[int, ModelArtifact] = {}
        self._files: dict[int, str] = {}
        if do_scan:
            self.scan()

    def scan(self) -> None:
        with self._lock:
            self._by_horizon.clear()
            self._files.clear()
            for path in sorted(self.directory.glob("*.imbm")):
                try:
                    artifact = load(path)
                except VaultError as e:
                    warnings.warn(f"skipping {path.name}: {e}", RuntimeWarning)
                    continue
                h = artifact.horizon
                if h is None or h in self._by_horizon:
                    continue
                self._by_horizon[h] = artifact
                self._files[h] = path.name

    def lookup(self, horizon: int) -> ModelArtifact:
        with self._lock:
            if horizon not in self._by_horizon:
                raise HorizonUnavailable(horizon)
            return self._by_horizon[horizon]

    def horizons(self) -> tuple[int, ...]:
        with self._lock:
            return tuple(sorted(self._by_horizon))

    def register(self, artifact: ModelArtifact, filename: str | None = None) -> Path:
        if artifact.horizon is None:
            raise VaultError("only horizon-tagged artifacts can be registered")
        name = filename or f"model_{artifact.horizon}y.imbm"
        path = self.directory / name
        with self._lock:
            save(artifact, path)
            self._by_horizon[artifact.horizon] = artifact
            self._files[artifact.horizon] = name
        return path

    def listing(self) -> list[dict]:
        with self._lock:
            return [{"horizon": h,
                     "file": self._files[h],
                     "provenance": self._by_horizon[h].provenance}
                    for h in sorted(self._by_horizon)]


def registry_lookup(registry: ModelRegistry, horizon: int) -> ModelArtifact:
    return registry.lookup(horizon)
