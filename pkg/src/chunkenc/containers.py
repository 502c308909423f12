"""Binary containers: DCWT weight files and DCFT feature files.

Both formats are explicitly little-endian with float32 payloads in
row-major order, so files are byte-identical across platforms.

DCWT: magic "DCWT", version u16, tensor count u32, then per tensor:
name length u16 + UTF-8 name, rank u8, one u32 per dim, payload floats.

DCFT: magic "DCFT", utterance count u32, then per utterance: id length u16
+ UTF-8 id, T0 u32, D0 u32, payload floats.
"""

import struct
from typing import Dict, List, Tuple

import numpy as np

from .errors import ConfigError
from .rng import Xorshift64

WEIGHTS_MAGIC = b"DCWT"
FEATURES_MAGIC = b"DCFT"
WEIGHTS_VERSION = 1


def _pack_name(name: str) -> bytes:
    raw = name.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ConfigError(f"name too long to serialize: {name[:32]}...")
    return struct.pack("<H", len(raw)) + raw


class _Reader(object):
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ConfigError(f"{self.path}: truncated file")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def name(self) -> str:
        (n,) = self.unpack("<H")
        return self.take(n).decode("utf-8")

    def floats(self, count: int) -> np.ndarray:
        raw = self.take(4 * count)
        return np.frombuffer(raw, dtype="<f4").astype(np.float32)

    def done(self):
        if self.pos != len(self.data):
            raise ConfigError(f"{self.path}: {len(self.data) - self.pos} trailing bytes")


def save_weights(path: str, weights: Dict[str, np.ndarray]) -> int:
    """Write a DCWT file; returns the byte size written."""
    parts = [WEIGHTS_MAGIC, struct.pack("<HI", WEIGHTS_VERSION, len(weights))]
    for name, tensor in weights.items():
        arr = np.ascontiguousarray(tensor, dtype=np.float32)
        if arr.ndim < 1 or arr.ndim > 255:
            raise ConfigError(f"tensor {name!r} has unsupported rank {arr.ndim}")
        parts.append(_pack_name(name))
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.astype("<f4").tobytes(order="C"))
    blob = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(blob)
    return len(blob)


def load_weights(path: str) -> Dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        reader = _Reader(fh.read(), path)
    if reader.take(4) != WEIGHTS_MAGIC:
        raise ConfigError(f"{path}: not a DCWT weight file")
    version, count = reader.unpack("<HI")
    if version != WEIGHTS_VERSION:
        raise ConfigError(f"{path}: unsupported DCWT version {version}")
    weights: Dict[str, np.ndarray] = {}
    for _ in range(count):
        name = reader.name()
        (rank,) = reader.unpack("<B")
        dims = reader.unpack(f"<{rank}I")
        tensor = reader.floats(int(np.prod(dims))).reshape(dims)
        if not np.isfinite(tensor).all():
            raise ConfigError(f"{path}: tensor {name!r} has non-finite entries")
        weights[name] = tensor
    reader.done()
    return weights


def save_features(path: str, utterances: List[Tuple[str, np.ndarray]]) -> int:
    """Write a DCFT file; returns the byte size written."""
    parts = [FEATURES_MAGIC, struct.pack("<I", len(utterances))]
    for utt_id, feats in utterances:
        arr = np.ascontiguousarray(feats, dtype=np.float32)
        if arr.ndim != 2:
            raise ConfigError(f"utterance {utt_id!r} features must be 2-D, got {arr.shape}")
        parts.append(_pack_name(utt_id))
        parts.append(struct.pack("<II", arr.shape[0], arr.shape[1]))
        parts.append(arr.astype("<f4").tobytes(order="C"))
    blob = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(blob)
    return len(blob)


def load_features(path: str) -> List[Tuple[str, np.ndarray]]:
    with open(path, "rb") as fh:
        reader = _Reader(fh.read(), path)
    if reader.take(4) != FEATURES_MAGIC:
        raise ConfigError(f"{path}: not a DCFT feature file")
    (count,) = reader.unpack("<I")
    utterances = []
    for _ in range(count):
        utt_id = reader.name()
        t0, d0 = reader.unpack("<II")
        feats = reader.floats(t0 * d0).reshape(t0, d0)
        if not np.isfinite(feats).all():
            raise ConfigError(f"{path}: utterance {utt_id!r} has non-finite values")
        utterances.append((utt_id, feats))
    reader.done()
    return utterances


def synthetic_features(count: int, frames: int, dim: int,
                       seed: int) -> List[Tuple[str, np.ndarray]]:
    """Deterministic uniform [-1, 1) features for desk-scale runs."""
    if count < 0 or frames < 0 or dim < 1:
        raise ConfigError(f"invalid synthetic shape ({count}, {frames}, {dim})")
    rng = Xorshift64(seed)
    utterances = []
    for u in range(count):
        flat = np.empty(frames * dim, dtype=np.float64)
        for i in range(flat.size):
            flat[i] = rng.uniform() * 2.0 - 1.0
        utterances.append((f"utt{u:04d}", flat.reshape(frames, dim).astype(np.float32)))
    return utterances
