"""Deterministic parameter initialization and the ISFW archive format.

Initialization draws from SplitMix64, chosen because its i-th output is a
closed form of the seed (any implementation in any language can match it
bit for bit):

    out(i) = mix(seed + (i+1) * 0x9E3779B97F4A7C15)   (mod 2^64)
    mix(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
            z ^= z >> 27; z *= 0x94D049BB133111EB;
            z ^= z >> 31

Uniform floats take the top 24 bits: u = (out >> 40) / 2^24 in [0, 1).
Tensors consume consecutive indices in manifest order; init kinds that
need no randomness consume none.

File format "ISFW", all little-endian:
    magic "ISFW" | version u32 | entry count u32
    per entry: name length u16, name bytes (ASCII), rank u8,
               extents u32 x rank, payload float32 row-major
    trailing CRC32 (u32) over all preceding bytes
"""

import math
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .net import param_specs

MAGIC = b"ISFW"
FORMAT_VERSION = 1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


class ArchiveError(Exception):
    """Base class for ISFW archive problems; .code names the failure."""
    code = "archive"


class BadMagicError(ArchiveError):
    code = "bad_magic"


class VersionError(ArchiveError):
    code = "version_mismatch"


class TruncatedError(ArchiveError):
    code = "truncated"


class CrcError(ArchiveError):
    code = "crc_mismatch"


@dataclass
class WeightArchive:
    """Ordered named-tensor store. config_echo is runtime metadata set by
    init_weights; the file format itself carries only tensors."""
    entries: dict
    format_version: int = FORMAT_VERSION
    config_echo: object = None


def _splitmix64(seed, start, count):
    """SplitMix64 outputs start .. start+count-1 for one seed, as uint64."""
    idx = np.arange(start, start + count, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed) + (idx + np.uint64(1)) * _GOLDEN
        z ^= z >> np.uint64(30)
        z *= _MIX1
        z ^= z >> np.uint64(27)
        z *= _MIX2
        z ^= z >> np.uint64(31)
    return z


def parameter_manifest(cfg):
    """The documented (name, shape) list for a configuration, in order."""
    return [(name, shape) for name, shape, _, _ in param_specs(cfg)]


def init_weights(cfg, seed):
    """Build the complete, reproducible parameter set for a configuration."""
    entries = {}
    counter = 0

    def draw(count):
        nonlocal counter
        z = _splitmix64(seed, counter, count)
        counter += count
        return (z >> np.uint64(40)).astype(np.float64) * 2.0 ** -24

    for name, shape, kind, fan_in in param_specs(cfg):
        size = int(np.prod(shape))
        if kind == "kaiming":
            bound = math.sqrt(6.0 / fan_in)
            vals = (draw(size) * 2.0 - 1.0) * bound
        elif kind == "dt_bias":
            lo, hi = math.log(1e-3), math.log(1e-1)
            dt = np.exp(lo + draw(size) * (hi - lo))
            vals = np.log(np.expm1(dt))
        elif kind == "zeros":
            vals = np.zeros(size)
        elif kind == "ones":
            vals = np.ones(size)
        elif kind == "a_log":
            d, n = shape
            vals = np.tile(np.log(np.arange(1, n + 1, dtype=np.float64)), d)
        else:
            raise ValueError(f"unknown init kind {kind!r} for {name}")
        entries[name] = vals.astype(np.float32).reshape(shape)
    return WeightArchive(entries=entries, config_echo=cfg)


def save_weights(archive, path):
    """Serialize to the ISFW layout; the trailing CRC32 covers every
    preceding byte."""
    chunks = [MAGIC, struct.pack("<II", archive.format_version, len(archive.entries))]
    for name, tensor in archive.entries.items():
        raw = name.encode("ascii")
        if not 0 < len(raw) <= 256:
            raise ValueError(f"entry name must be 1..256 ASCII bytes, got {name!r}")
        arr = np.ascontiguousarray(tensor, dtype="<f4")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"entry {name!r} contains non-finite values")
        if arr.ndim < 1 or arr.ndim > 255:
            raise ValueError(f"entry {name!r} has unsupported rank {arr.ndim}")
        chunks.append(struct.pack("<H", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    body = b"".join(chunks)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))


def load_weights(path):
    """Parse an ISFW file. Raises BadMagicError / VersionError /
    TruncatedError / CrcError, each a distinct failure code."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError(f"not an ISFW file: {path}")
    if len(data) < 12:
        raise TruncatedError(f"header truncated: {path}")
    version, count = struct.unpack_from("<II", data, 4)
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported format version {version} (expected {FORMAT_VERSION})")
    off = 12
    entries = {}
    for _ in range(count):
        if off + 2 > len(data) - 4:
            raise TruncatedError(f"entry header truncated at byte {off}")
        (name_len,) = struct.unpack_from("<H", data, off)
        off += 2
        if not 0 < name_len <= 256:
            raise ArchiveError(f"entry name length {name_len} outside 1..256")
        if off + name_len + 1 > len(data) - 4:
            raise TruncatedError(f"entry name truncated at byte {off}")
        try:
            name = data[off:off + name_len].decode("ascii")
        except UnicodeDecodeError as exc:
            raise ArchiveError(f"entry name is not ASCII at byte {off}") from exc
        if name in entries:
            raise ArchiveError(f"duplicate entry name {name!r}")
        off += name_len
        rank = data[off]
        off += 1
        if off + 4 * rank > len(data) - 4:
            raise TruncatedError(f"entry extents truncated at byte {off}")
        shape = struct.unpack_from(f"<{rank}I", data, off)
        off += 4 * rank
        n_bytes = 4 * math.prod(shape)
        if off + n_bytes > len(data) - 4:
            raise TruncatedError(f"payload of {name!r} truncated at byte {off}")
        arr = np.frombuffer(data, dtype="<f4", count=n_bytes // 4, offset=off)
        entries[name] = arr.reshape(shape).astype(np.float32)
        off += n_bytes
    if off != len(data) - 4:
        raise TruncatedError(f"{len(data) - 4 - off} unexpected trailing bytes")
    (stored_crc,) = struct.unpack_from("<I", data, off)
    actual_crc = zlib.crc32(data[:off]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise CrcError(f"CRC mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}")
    return WeightArchive(entries=entries, format_version=version)
