"""File formats: the LDWT tensor container, PGM images, filter text files and training logs.

LDWT container layout (all integers little-endian)::

    b"LDWT"  version:u8 (=1)  dtype:u8 (0=float32, 1=float64)  count:u32
    repeated count times:
        name_len:u8  name:bytes  C:u32  H:u32  W:u32  values (C*H*W, channel-major)
"""

from __future__ import annotations

import re
import struct
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .attention import AttentionParams
from .filters import WaveletFilterPair
from .tensor import FeatureMap
from .training import TrainReport

MAGIC = b"LDWT"
VERSION = 1
DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
DTYPE_CODES = {"float32": 0, "f32": 0, "float64": 1, "f64": 1}


class FormatError(ValueError):
    """Input bytes do not follow the expected file format."""


# ---------------------------------------------------------------- container


def encode_container(tensors: Mapping[str, FeatureMap], dtype: str = "float64") -> bytes:
    try:
        code = DTYPE_CODES[dtype]
    except KeyError:
        raise ValueError(f"unknown dtype {dtype!r}; use float32 or float64") from None
    parts = [MAGIC, struct.pack("<BBI", VERSION, code, len(tensors))]
    for name, fmap in tensors.items():
        raw = name.encode("utf-8")
        if not 0 < len(raw) < 256:
            raise ValueError(f"tensor name must be 1..255 bytes, got {name!r}")
        parts.append(struct.pack("<B", len(raw)) + raw)
        parts.append(struct.pack("<III", *fmap.shape))
        parts.append(fmap.data.astype(DTYPES[code]).tobytes())
    return b"".join(parts)


def decode_container(buf: bytes) -> tuple[dict[str, FeatureMap], str]:
    """Parse container bytes into ``({name: map}, dtype_name)``."""
    if len(buf) < 10 or buf[:4] != MAGIC:
        raise FormatError("not an LDWT container (bad magic)")
    version, code, count = struct.unpack_from("<BBI", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}")
    if code not in DTYPES:
        raise FormatError(f"unknown dtype code {code}")
    dt = DTYPES[code]
    pos = 10
    out: dict[str, FeatureMap] = {}
    for _ in range(count):
        if pos >= len(buf):
            raise FormatError("truncated container: missing tensor header")
        (n,) = struct.unpack_from("<B", buf, pos)
        pos += 1
        if pos + n + 12 > len(buf):
            raise FormatError("truncated container: tensor header")
        name = buf[pos:pos + n].decode("utf-8")
        pos += n
        c, h, w = struct.unpack_from("<III", buf, pos)
        pos += 12
        nbytes = c * h * w * dt.itemsize
        if pos + nbytes > len(buf):
            raise FormatError(f"truncated container: tensor {name!r} declares {nbytes} bytes")
        values = np.frombuffer(buf, dtype=dt, count=c * h * w, offset=pos)
        pos += nbytes
        if name in out:
            raise FormatError(f"duplicate tensor name {name!r}")
        try:
            out[name] = FeatureMap(values.astype(np.float64).reshape(c, h, w))
        except ValueError as exc:
            raise FormatError(f"tensor {name!r}: {exc}") from None
    if pos != len(buf):
        raise FormatError(f"{len(buf) - pos} trailing bytes after the declared tensors")
    return out, "float64" if code == 1 else "float32"


def write_container(path, tensors: Mapping[str, FeatureMap], dtype: str = "float64") -> None:
    Path(path).write_bytes(encode_container(tensors, dtype))


def read_container(path) -> dict[str, FeatureMap]:
    return decode_container(Path(path).read_bytes())[0]


# ---------------------------------------------------------------- PGM

_PGM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*(\S+)")


def _pgm_header(buf: bytes) -> tuple[bytes, int, int, int, int]:
    """Returns (magic, width, height, maxval, offset of the raster)."""
    pos = 0
    tokens = []
    for _ in range(4):
        m = _PGM_TOKEN.match(buf, pos)
        if m is None:
            raise FormatError("truncated PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise FormatError(f"not a P2/P5 PGM file (magic {magic!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError("non-integer PGM header field") from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise FormatError(f"invalid PGM header: {width}x{height}, maxval {maxval}")
    # exactly one whitespace byte separates the header from a binary raster
    return magic, width, height, maxval, pos + 1


def decode_pgm(buf: bytes) -> tuple[np.ndarray, int]:
    """Integer pixel array (H, W) and maxval."""
    magic, width, height, maxval, start = _pgm_header(buf)
    n = width * height
    if magic == b"P5":
        dt = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raster = buf[start:start + n * dt.itemsize]
        if len(raster) != n * dt.itemsize:
            raise FormatError(f"PGM raster too short: {len(raster)} of {n * dt.itemsize} bytes")
        pixels = np.frombuffer(raster, dtype=dt).astype(np.int64)
    else:
        text = re.sub(rb"#[^\n]*", b"", buf[start - 1:])
        try:
            pixels = np.array([int(t) for t in text.split()], dtype=np.int64)
        except ValueError:
            raise FormatError("non-integer sample in P2 raster") from None
        if pixels.size != n:
            raise FormatError(f"P2 raster has {pixels.size} samples, expected {n}")
    if pixels.max(initial=0) > maxval:
        raise FormatError("PGM sample exceeds maxval")
    return pixels.reshape(height, width), maxval


def encode_pgm(pixels: np.ndarray, maxval: int = 255, binary: bool = True) -> bytes:
    pixels = np.asarray(pixels)
    h, w = pixels.shape
    if binary:
        dt = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        return b"P5\n%d %d\n%d\n" % (w, h, maxval) + pixels.astype(dt).tobytes()
    rows = "\n".join(" ".join(str(int(v)) for v in row) for row in pixels)
    return f"P2\n{w} {h}\n{maxval}\n{rows}\n".encode()


def read_pgm(path) -> FeatureMap:
    """Single-channel map with values scaled to [0, 1]."""
    pixels, maxval = decode_pgm(Path(path).read_bytes())
    return FeatureMap(pixels[None].astype(np.float64) / maxval)


def quantize(fmap: FeatureMap, maxval: int = 255) -> np.ndarray:
    """Clamp to [0, 1] and round to integer levels; uses the first channel."""
    return np.rint(np.clip(fmap.data[0], 0.0, 1.0) * maxval).astype(np.int64)


def write_pgm(path, fmap: FeatureMap, maxval: int = 255, binary: bool = True) -> None:
    Path(path).write_bytes(encode_pgm(quantize(fmap, maxval), maxval, binary))


def is_pgm(buf: bytes) -> bool:
    return buf[:2] in (b"P2", b"P5")


def read_map(path) -> FeatureMap:
    """Load a PGM or a single-tensor container, detected from the leading bytes."""
    buf = Path(path).read_bytes()
    if is_pgm(buf):
        pixels, maxval = decode_pgm(buf)
        return FeatureMap(pixels[None].astype(np.float64) / maxval)
    tensors, _ = decode_container(buf)
    if len(tensors) != 1:
        raise FormatError(f"expected exactly one tensor, found {len(tensors)}: {sorted(tensors)}")
    return next(iter(tensors.values()))


# ---------------------------------------------------------------- filters


def format_filters(pair: WaveletFilterPair) -> str:
    def row(v):
        return " ".join(repr(float(x)) for x in v)

    return f"{pair.taps}\n{row(pair.low)}\n{row(pair.high)}\n"


def parse_filters(text: str) -> WaveletFilterPair:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) != 3:
        raise FormatError(f"filter file needs 3 non-empty lines, found {len(lines)}")
    try:
        k = int(lines[0])
        low = [float(t) for t in lines[1].split()]
        high = [float(t) for t in lines[2].split()]
    except ValueError as exc:
        raise FormatError(f"malformed filter file: {exc}") from None
    if len(low) != k or len(high) != k:
        raise FormatError(f"declared {k} taps but found {len(low)} low and {len(high)} high")
    try:
        return WaveletFilterPair(low, high)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def write_filters(path, pair: WaveletFilterPair) -> None:
    Path(path).write_text(format_filters(pair))


def read_filters(path) -> WaveletFilterPair:
    return parse_filters(Path(path).read_text())


# ---------------------------------------------------------------- attention params

_PARAM_NAMES = ("w1", "b1", "w2", "b2")


def attention_tensors(params: AttentionParams) -> dict[str, FeatureMap]:
    # matrices stored as 1 x rows x cols, vectors as 1 x 1 x n
    return {name: FeatureMap(np.atleast_2d(getattr(params, name))[None]) for name in _PARAM_NAMES}


def attention_from_tensors(tensors: Mapping[str, FeatureMap]) -> AttentionParams:
    missing = [n for n in _PARAM_NAMES if n not in tensors]
    if missing:
        raise FormatError(f"attention parameter file lacks tensor(s): {', '.join(missing)}")
    w1, b1, w2, b2 = (tensors[n].data[0] for n in _PARAM_NAMES)
    return AttentionParams(w1, b1.reshape(-1), w2, b2.reshape(-1))


def write_attention(path, params: AttentionParams, dtype: str = "float64") -> None:
    write_container(path, attention_tensors(params), dtype)


def read_attention(path) -> AttentionParams:
    return attention_from_tensors(read_container(path))


# ---------------------------------------------------------------- training log

LOG_COLUMNS = (
    "epoch", "task_loss", "wavelet_loss", "total_loss",
    "low_energy", "low_sum", "high_sum", "high_energy",
)


def format_log(report: TrainReport) -> str:
    lines = []
    for rec in report.history:
        values = [rec.task_loss, rec.wavelet_loss, rec.total_loss, *rec.residuals]
        lines.append("\t".join([str(rec.epoch)] + [repr(float(v)) for v in values]))
    return "\n".join(lines) + "\n" if lines else ""


def parse_log(text: str) -> list[tuple[int, list[float]]]:
    rows = []
    for ln in text.splitlines():
        if not ln.strip():
            continue
        fields = ln.split("\t")
        if len(fields) != len(LOG_COLUMNS):
            raise FormatError(f"log line has {len(fields)} fields, expected {len(LOG_COLUMNS)}")
        rows.append((int(fields[0]), [float(f) for f in fields[1:]]))
    return rows


def list_images(directory) -> list[Path]:
    """PGM and LDWT files in ``directory``, sorted by name."""
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"image directory not found: {d}")
    found: Iterable[Path] = (
        p for p in d.iterdir()
        if p.is_file() and p.suffix.lower() in (".pgm", ".pnm", ".ldwt")
    )
    return sorted(found)
