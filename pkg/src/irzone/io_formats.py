"""File formats: binary sequence container, PGM zone masks with sidecar,
model persistence, and PPM overlay rendering. All writes are atomic
(temp file + rename); all formats round-trip bit-exactly."""

from __future__ import annotations

import hashlib
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .phantom import ThermalSequence
from .zones import LEAF_LABELS, Mode, ZoneLabel, ZoneMask

MAGIC = b"IRTS"
VERSION = 1


class FormatError(ValueError):
    pass


class BadMagic(FormatError):
    pass


class SizeMismatch(FormatError):
    pass


class Truncated(FormatError):
    pass


class ChecksumError(FormatError):
    pass


def _atomic_write(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- sequence container -----------------------------------------------------
# magic "IRTS", version u16, width u32, height u32, n_frames u32,
# pixel_size_m f64, then per frame: timestamp f64 + H*W float32; little-endian.

def write_sequence(path, seq: ThermalSequence):
    h, w = seq.frame_shape
    header = MAGIC + struct.pack("<HIIId", VERSION, w, h, seq.n_frames, seq.pixel_size)
    chunks = [header]
    for i in range(seq.n_frames):
        chunks.append(struct.pack("<d", float(seq.timestamps[i])))
        chunks.append(np.ascontiguousarray(seq.data[i], dtype="<f4").tobytes())
    _atomic_write(path, b"".join(chunks))


def read_sequence(path) -> ThermalSequence:
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise Truncated(f"{path}: file shorter than magic")
    if raw[:4] != MAGIC:
        raise BadMagic(f"{path}: bad magic {raw[:4]!r}")
    head_size = 4 + struct.calcsize("<HIIId")
    if len(raw) < head_size:
        raise Truncated(f"{path}: truncated header")
    version, w, h, n, px = struct.unpack("<HIIId", raw[4:head_size])
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    frame_bytes = 8 + 4 * w * h
    expect = head_size + n * frame_bytes
    if len(raw) < expect:
        raise Truncated(f"{path}: payload truncated ({len(raw)} < {expect} bytes)")
    if len(raw) != expect:
        raise SizeMismatch(f"{path}: payload size {len(raw)} != declared {expect}")
    data = np.empty((n, h, w), dtype=np.float32)
    times = np.empty(n, dtype=np.float64)
    off = head_size
    for i in range(n):
        times[i] = struct.unpack("<d", raw[off : off + 8])[0]
        off += 8
        data[i] = np.frombuffer(raw[off : off + 4 * w * h], dtype="<f4").reshape(h, w)
        off += 4 * w * h
    return ThermalSequence(data=data, timestamps=times, pixel_size=px)


# --- zone masks (PGM P5 + text sidecar) --------------------------------------

def write_mask(path, mask: ZoneMask, mode: Mode):
    mask.check_mode(mode)
    h, w = mask.shape
    header = f"P5\n{w} {h}\n255\n".encode()
    _atomic_write(path, header + mask.labels.tobytes())
    sidecar = f"pixel_size_m {mask.pixel_size:.9e}\nmode {mode.value}\n"
    _atomic_write(str(path) + ".meta", sidecar.encode())


def _parse_pgm(raw: bytes, path):
    # P5 header: three whitespace-separated tokens, comments allowed
    tokens = []
    i = 0
    while len(tokens) < 4:
        if i >= len(raw):
            raise Truncated(f"{path}: truncated PGM header")
        c = raw[i : i + 1]
        if c == b"#":
            while i < len(raw) and raw[i : i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(raw) and not raw[j : j + 1].isspace():
                j += 1
            tokens.append(raw[i:j])
            i = j
    if tokens[0] != b"P5":
        raise BadMagic(f"{path}: not a P5 PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise FormatError(f"{path}: maxval must be 255")
    i += 1  # single whitespace after maxval
    body = raw[i:]
    if len(body) < w * h:
        raise Truncated(f"{path}: PGM payload truncated")
    if len(body) != w * h:
        raise SizeMismatch(f"{path}: PGM payload size {len(body)} != {w * h}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w), w, h


def read_mask(path) -> tuple[ZoneMask, Mode]:
    raw = Path(path).read_bytes()
    labels, _, _ = _parse_pgm(raw, path)
    codes = set(np.unique(labels).tolist())
    bad = codes - {int(l) for l in LEAF_LABELS}
    if bad:
        raise FormatError(f"{path}: undefined label codes {sorted(bad)}")
    meta_path = str(path) + ".meta"
    pixel_size = 250e-6
    mode = Mode.ON
    try:
        for line in Path(meta_path).read_text().splitlines():
            key, _, val = line.partition(" ")
            if key == "pixel_size_m":
                pixel_size = float(val)
            elif key == "mode":
                mode = Mode.parse(val)
    except FileNotFoundError:
        raise FormatError(f"{path}: missing sidecar {meta_path}")
    mask = ZoneMask(labels.copy(), pixel_size)
    mask.check_mode(mode)
    return mask, mode


# --- model persistence --------------------------------------------------------
# Self-describing text header, then a base-16 parameter block with a sha256
# checksum. The parameter block is a deterministic tagged binary encoding of
# the model's nested state (dicts, lists, scalars, ndarrays).

def _pack(obj) -> bytes:
    if obj is None:
        return b"N"
    if isinstance(obj, bool):
        return b"B" + (b"\x01" if obj else b"\x00")
    if isinstance(obj, int):
        return b"I" + struct.pack("<q", obj)
    if isinstance(obj, float):
        return b"F" + struct.pack("<d", obj)
    if isinstance(obj, str):
        raw = obj.encode()
        return b"S" + struct.pack("<I", len(raw)) + raw
    if isinstance(obj, np.ndarray):
        dt = obj.dtype.str.encode()
        shape = obj.shape
        head = struct.pack("<I", len(dt)) + dt + struct.pack("<I", len(shape))
        head += b"".join(struct.pack("<q", s) for s in shape)
        return b"A" + head + np.ascontiguousarray(obj).tobytes()
    if isinstance(obj, (list, tuple)):
        body = b"".join(_pack(v) for v in obj)
        return b"L" + struct.pack("<I", len(obj)) + body
    if isinstance(obj, dict):
        body = b""
        for k in obj:  # insertion order is part of the format
            body += _pack(str(k)) + _pack(obj[k])
        return b"D" + struct.pack("<I", len(obj)) + body
    raise TypeError(f"cannot serialize {type(obj)}")


def _unpack(raw: bytes, off: int = 0):
    tag = raw[off : off + 1]
    off += 1
    if tag == b"N":
        return None, off
    if tag == b"B":
        return raw[off] == 1, off + 1
    if tag == b"I":
        return struct.unpack_from("<q", raw, off)[0], off + 8
    if tag == b"F":
        return struct.unpack_from("<d", raw, off)[0], off + 8
    if tag == b"S":
        n = struct.unpack_from("<I", raw, off)[0]
        off += 4
        return raw[off : off + n].decode(), off + n
    if tag == b"A":
        n = struct.unpack_from("<I", raw, off)[0]
        off += 4
        dt = np.dtype(raw[off : off + n].decode())
        off += n
        ndim = struct.unpack_from("<I", raw, off)[0]
        off += 4
        shape = []
        for _ in range(ndim):
            shape.append(struct.unpack_from("<q", raw, off)[0])
            off += 8
        count = int(np.prod(shape)) if shape else 1
        nbytes = dt.itemsize * count
        arr = np.frombuffer(raw[off : off + nbytes], dtype=dt).reshape(shape).copy()
        return arr, off + nbytes
    if tag == b"L":
        n = struct.unpack_from("<I", raw, off)[0]
        off += 4
        out = []
        for _ in range(n):
            v, off = _unpack(raw, off)
            out.append(v)
        return out, off
    if tag == b"D":
        n = struct.unpack_from("<I", raw, off)[0]
        off += 4
        out = {}
        for _ in range(n):
            k, off = _unpack(raw, off)
            v, off = _unpack(raw, off)
            out[k] = v
        return out, off
    raise FormatError(f"unknown tag {tag!r} at offset {off - 1}")


def write_model(path, model, header_extra: dict | None = None):
    state = model.to_state()
    block = _pack(state)
    digest = hashlib.sha256(block).hexdigest()
    lines = ["irzone-model 1"]
    lines.append(f"kind {state.get('kind', 'unknown')}")
    for k, v in (header_extra or {}).items():
        lines.append(f"{k} {v}")
    lines.append(f"checksum {digest}")
    lines.append(f"params {block.hex()}")
    _atomic_write(path, ("\n".join(lines) + "\n").encode())


def read_model_state(path) -> dict:
    text = Path(path).read_text()
    checksum = None
    block = None
    for line in text.splitlines():
        key, _, val = line.partition(" ")
        if key == "checksum":
            checksum = val.strip()
        elif key == "params":
            block = bytes.fromhex(val.strip())
    if block is None or checksum is None:
        raise FormatError(f"{path}: missing params or checksum")
    if hashlib.sha256(block).hexdigest() != checksum:
        raise ChecksumError(f"{path}: checksum mismatch")
    state, _ = _unpack(block)
    return state


def load_cascade(path):
    from .models.cascade import CascadeModel

    state = read_model_state(path)
    if state.get("kind") != "cascade":
        raise FormatError(f"{path}: not a cascade model file")
    return CascadeModel.from_state(state)


# --- overlay rendering (PPM P6) ----------------------------------------------

COLOR_WA_REF = (0, 0, 255)     # blue
COLOR_WA_ALG = (0, 255, 255)   # cyan
COLOR_HA_REF = (255, 0, 0)     # red
COLOR_HA_ALG = (255, 165, 0)   # orange
COLOR_FRAME = (255, 255, 255)  # white


def _region_boundary(region: np.ndarray) -> np.ndarray:
    """Pixels whose 4-neighborhood crosses the region edge (on either side)."""
    r = region.astype(bool)
    edge = np.zeros(r.shape, dtype=bool)
    for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        shifted = np.zeros_like(r)
        ys = slice(max(dy, 0), r.shape[0] + min(dy, 0))
        xs = slice(max(dx, 0), r.shape[1] + min(dx, 0))
        ys2 = slice(max(-dy, 0), r.shape[0] + min(-dy, 0))
        xs2 = slice(max(-dx, 0), r.shape[1] + min(-dx, 0))
        shifted[ys, xs] = r[ys2, xs2]
        edge |= r & ~shifted
    return edge


def render_overlay(background, ref_mask: ZoneMask | None, alg_mask: ZoneMask | None):
    """RGB overlay: grayscale temperature background, region boundaries drawn
    Ref beneath Alg (WA blue/cyan, HA red/orange), frame border white."""
    bg = np.asarray(background, dtype=np.float64)
    lo, hi = bg.min(), bg.max()
    gray = np.zeros_like(bg) if hi <= lo else (bg - lo) / (hi - lo)
    img = np.repeat((gray * 255).astype(np.uint8)[:, :, None], 3, axis=2)

    def draw(region, color):
        edge = _region_boundary(region)
        img[edge] = color

    # z-order: Ref first so Alg draws on top where they coincide
    if ref_mask is not None:
        if ref_mask.shape != bg.shape:
            raise ValueError("reference mask shape mismatch")
        draw(ref_mask.wa, COLOR_WA_REF)
        draw(ref_mask.ha, COLOR_HA_REF)
    if alg_mask is not None:
        if alg_mask.shape != bg.shape:
            raise ValueError("algorithm mask shape mismatch")
        draw(alg_mask.wa, COLOR_WA_ALG)
        draw(alg_mask.ha, COLOR_HA_ALG)
    img[0, :] = COLOR_FRAME
    img[-1, :] = COLOR_FRAME
    img[:, 0] = COLOR_FRAME
    img[:, -1] = COLOR_FRAME
    return img


def write_ppm(path, img: np.ndarray):
    h, w, c = img.shape
    if c != 3 or img.dtype != np.uint8:
        raise ValueError("image must be uint8 RGB")
    _atomic_write(path, f"P6\n{w} {h}\n255\n".encode() + img.tobytes())
