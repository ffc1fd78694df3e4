"""File formats.

Trials (BTF1): 8-byte magic ``BELLTRL1``, 8-byte little-endian trial count, then
one byte per trial (bit 0 = x, 1 = y, 2 = a, 3 = b, upper bits zero).
Trials (CSV): header ``x,y,a,b`` and one 0/1 row per trial.
Bits: 8-byte little-endian bit count, then the bits packed most significant
bit first.
Tables: JSON objects keyed "a,b,x,y" (outcome 1 = detection) with floats
written in round-trip precision.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .core import JointDistribution, as_codes
from .errors import MalformedTrialData

MAGIC = b"BELLTRL1"
HEADER = 16


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _atomic_write(path, data: bytes):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------- trials

def write_trials(path, stream) -> None:
    codes = as_codes(stream)
    _atomic_write(path, MAGIC + np.uint64(codes.size).tobytes() + codes.tobytes())


def trial_count(path) -> int:
    with open(path, "rb") as f:
        head = f.read(HEADER)
    if len(head) < HEADER or head[:8] != MAGIC:
        raise MalformedTrialData(f"{path}: not a BTF1 trial file")
    return int(np.frombuffer(head[8:], dtype="<u8")[0])


def read_trials(path, skip: int = 0, take: int | None = None) -> np.ndarray:
    """Trial bytes [skip, skip + take) of a BTF1 or CSV file."""
    path = Path(path)
    with open(path, "rb") as f:
        head = f.read(8)
    if head != MAGIC:
        codes = read_trials_csv(path)
        end = codes.size if take is None else skip + take
        if end > codes.size:
            raise MalformedTrialData(f"{path}: has {codes.size} trials, {end} requested")
        return codes[skip:end]
    total = trial_count(path)
    actual = path.stat().st_size - HEADER
    if actual != total:
        raise MalformedTrialData(f"{path}: header announces {total} trials, file holds {actual}")
    n = total - skip if take is None else take
    if skip < 0 or n < 0 or skip + n > total:
        raise MalformedTrialData(f"{path}: has {total} trials, {skip + n} requested")
    codes = np.fromfile(path, dtype=np.uint8, count=n, offset=HEADER + skip)
    if codes.size and int(codes.max()) > 15:
        bad = int(np.argmax(codes > 15))
        raise MalformedTrialData(f"trial {skip + bad}: byte {int(codes[bad]):#04x} has nonzero high bits")
    return codes


def write_trials_csv(path, stream) -> None:
    codes = as_codes(stream)
    rows = np.stack([codes & 1, (codes >> 1) & 1, (codes >> 2) & 1, (codes >> 3) & 1], axis=1)
    with open(path, "w", newline="") as f:
        f.write("x,y,a,b\n")
        np.savetxt(f, rows, fmt="%d", delimiter=",")


def read_trials_csv(path) -> np.ndarray:
    out = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x", "y", "a", "b"]:
            raise MalformedTrialData(f"{path}: expected header x,y,a,b")
        for i, row in enumerate(reader):
            if len(row) != 4 or any(v.strip() not in ("0", "1") for v in row):
                raise MalformedTrialData(f"trial {i}: malformed row {row!r}")
            x, y, a, b = (int(v) for v in row)
            out.append(x | y << 1 | a << 2 | b << 3)
    return np.array(out, dtype=np.uint8)


# ---------------------------------------------------------------- bits

def write_bits(path, bits) -> None:
    bits = np.asarray(bits, dtype=np.uint8)
    _atomic_write(path, np.uint64(bits.size).tobytes() + np.packbits(bits, bitorder="big").tobytes())


def read_bits(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise ValueError(f"{path}: missing bit-count header")
    n = int(np.frombuffer(raw[:8], dtype="<u8")[0])
    body = np.frombuffer(raw[8:], dtype=np.uint8)
    if body.size != (n + 7) // 8:
        raise ValueError(f"{path}: header announces {n} bits, body holds {body.size} bytes")
    return np.unpackbits(body, bitorder="big", count=n)


def bits_to_hex(bits) -> str:
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="big").tobytes().hex().upper()


# ---------------------------------------------------------------- tables

def table_to_dict(table) -> dict[str, float]:
    t = np.asarray(table, dtype=float).reshape(2, 2, 2, 2)
    return {f"{a},{b},{x},{y}": float(t[a, b, x, y])
            for a in (0, 1) for b in (0, 1) for x in (0, 1) for y in (0, 1)}


def table_from_dict(obj: dict) -> np.ndarray:
    t = np.empty((2, 2, 2, 2))
    seen = set()
    for key, value in obj.items():
        parts = key.replace(" ", "").split(",")
        if len(parts) != 4 or any(p not in ("0", "1") for p in parts):
            raise ValueError(f"bad table key {key!r}")
        a, b, x, y = (int(p) for p in parts)
        t[a, b, x, y] = float(value)
        seen.add((a, b, x, y))
    if len(seen) != 16:
        raise ValueError(f"table needs 16 entries, got {len(seen)}")
    return t


def write_json(path, obj) -> None:
    _atomic_write(path, (json.dumps(obj, indent=2, sort_keys=False) + "\n").encode())


def read_json(path):
    return json.loads(Path(path).read_text())


def _table_payload(obj: dict) -> dict:
    for key in ("q", "t", "table", "p"):
        if key in obj and isinstance(obj[key], dict):
            return obj[key]
    return obj


def load_distribution(path) -> JointDistribution:
    return JointDistribution(table_from_dict(_table_payload(read_json(path))))


def load_bell_function(path):
    from .pbr import BellFunction

    return BellFunction(table_from_dict(_table_payload(read_json(path))))
