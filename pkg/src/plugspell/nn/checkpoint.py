"""Binary checkpoint format and content fingerprints.

Layout: magic "CSCP", one version byte, 4-byte little-endian header length,
UTF-8 JSON header, then the concatenated little-endian float32 tensors. The
header carries the encoder config, a kind tag ("base" or "plugin"), free-form
extras (domain label, base fingerprint, vocab characters, seeds), and the
manifest: one entry per tensor with name, shape, payload offset, and its
trainable flag. Serialization is canonical (manifest sorted by name, sorted
JSON keys), so equal models produce equal bytes and one SHA-256 identifies a
model exactly.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from .core import EncoderConfig, Parameter

MAGIC = b"CSCP"
VERSION = 1


class CheckpointError(ValueError):
    """Malformed, truncated, or version-incompatible checkpoint."""


def serialize_checkpoint(params: dict, cfg: EncoderConfig, kind: str = "base",
                         extras: dict | None = None) -> bytes:
    manifest = []
    payload = bytearray()
    names = sorted(params)
    if len(names) != len(set(names)):
        raise CheckpointError("duplicate parameter names")
    for name in names:
        p = params[name]
        data = np.ascontiguousarray(p.data, dtype="<f4")
        manifest.append({
            "name": name,
            "shape": list(p.data.shape),
            "offset": len(payload),
            "trainable": bool(p.trainable),
        })
        payload += data.tobytes()
    header = {
        "format_version": VERSION,
        "kind": kind,
        "config": cfg.to_dict(),
        "extras": extras or {},
        "manifest": manifest,
    }
    header_bytes = json.dumps(header, sort_keys=True, ensure_ascii=False,
                              separators=(",", ":")).encode("utf-8")
    return MAGIC + bytes([VERSION]) + struct.pack("<I", len(header_bytes)) + header_bytes + bytes(payload)


def save_checkpoint(params: dict, cfg: EncoderConfig, path, kind: str = "base",
                    extras: dict | None = None) -> None:
    """Atomic write: serialize to a temp file, then rename into place."""
    blob = serialize_checkpoint(params, cfg, kind, extras)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


def deserialize_checkpoint(blob: bytes) -> tuple[dict, EncoderConfig, str, dict]:
    if len(blob) < 9 or blob[:4] != MAGIC:
        raise CheckpointError("bad magic bytes")
    if blob[4] != VERSION:
        raise CheckpointError(f"unsupported format version {blob[4]}")
    (header_len,) = struct.unpack("<I", blob[5:9])
    if 9 + header_len > len(blob):
        raise CheckpointError("truncated header")
    try:
        header = json.loads(blob[9:9 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable header: {exc}") from None
    if header.get("format_version") != VERSION:
        raise CheckpointError("header version mismatch")
    payload = blob[9 + header_len:]

    params: dict = {}
    expected_offset = 0
    for entry in header["manifest"]:
        name = entry["name"]
        shape = tuple(entry["shape"])
        nbytes = int(np.prod(shape, dtype=np.int64)) * 4 if shape else 4
        if entry["offset"] != expected_offset:
            raise CheckpointError(f"manifest offset mismatch at {name}")
        if entry["offset"] + nbytes > len(payload):
            raise CheckpointError(f"manifest entry {name} out of payload bounds")
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        data = np.frombuffer(payload, dtype="<f4", count=count,
                             offset=entry["offset"]).reshape(shape).copy()
        params[name] = Parameter(name, data, bool(entry["trainable"]))
        expected_offset += nbytes
    if expected_offset != len(payload):
        raise CheckpointError(f"payload size mismatch: manifest covers {expected_offset} bytes, "
                              f"file has {len(payload)}")
    cfg = EncoderConfig.from_dict(header["config"])
    return params, cfg, header["kind"], header.get("extras", {})


def load_checkpoint(path) -> tuple[dict, EncoderConfig, str, dict]:
    return deserialize_checkpoint(Path(path).read_bytes())


def fingerprint(params: dict, cfg: EncoderConfig, kind: str = "base",
                extras: dict | None = None) -> str:
    """SHA-256 of the canonical serialized form."""
    return hashlib.sha256(serialize_checkpoint(params, cfg, kind, extras)).hexdigest()


def file_fingerprint(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
