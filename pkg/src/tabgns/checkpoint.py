"""Self-describing binary checkpoints for SuperNets and extracted architectures.

Layout::

    magic (8 bytes)  b"TABGNS\\x00\\x01"
    header length    unsigned 64-bit little endian
    header           UTF-8 JSON, sorted keys, no whitespace
    arrays           raw little-endian float64, in header order
    digest           sha256 of everything above (32 bytes)

Byte output is a pure function of the model, so save -> load -> save
reproduces the file exactly.
"""
from __future__ import annotations

import hashlib
import json
import os
import struct

import numpy as np

from . import supernet as sn
from .errors import ConfigError, IntegrityError
from .grad_core import DenseLayer

MAGIC = b"TABGNS\x00\x01"
FORMAT_VERSION = 1
_DIGEST = 32


def _array_entries(named: list) -> tuple[list, bytes]:
    entries, chunks, offset = [], [], 0
    for name, arr in named:
        data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        entries.append({"name": name, "shape": list(np.shape(arr)), "offset": offset, "nbytes": len(data)})
        chunks.append(data)
        offset += len(data)
    return entries, b"".join(chunks)


def _layer_arrays(layers) -> list:
    named = []
    for i, layer in enumerate(layers):
        named.append((f"W{i}", layer.weight))
        named.append((f"b{i}", layer.bias))
    return named


def dumps(model, meta: dict | None = None) -> bytes:
    """Serialize a SuperNet or Architecture. ``meta`` must be JSON-able."""
    if isinstance(model, sn.SuperNet):
        named = _layer_arrays(model.layers) + [("gates", model.logits)]
        header = {"kind": "supernet", "tau": float(model.tau),
                  "seed": None if model.seed is None else int(model.seed)}
    elif isinstance(model, sn.Architecture):
        named = _layer_arrays(model.layers)
        header = {"kind": "architecture", "kept": [[int(i) for i in k] for k in model.kept]}
    else:
        raise TypeError(f"cannot checkpoint object of type {type(model).__name__}")
    entries, payload = _array_entries(named)
    header.update({
        "format": "tabgns-checkpoint",
        "version": FORMAT_VERSION,
        "space": model.space.to_dict(),
        "n_layers": len(model.layers),
        "arrays": entries,
        "meta": meta or {},
    })
    head = json.dumps(header, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")
    body = MAGIC + struct.pack("<Q", len(head)) + head + payload
    return body + hashlib.sha256(body).digest()


def loads(blob: bytes):
    """Inverse of :func:`dumps`. Returns ``(model, meta)``.

    Any truncation, bit flip or malformed header raises IntegrityError.
    """
    if len(blob) < len(MAGIC) + 8 + _DIGEST or blob[: len(MAGIC)] != MAGIC:
        raise IntegrityError("not a tabgns checkpoint (bad magic or truncated)")
    body, digest = blob[:-_DIGEST], blob[-_DIGEST:]
    if hashlib.sha256(body).digest() != digest:
        raise IntegrityError("checkpoint digest mismatch; file is corrupted")
    (n_head,) = struct.unpack("<Q", body[len(MAGIC): len(MAGIC) + 8])
    start = len(MAGIC) + 8
    try:
        header = json.loads(body[start: start + n_head].decode("utf-8"))
        payload = memoryview(body)[start + n_head:]
        arrays = {}
        for e in header["arrays"]:
            raw = payload[e["offset"]: e["offset"] + e["nbytes"]]
            if len(raw) != e["nbytes"]:
                raise ValueError(f"array {e['name']} runs past end of file")
            arrays[e["name"]] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(e["shape"])
        space = sn.SearchSpace(**header["space"])
        layers = [DenseLayer(arrays[f"W{i}"], arrays[f"b{i}"]) for i in range(header["n_layers"])]
        if header["kind"] == "supernet":
            model = sn.SuperNet(space, layers, arrays["gates"], tau=header["tau"], seed=header["seed"])
        elif header["kind"] == "architecture":
            model = sn.Architecture(space, header["kept"], layers)
        else:
            raise ValueError(f"unknown checkpoint kind {header['kind']!r}")
    except IntegrityError:
        raise
    except Exception as exc:  # digest matched but the content is not a model we can build
        raise IntegrityError(f"malformed checkpoint: {exc}") from exc
    return model, header["meta"]


def save(model, path, meta: dict | None = None) -> None:
    blob = dumps(model, meta)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def load(path):
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except FileNotFoundError as exc:
        raise ConfigError(f"checkpoint {path} does not exist") from exc
    except OSError as exc:
        raise IntegrityError(f"cannot read checkpoint {path}: {exc}") from exc
    return loads(blob)
