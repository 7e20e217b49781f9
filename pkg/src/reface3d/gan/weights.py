"""Named-tensor archive (.rfkw) for generator/discriminator parameters.

Layout: magic "RFKW" | version u32 LE | index length u64 LE | UTF-8 JSON
index | raw payloads. The index maps tensor name -> {dtype, shape, offset,
length} with offsets relative to the start of the payload section (the byte
right after the index); payloads are little-endian float32. Keys are sorted
and the JSON is compact, so the same tensors always produce the same bytes.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..errors import IoError, MissingTensor, ParseError, TruncatedFile

MAGIC = b"RFKW"
VERSION = 1


@dataclass
class ModelWeights:
    tensors: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)

    def subset(self, prefix: str) -> dict[str, np.ndarray]:
        """Tensors under `prefix.`, with the prefix stripped."""
        plen = len(prefix) + 1
        return {k[plen:]: v for k, v in self.tensors.items() if k.startswith(prefix + ".")}


def save_weights(weights: ModelWeights, path) -> None:
    path = Path(path)
    names = sorted(weights.tensors)
    payloads = []
    entries = {}
    offset = 0
    for name in names:
        arr = np.ascontiguousarray(weights.tensors[name], dtype="<f4")
        blob = arr.tobytes()
        entries[name] = {
            "dtype": "float32",
            "shape": list(arr.shape),
            "offset": offset,
            "length": len(blob),
        }
        payloads.append(blob)
        offset += len(blob)
    index = {"__metadata__": weights.metadata, "tensors": entries}
    index_bytes = json.dumps(index, sort_keys=True, separators=(",", ":")).encode()
    header = MAGIC + struct.pack("<IQ", VERSION, len(index_bytes))
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(index_bytes)
            for blob in payloads:
                fh.write(blob)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_weights(path) -> ModelWeights:
    path = Path(path)
    if not path.is_file():
        raise IoError(f"no such file: {path}")
    raw = path.read_bytes()
    if len(raw) < 16 or raw[:4] != MAGIC:
        raise ParseError(f"{path}: not a RFKW weights file")
    version, index_len = struct.unpack_from("<IQ", raw, 4)
    if version != VERSION:
        raise ParseError(f"{path}: unsupported RFKW version {version}")
    try:
        index = json.loads(raw[16 : 16 + index_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: corrupt index: {exc}") from exc
    base = 16 + index_len
    tensors = {}
    for name, entry in index.get("tensors", {}).items():
        lo, hi = base + entry["offset"], base + entry["offset"] + entry["length"]
        if hi > len(raw):
            raise TruncatedFile(f"{path}: payload for {name!r} extends past end of file")
        arr = np.frombuffer(raw[lo:hi], dtype="<f4").reshape(entry["shape"])
        tensors[name] = arr.copy()
    return ModelWeights(tensors=tensors, metadata=index.get("__metadata__", {}))


def from_modules(metadata: dict, **modules: torch.nn.Module) -> ModelWeights:
    """Snapshot named modules into a ModelWeights (names prefixed by keyword)."""
    tensors = {}
    for prefix, module in modules.items():
        for name, tensor in module.state_dict().items():
            tensors[f"{prefix}.{name}"] = tensor.detach().cpu().numpy().astype(np.float32)
    return ModelWeights(tensors=tensors, metadata=metadata)


def load_into_module(weights: ModelWeights, prefix: str, module: torch.nn.Module) -> None:
    """Copy the `prefix.`-tensors into a module, validating names and shapes."""
    available = weights.subset(prefix)
    state = module.state_dict()
    missing = sorted(set(state) - set(available))
    if missing:
        raise MissingTensor(f"weights are missing {prefix}.{missing[0]} (+{len(missing) - 1} more)")
    converted = {}
    for name, target in state.items():
        arr = available[name]
        if tuple(arr.shape) != tuple(target.shape):
            raise MissingTensor(
                f"{prefix}.{name}: shape {tuple(arr.shape)} != expected {tuple(target.shape)}"
            )
        converted[name] = torch.from_numpy(np.ascontiguousarray(arr)).to(target.dtype)
    module.load_state_dict(converted)
