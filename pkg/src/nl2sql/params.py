"""Named parameter store and the binary checkpoint container.

Checkpoint layout: an 8-byte magic, a little-endian uint64 header length,
a JSON header listing (name, shape, offset) per tensor plus arbitrary
metadata, then the concatenated raw little-endian float64 payloads.  The
round trip is bit exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .autodiff import Tensor

MAGIC = b"NL2SQLT1"


class ParamStore:
    """Ordered name -> Tensor registry for all learnable weights."""

    def __init__(self):
        self.tensors: dict[str, Tensor] = {}

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self.tensors:
            raise ValueError(f"duplicate parameter {name!r}")
        t = Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)
        self.tensors[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors.items())

    def __len__(self) -> int:
        return len(self.tensors)

    def n_values(self) -> int:
        return sum(t.data.size for t in self.tensors.values())

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.grad = None

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        missing = set(self.tensors) - set(arrays)
        extra = set(arrays) - set(self.tensors)
        if missing or extra:
            raise ValueError(f"checkpoint mismatch: missing={sorted(missing)} "
                             f"extra={sorted(extra)}")
        for name, t in self.tensors.items():
            arr = arrays[name]
            if arr.shape != t.data.shape:
                raise ValueError(f"shape mismatch for {name!r}: "
                                 f"{arr.shape} vs {t.data.shape}")
            t.data = arr.astype(np.float64, copy=True)


class Initializer:
    """Seeded weight initialization helpers."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def linear(self, fan_in: int, fan_out: int) -> np.ndarray:
        std = np.sqrt(2.0 / (fan_in + fan_out))
        return self.rng.normal(0.0, std, size=(fan_in, fan_out))

    def vector(self, n: int, std: float = 0.1) -> np.ndarray:
        return self.rng.normal(0.0, std, size=(n,))

    def embedding(self, rows: int, dim: int, std: float = 0.1) -> np.ndarray:
        return self.rng.normal(0.0, std, size=(rows, dim))

    def zeros(self, *shape: int) -> np.ndarray:
        return np.zeros(shape)

    def ones(self, *shape: int) -> np.ndarray:
        return np.ones(shape)


def save_checkpoint(path: str | Path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    entries = []
    payloads = []
    offset = 0
    for name, arr in arrays.items():
        raw = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        payloads.append(raw)
        offset += len(raw)
    header = json.dumps({"tensors": entries, "meta": meta}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        for raw in payloads:
            fh.write(raw)


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        header_len = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        payload = fh.read()
    arrays = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=start)
        arrays[entry["name"]] = arr.reshape(shape).astype(np.float64)
    return arrays, header["meta"]
