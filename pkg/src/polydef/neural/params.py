"""Named parameter storage, seeded initialization, and checkpoint IO.

Parameters are created in a deterministic order from a seeded generator,
so two stores built the same way hold identical values. Checkpoints are a
single JSON document with base64 raw buffers; round-trips are
byte-identical.
"""

from __future__ import annotations

import base64
import json

import numpy as np

from .tensor import Tensor

CHECKPOINT_FORMAT = "polydef/checkpoint/1"

INIT_SCALE = 0.05  # uniform(-0.05, 0.05) for all learned weights


class ParamStore:
    def __init__(self, seed: int = 0, dtype=np.float32):
        self.seed = int(seed)
        self.dtype = np.dtype(dtype)
        self.rng = np.random.default_rng(seed)
        self.params: dict[str, Tensor] = {}

    def add(self, name: str, shape, init: str = "uniform") -> Tensor:
        """Create a parameter; re-adding an existing name returns it unchanged."""
        if name in self.params:
            existing = self.params[name]
            if existing.values.shape != tuple(shape):
                raise ValueError(f"parameter {name!r} exists with shape {existing.values.shape}")
            return existing
        if init == "uniform":
            values = self.rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)
        elif init == "zeros":
            values = np.zeros(shape)
        else:
            raise ValueError(f"unknown init {init!r}")
        tensor = Tensor(values.astype(self.dtype), requires_grad=True, name=name)
        self.params[name] = tensor
        return tensor

    def __contains__(self, name):
        return name in self.params

    def __getitem__(self, name) -> Tensor:
        return self.params[name]

    def constant(self, values) -> Tensor:
        """Wrap raw values as a non-trainable tensor in the store dtype."""
        return Tensor(np.asarray(values, dtype=self.dtype))

    def zero_grads(self) -> None:
        for t in self.params.values():
            t.grad = None

    def num_values(self) -> int:
        return sum(t.values.size for t in self.params.values())

    def save(self, path, meta: dict | None = None) -> None:
        doc = {
            "format": CHECKPOINT_FORMAT,
            "seed": self.seed,
            "dtype": self.dtype.name,
            "meta": meta or {},
            "params": [
                {
                    "name": name,
                    "shape": list(t.values.shape),
                    "dtype": t.values.dtype.name,
                    "data": base64.b64encode(np.ascontiguousarray(t.values).tobytes()).decode(),
                }
                for name, t in sorted(self.params.items())
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
            fh.write("\n")

    @classmethod
    def load(cls, path) -> tuple["ParamStore", dict]:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"not a checkpoint file (format={doc.get('format')!r})")
        store = cls(seed=doc["seed"], dtype=np.dtype(doc["dtype"]))
        for p in doc["params"]:
            raw = base64.b64decode(p["data"])
            values = np.frombuffer(raw, dtype=np.dtype(p["dtype"])).reshape(p["shape"]).copy()
            store.params[p["name"]] = Tensor(values, requires_grad=True, name=p["name"])
        return store, doc.get("meta", {})
