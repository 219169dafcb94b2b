"""Weight sets: seeded initialisation and a bit-exact binary format.

File layout: a little-endian uint32 byte length, a UTF-8 JSON header
``{"format", "version", "seed", "arrays": [{"name", "shape"}, ...]}``, then
every array's values as little-endian float32 in header order.
"""

from __future__ import annotations

import json
import math
import struct

import numpy as np

from ..errors import MaskFormatError, ShapeError
from .graph import NetSpec

FORMAT = "spinecobb-weights"
VERSION = 1


class WeightSet:
    """Mapping of parameter name (``layer.param``) to a float32 array."""

    def __init__(self, arrays: dict[str, np.ndarray], seed: int | None = None):
        self.arrays = {k: np.asarray(v, dtype=np.float32) for k, v in arrays.items()}
        for arr in self.arrays.values():
            arr.flags.writeable = False
        self.seed = seed

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def __contains__(self, name: str) -> bool:
        return name in self.arrays

    def __eq__(self, other):
        if not isinstance(other, WeightSet):
            return NotImplemented
        return (list(self.arrays) == list(other.arrays)
                and all(np.array_equal(self.arrays[k], other.arrays[k]) for k in self.arrays))

    def check(self, spec: NetSpec) -> None:
        for name, shape in spec.parameter_shapes():
            if name not in self.arrays:
                raise ShapeError(f"weight set is missing {name}")
            if self.arrays[name].shape != shape:
                raise ShapeError(f"{name} has shape {self.arrays[name].shape}, spec requires {shape}")

    def with_zeroed(self, prefixes: tuple[str, ...]) -> "WeightSet":
        arrays = {k: (np.zeros_like(v) if k.startswith(prefixes) else v) for k, v in self.arrays.items()}
        return WeightSet(arrays, self.seed)

    def subset(self, spec: NetSpec) -> "WeightSet":
        return WeightSet({name: self.arrays[name] for name, _ in spec.parameter_shapes()}, self.seed)


def init_weights(spec: NetSpec, seed: int = 0) -> WeightSet:
    """Conv weights and biases uniform in +-1/sqrt(fan_in); norm gamma 1, beta 0."""
    rng = np.random.default_rng(seed)
    arrays = {}
    for layer in spec.layers:
        if layer.kind == "conv":
            (_, (c_out, c_in, k, _)), _ = layer.params
            bound = 1.0 / math.sqrt(c_in * k * k)
            arrays[f"{layer.name}.weight"] = rng.uniform(-bound, bound, (c_out, c_in, k, k))
            arrays[f"{layer.name}.bias"] = rng.uniform(-bound, bound, (c_out,))
        elif layer.kind == "instance_norm":
            (_, (c,)), _ = layer.params
            arrays[f"{layer.name}.gamma"] = np.ones(c)
            arrays[f"{layer.name}.beta"] = np.zeros(c)
    return WeightSet(arrays, seed)


def dump_weights(weights: WeightSet) -> bytes:
    header = {
        "format": FORMAT,
        "version": VERSION,
        "seed": weights.seed,
        "arrays": [{"name": k, "shape": list(v.shape)} for k, v in weights.arrays.items()],
    }
    head = json.dumps(header, separators=(",", ":")).encode("utf-8")
    body = b"".join(v.astype("<f4").tobytes() for v in weights.arrays.values())
    return struct.pack("<I", len(head)) + head + body


def load_weights(data: bytes) -> WeightSet:
    if len(data) < 4:
        raise MaskFormatError("weight file too short", 0)
    (n,) = struct.unpack_from("<I", data, 0)
    try:
        header = json.loads(data[4:4 + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MaskFormatError(f"bad weight header: {exc}", 4) from exc
    if header.get("format") != FORMAT:
        raise MaskFormatError(f"not a {FORMAT} file", 4)
    pos = 4 + n
    arrays = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = math.prod(shape)
        chunk = data[pos:pos + 4 * count]
        if len(chunk) != 4 * count:
            raise MaskFormatError(f"truncated data for {entry['name']}", pos)
        arrays[entry["name"]] = np.frombuffer(chunk, dtype="<f4").reshape(shape).astype(np.float32)
        pos += 4 * count
    if pos != len(data):
        raise MaskFormatError("trailing bytes after weight data", pos)
    return WeightSet(arrays, header.get("seed"))
