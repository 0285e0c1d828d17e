"""Binary checkpoint format.

Layout (all integers little-endian)::

    b"DYGP" | version u32 | count u32
    count x [ name_len u32 | name utf-8 | rows u64 | cols u64 | rows*cols f64 ]
    adam: step u64 | lr f64 | beta1 f64 | beta2 f64 | eps f64
    count x [ m: rows*cols f64 | v: rows*cols f64 ]

Vectors are stored as ``1 x d`` matrices.
"""
from __future__ import annotations

import struct

import numpy as np

from .params import AdamState, Parameter, ParameterStore

MAGIC = b"DYGP"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _as_2d(shape: tuple[int, ...]) -> tuple[int, int]:
    if len(shape) == 2:
        return shape
    if len(shape) == 1:
        return 1, shape[0]
    if len(shape) == 0:
        return 1, 1
    raise CheckpointError(f"cannot store a tensor of rank {len(shape)}")


def _f64(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def dumps(store: ParameterStore, adam: AdamState | None = None) -> bytes:
    adam = adam or AdamState()
    parts = [MAGIC, struct.pack("<II", VERSION, len(store))]
    for p in store:
        name = p.name.encode("utf-8")
        rows, cols = _as_2d(p.value.shape)
        parts += [struct.pack("<I", len(name)), name, struct.pack("<QQ", rows, cols), _f64(p.value)]
    parts.append(struct.pack("<Qdddd", adam.step_count, adam.learning_rate, adam.beta1,
                             adam.beta2, adam.eps))
    for p in store:
        parts += [_f64(p.m), _f64(p.v)]
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("truncated checkpoint")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64)


def loads(data: bytes, template: ParameterStore | None = None) -> tuple[ParameterStore, AdamState]:
    """Decode a checkpoint. With ``template`` the names and shapes must match it."""
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise CheckpointError("bad magic: not a DYGP checkpoint")
    version, count = r.unpack("<II")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    entries = []
    for _ in range(count):
        (name_len,) = r.unpack("<I")
        name = r.take(name_len).decode("utf-8")
        rows, cols = r.unpack("<QQ")
        entries.append((name, rows, cols, r.array(rows * cols)))
    step, lr, b1, b2, eps = r.unpack("<Qdddd")
    moments = [(r.array(rows * cols), r.array(rows * cols)) for _, rows, cols, _ in entries]
    if r.pos != len(data):
        raise CheckpointError("trailing bytes after checkpoint payload")

    if template is not None:
        names = [e[0] for e in entries]
        if set(names) != set(template.names()):
            missing = sorted(set(template.names()) - set(names))
            extra = sorted(set(names) - set(template.names()))
            raise CheckpointError(f"parameter set mismatch: missing {missing}, unexpected {extra}")
    store = ParameterStore()
    for (name, rows, cols, flat), (m, v) in zip(entries, moments):
        if template is not None:
            ref = template[name]
            if _as_2d(ref.shape) != (rows, cols):
                raise CheckpointError(f"shape mismatch for parameter {name!r}: checkpoint has "
                                      f"{rows}x{cols}, config expects {_as_2d(ref.shape)[0]}x"
                                      f"{_as_2d(ref.shape)[1]}")
            shape, trainable, frozen = ref.shape, ref.trainable, ref.frozen_rows
        else:
            shape, trainable, frozen = (rows, cols), True, ()
        p = Parameter(name, flat.reshape(shape), trainable=trainable, frozen_rows=frozen)
        p.m[...] = m.reshape(shape)
        p.v[...] = v.reshape(shape)
        store.add(p)
    return store, AdamState(learning_rate=lr, beta1=b1, beta2=b2, eps=eps, step_count=step)


def save_checkpoint(store: ParameterStore, path, adam: AdamState | None = None) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(store, adam))


def load_checkpoint(path, template: ParameterStore | None = None) -> tuple[ParameterStore, AdamState]:
    with open(path, "rb") as fh:
        return loads(fh.read(), template)
