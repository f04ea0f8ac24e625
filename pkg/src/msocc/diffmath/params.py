"""Parameter storage, seeded initialization, AdamW, and checkpoint I/O.

Checkpoint container: magic "MSOC", u32 format version (1), u32 entry count,
then per entry u16 name length, UTF-8 name, u8 rank, u32 dims, float32
little-endian payload. Entries are written in lexicographic name order so a
round-trip is byte-identical. Optimizer moments live in the store under the
reserved "adam." prefix and bookkeeping under "meta.", which keeps resumed
training bitwise identical to an uninterrupted run.
"""

import logging
import math
import struct
import zlib

import numpy as np

from .tensor import Tensor

log = logging.getLogger("msocc")

RESERVED_PREFIXES = ("adam.", "meta.")


def _default_fan(shape):
    if len(shape) == 2:  # linear (in, out)
        return shape[0], shape[1]
    if len(shape) == 4:  # conv2d (Cout, Cin, 3, 3)
        return shape[1] * 9, shape[0] * 9
    if len(shape) == 5:  # conv3d (Cout, Cin, 3, 3, 3)
        return shape[1] * 27, shape[0] * 27
    n = int(np.prod(shape)) if shape else 1
    return n, n


class ParameterStore:
    """Named float32 parameters with deterministic (lexicographic) iteration."""

    def __init__(self, seed=0):
        self.entries = {}
        self.version = 0
        self.seed = int(seed)

    def param(self, name, shape, init="xavier", fan=None):
        """Create-or-get. Initialization draws from a stream named by `name`,
        so adding or removing other parameters never shifts anyone's init."""
        shape = tuple(shape)
        if name in self.entries:
            t = self.entries[name]
            if t.data.shape != shape:
                raise ValueError(
                    f"parameter '{name}' exists with shape {t.data.shape}, requested {shape}")
            return t
        if init == "zeros":
            data = np.zeros(shape, np.float32)
        elif init == "xavier":
            fan_in, fan_out = fan if fan is not None else _default_fan(shape)
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            rng = np.random.default_rng(
                np.random.SeedSequence((self.seed, zlib.crc32(name.encode()))))
            data = rng.uniform(-bound, bound, size=shape).astype(np.float32)
        else:
            raise ValueError(f"unknown init '{init}'")
        t = Tensor(data, requires_grad=True)
        # Parameters are gradient roots: force tracking even when the first
        # touch happens inside a no_grad() block (e.g. computing a baseline
        # before training), where Tensor() would silently mask the flag.
        t.requires_grad = True
        self.entries[name] = t
        return t

    def model_names(self):
        return sorted(n for n in self.entries
                      if not n.startswith(RESERVED_PREFIXES))

    def names(self):
        return sorted(self.entries)

    def __getitem__(self, name):
        return self.entries[name]

    def __contains__(self, name):
        return name in self.entries

    def zero_grad(self):
        for n in self.names():
            self.entries[n].grad = None

    def parameters(self):
        return [self.entries[n] for n in self.model_names()]


def sgd_adam_step(store, lr, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
    """One decoupled-weight-decay Adam step over every model parameter."""
    store.version += 1
    t = store.version
    b1, b2 = betas
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    for name in store.model_names():
        p = store.entries[name]
        if p.grad is None:
            log.warning("sgd_adam_step: no gradient for '%s'; entry skipped", name)
            continue
        g = p.grad
        mname, vname = "adam.m." + name, "adam.v." + name
        if mname not in store.entries:
            store.entries[mname] = Tensor(np.zeros_like(p.data))
            store.entries[vname] = Tensor(np.zeros_like(p.data))
        m = store.entries[mname].data
        v = store.entries[vname].data
        m *= np.float32(b1)
        m += np.float32(1 - b1) * g
        v *= np.float32(b2)
        v += np.float32(1 - b2) * (g * g)
        upd = (m / np.float32(bc1)) / (np.sqrt(v / np.float32(bc2)) + np.float32(eps))
        if weight_decay:
            upd = upd + np.float32(weight_decay) * p.data
        p.data -= np.float32(lr) * upd
    return store


def save_checkpoint(store, path):
    """Serialize the store (parameters, moments, metadata) to one file."""
    entries = dict(store.entries)
    entries["meta.version"] = Tensor(np.float32(store.version))
    blob = bytearray(b"MSOC")
    blob += struct.pack("<I", 1)
    names = sorted(entries)
    blob += struct.pack("<I", len(names))
    for name in names:
        data = entries[name].data
        nb = name.encode("utf-8")
        blob += struct.pack("<H", len(nb))
        blob += nb
        blob += struct.pack("<B", data.ndim)
        for d in data.shape:
            blob += struct.pack("<I", d)
        blob += np.ascontiguousarray(data, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def load_checkpoint(path):
    """Read a checkpoint back into a ParameterStore. Bit-exact round trip."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != b"MSOC":
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    (fmt,) = struct.unpack_from("<I", blob, 4)
    if fmt != 1:
        raise ValueError(f"{path}: unsupported checkpoint version {fmt}")
    (count,) = struct.unpack_from("<I", blob, 8)
    off = 12
    store = ParameterStore()
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", blob, off)
        off += 2
        name = blob[off : off + nlen].decode("utf-8")
        off += nlen
        rank = blob[off]
        off += 1
        dims = struct.unpack_from(f"<{rank}I", blob, off)
        off += 4 * rank
        n = int(np.prod(dims)) if rank else 1
        data = np.frombuffer(blob, dtype="<f4", count=n, offset=off).reshape(dims)
        off += 4 * n
        trainable = not name.startswith(RESERVED_PREFIXES)
        store.entries[name] = Tensor(data.copy(), requires_grad=trainable)
    meta = store.entries.pop("meta.version", None)
    if meta is not None:
        store.version = int(meta.data)
    return store
