"""Binary checkpoint: header, JSON metadata, then named float32 tensors."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ChecksumOrLengthMismatch
from ..nn.optim import Adam
from ..signal_io import tensor_from_bytes, tensor_to_bytes
from .model import DCAE, DcaeConfig, IdentityModel

MAGIC = b"DCKP"
VERSION = 1


def _pack(meta, arrays):
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    out = bytearray(MAGIC + struct.pack("<HI", VERSION, len(blob)) + blob)
    out += struct.pack("<I", len(arrays))
    for name, arr in arrays.items():
        key = name.encode("utf-8")
        out += struct.pack("<H", len(key)) + key + tensor_to_bytes(arr)
    return bytes(out)


def _unpack(buf):
    if buf[:4] != MAGIC:
        raise ChecksumOrLengthMismatch("not a checkpoint file")
    version, mlen = struct.unpack_from("<HI", buf, 4)
    if version != VERSION:
        raise ChecksumOrLengthMismatch("unsupported checkpoint version %d" % version)
    off = 10
    meta = json.loads(buf[off:off + mlen].decode("utf-8"))
    off += mlen
    (count,) = struct.unpack_from("<I", buf, off)
    off += 4
    arrays = {}
    for _ in range(count):
        (klen,) = struct.unpack_from("<H", buf, off)
        off += 2
        name = buf[off:off + klen].decode("utf-8")
        off += klen
        arrays[name], off = tensor_from_bytes(buf, off)
    if off != len(buf):
        raise ChecksumOrLengthMismatch("trailing bytes in checkpoint")
    return meta, arrays


def save_checkpoint(path, model, optimizer=None, epoch=0, seed=0, extra=None):
    if isinstance(model, IdentityModel):
        meta = {"kind": "identity", "config": model.cfg.to_dict(), "epoch": epoch, "seed": seed}
        Path(path).write_bytes(_pack(meta, {}))
        return
    arrays = dict(model.state_arrays())
    meta = {"kind": "dcae", "config": model.cfg.to_dict(), "epoch": epoch, "seed": seed,
            "optimizer": None}
    if optimizer is not None:
        st = optimizer.state
        meta["optimizer"] = {"lr": st.lr, "beta1": st.beta1, "beta2": st.beta2,
                             "eps": st.eps, "t": st.t}
        for i, (m, v) in enumerate(zip(st.m, st.v)):
            arrays["adam.m.%d" % i] = m
            arrays["adam.v.%d" % i] = v
    if extra:
        meta["extra"] = extra
    Path(path).write_bytes(_pack(meta, arrays))


def load_checkpoint(path):
    """Return ``(model, optimizer_or_None, meta)``."""
    meta, arrays = _unpack(Path(path).read_bytes())
    cfg = DcaeConfig.from_dict(meta["config"])
    if meta["kind"] == "identity":
        return IdentityModel(cfg), None, meta
    model = DCAE(cfg, seed=0, dtype=np.float32)
    for name, p in model.named_parameters():
        p.data[...] = arrays[name]
    for name, b in model.named_buffers():
        b[...] = arrays[name]
    opt = None
    if meta.get("optimizer"):
        o = meta["optimizer"]
        opt = Adam(model.parameters(), lr=o["lr"], beta1=o["beta1"], beta2=o["beta2"], eps=o["eps"])
        opt.state.t = o["t"]
        for i in range(len(opt.params)):
            opt.state.m[i][...] = arrays["adam.m.%d" % i]
            opt.state.v[i][...] = arrays["adam.v.%d" % i]
    return model, opt, meta
