"""Secret keys, the keyed PRF, and per-chunk homomorphic block tags.

A tag binds one stored block to its logical position: for every chunk u of
block m at grid cell (row i, server j) under append counter ctr,

    tag[u] = PRF(kprf; fid, i, j, ctr, u) + alpha * m[u]

in the file's field.  Linear combinations of tags therefore authenticate
the same combinations of blocks, which is what lets servers answer audits
with aggregates and apply client-supplied tag deltas to self-updated
parity blocks without ever seeing the key.

The PRF is keyed BLAKE2b: the first 16 bytes of blake2b(key=kprf) over the
canonical serialization fid || i || j || ctr || u with fid as 16 raw bytes
and each index as an 8-byte big-endian integer, reduced into the field
(see Field.element_from_wide_bytes).  This serialization is fixed so
independently produced artifacts interoperate.  fid and the chunk index u
take part in the input to domain-separate files under one key and to give
every chunk its own mask.
"""

from __future__ import annotations

import hashlib
import os
import random
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ParameterError
from .field import BinaryField, Field

_DIGEST = 16


@dataclass(frozen=True)
class SecretKey:
    """Client-only key: a uniform field element and a 32-byte PRF key."""

    alpha: int
    kprf: bytes

    def __post_init__(self):
        if len(self.kprf) != 32:
            raise ParameterError("kprf must be exactly 32 bytes")


@dataclass(frozen=True)
class TagContext:
    """Logical position a tag is bound to."""

    fid: bytes
    row: int  # 1-based grid row
    server: int  # 1-based server index
    ctr: int  # append counter the tag was issued under
    chunk: int = 0

    def __post_init__(self):
        if len(self.fid) != 16:
            raise ParameterError("fid must be exactly 16 bytes")
        if min(self.row, self.server, self.ctr, self.chunk) < 0:
            raise ParameterError("context indices must be nonnegative")


def keygen(fld: Field, rng=None) -> SecretKey:
    """Sample a fresh key; rng is for deterministic tests and simulations."""
    if rng is None:
        return SecretKey(fld.rand_element(random.SystemRandom()), os.urandom(32))
    return SecretKey(fld.rand_element(rng), rng.getrandbits(256).to_bytes(32, "big"))


def _prefix(fid: bytes, row: int, server: int, ctr: int) -> bytes:
    return (
        fid
        + row.to_bytes(8, "big")
        + server.to_bytes(8, "big")
        + ctr.to_bytes(8, "big")
    )


_U8: list[bytes] = []


def _u8(u: int) -> bytes:
    while len(_U8) <= u:
        _U8.append(len(_U8).to_bytes(8, "big"))
    return _U8[u]


def prf(kprf: bytes, ctx: TagContext, fld: Field) -> int:
    """One PRF value, reduced into the field."""
    msg = _prefix(ctx.fid, ctx.row, ctx.server, ctx.ctr) + _u8(ctx.chunk)
    digest = hashlib.blake2b(msg, key=kprf, digest_size=_DIGEST).digest()
    return fld.element_from_wide_bytes(digest)


def prf_vector(kprf: bytes, ctx: TagContext, count: int, fld: Field):
    """PRF values for chunks 0..count-1 of one cell, as a chunk vector.

    Equals [prf(kprf, ctx at chunk u) for u in range(count)]; the shared
    40-byte input prefix is hashed once and reused per chunk.
    """
    base = hashlib.blake2b(key=kprf, digest_size=_DIGEST)
    base.update(_prefix(ctx.fid, ctx.row, ctx.server, ctx.ctr))
    if isinstance(fld, BinaryField):
        buf = bytearray(_DIGEST * count)
        pos = 0
        for u in range(count):
            h = base.copy()
            h.update(_u8(u))
            buf[pos : pos + _DIGEST] = h.digest()
            pos += _DIGEST
        raw = np.frombuffer(bytes(buf), dtype=np.uint8).reshape(count, _DIGEST)
        if fld.width == 8:
            return raw[:, 15].copy()
        return raw[:, 14:16].copy().view(">u2").astype(np.uint16).ravel()
    p = fld.order
    out = []
    for u in range(count):
        h = base.copy()
        h.update(_u8(u))
        out.append(int.from_bytes(h.digest(), "big") % p)
    return tuple(out)


# Verification revisits the same (fid, row, server, ctr) cells across
# audits; memoize their PRF vectors.  Cleared wholesale when full.
_PRF_CACHE: dict = {}
_PRF_CACHE_MAX = 16384


def prf_vector_cached(kprf: bytes, ctx: TagContext, count: int, fld: Field):
    key = (kprf, ctx.fid, ctx.row, ctx.server, ctx.ctr, count, fld.token)
    vec = _PRF_CACHE.get(key)
    if vec is None:
        if len(_PRF_CACHE) >= _PRF_CACHE_MAX:
            _PRF_CACHE.clear()
        vec = prf_vector(kprf, ctx, count, fld)
        if isinstance(vec, np.ndarray):
            vec.flags.writeable = False
        _PRF_CACHE[key] = vec
    return vec


def clear_prf_cache() -> None:
    _PRF_CACHE.clear()


def tag_block(sk: SecretKey, block, ctx: TagContext, fld: Field):
    """Tag every chunk of a block at the given position."""
    masks = prf_vector(sk.kprf, ctx, len(block), fld)
    return fld.vec_add(masks, fld.vec_scale(sk.alpha, block))


def verify_block(sk: SecretKey, block, tag, ctx: TagContext, fld: Field) -> bool:
    """Check a (block, tag) pair against its expected position."""
    if len(block) != len(tag):
        raise ParameterError("block and tag must have the same chunk count")
    masks = prf_vector_cached(sk.kprf, ctx, len(block), fld)
    return fld.vec_eq(tag, fld.vec_add(masks, fld.vec_scale(sk.alpha, block)))


def tag_delta(
    sk: SecretKey, ctx_old: TagContext, ctx_new: TagContext, delta_block, fld: Field
):
    """Tag adjustment moving a slot from ctx_old to ctx_new.

    Adding the result chunk-wise to the old tag yields a tag that verifies
    against (old block + delta_block) under ctx_new.  Both contexts are
    explicit because an append shifts a parity slot's row and counter at
    the same time.
    """
    if ctx_old.fid != ctx_new.fid or ctx_old.server != ctx_new.server:
        raise ParameterError("tag delta must stay within one file and server")
    c = len(delta_block)
    old = prf_vector(sk.kprf, ctx_old, c, fld)
    new = prf_vector(sk.kprf, ctx_new, c, fld)
    return fld.vec_add(fld.vec_sub(new, old), fld.vec_scale(sk.alpha, delta_block))


# -- keyfile persistence -------------------------------------------------

def write_keyfile(path, sk: SecretKey, fld: Field) -> None:
    """Two-line text keyfile; alpha decimal for prime fields, hex for binary."""
    alpha = str(sk.alpha) if fld.kind == "prime" else format(sk.alpha, "x")
    data = f"alpha={alpha}\nkprf={sk.kprf.hex()}\n"
    fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    with os.fdopen(fd, "w") as fh:
        fh.write(data)


def read_keyfile(path, fld: Field) -> SecretKey:
    fields = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or key not in ("alpha", "kprf"):
                raise FormatError(f"keyfile line {lineno}: unknown entry {line!r}")
            fields[key] = value
    if set(fields) != {"alpha", "kprf"}:
        raise FormatError("keyfile must contain exactly alpha and kprf")
    try:
        alpha = int(fields["alpha"], 10 if fld.kind == "prime" else 16)
        kprf = bytes.fromhex(fields["kprf"])
    except ValueError as exc:
        raise FormatError(f"keyfile: {exc}") from None
    if len(kprf) != 32:
        raise FormatError("keyfile: kprf must be 64 hex characters")
    fld.check_element(alpha)
    return SecretKey(alpha, kprf)
