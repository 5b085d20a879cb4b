"""Binary file formats.

All integers are big-endian; every variable-size field carries a u32
length prefix.

``.anyc`` ciphertext::

    "ANYC" | u16 version | u8 preset | file_id | u16 r | tree * r | E_0
    | root commitment * r | per tree: u32 count, (C_i, C_i') * count
    | u8 cipher id | nonce                                  <- header (ct.bin)
    | u64 body length | body                                <- payload (payload.bin)

``.anyv`` verification set::

    "ANYV" | u16 version | u8 preset | file_id | u16 count | E_p * count

Key files share one envelope, ``"ANYK" | u16 version | u8 role | u8 preset``,
followed by a role-specific body. The public key uses ``"ANYP"``.
"""

import struct
from dataclasses import dataclass

from .algebra import G0Element, GTElement, generator, preset_by_id
from .algebra.scalar import scalar_from_bytes, scalar_to_bytes
from .privtree import decode_tree, encode_tree, iter_leaves
from .scheme import Ciphertext, MasterKeyShare, PrivateKey, PublicKey, VerificationSet

__all__ = [
    "FormatError",
    "VERSION",
    "ROLE_AUTHORITY",
    "ROLE_USER",
    "Keyring",
    "dump_ciphertext",
    "load_ciphertext",
    "split_ciphertext",
    "join_ciphertext",
    "dump_verification",
    "load_verification",
    "dump_public_key",
    "load_public_key",
    "dump_keyring",
    "load_keyring",
]

VERSION = 1
ROLE_AUTHORITY = 1
ROLE_USER = 2


class FormatError(ValueError):
    pass


class _Writer:
    def __init__(self):
        self.buf = bytearray()

    def raw(self, data):
        self.buf += data

    def u8(self, n):
        self.buf += struct.pack(">B", n)

    def u16(self, n):
        self.buf += struct.pack(">H", n)

    def u32(self, n):
        self.buf += struct.pack(">I", n)

    def u64(self, n):
        self.buf += struct.pack(">Q", n)

    def blob(self, data):
        self.u32(len(data))
        self.buf += data

    def text(self, s):
        self.blob(s.encode())

    def bytes(self):
        return bytes(self.buf)


class _Reader:
    def __init__(self, data):
        self.data = memoryview(bytes(data))
        self.pos = 0

    def _need(self, n):
        if self.pos + n > len(self.data):
            raise FormatError("truncated input")

    def raw(self, n):
        self._need(n)
        out = bytes(self.data[self.pos:self.pos + n])
        self.pos += n
        return out

    def _unpack(self, fmt, n):
        return struct.unpack(fmt, self.raw(n))[0]

    def u8(self):
        return self._unpack(">B", 1)

    def u16(self):
        return self._unpack(">H", 2)

    def u32(self):
        return self._unpack(">I", 4)

    def u64(self):
        return self._unpack(">Q", 8)

    def blob(self):
        return self.raw(self.u32())

    def text(self):
        try:
            return self.blob().decode()
        except UnicodeDecodeError as exc:
            raise FormatError("invalid UTF-8 text field") from exc

    def done(self):
        if self.pos != len(self.data):
            raise FormatError(f"{len(self.data) - self.pos} trailing bytes")


def _magic(r, expected):
    got = r.raw(4)
    if got != expected:
        raise FormatError(f"bad magic {got!r}, expected {expected!r}")
    version = r.u16()
    if version != VERSION:
        raise FormatError(f"unsupported format version {version}")
    try:
        return preset_by_id(r.u8())
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def _g0(params, data):
    try:
        return G0Element.from_bytes(params, data)
    except ValueError as exc:
        raise FormatError(f"bad G0 element: {exc}") from exc


def _gt(params, data):
    try:
        return GTElement.from_bytes(params, data)
    except ValueError as exc:
        raise FormatError(f"bad GT element: {exc}") from exc


# ---------------------------------------------------------------------------
# ciphertext

def _ct_header(ct):
    params = ct.E0.params
    w = _Writer()
    w.raw(b"ANYC")
    w.u16(VERSION)
    w.u8(params.preset_id)
    w.text(ct.file_id)
    w.u16(ct.r)
    for tree in ct.trees:
        w.blob(encode_tree(tree))
    w.blob(ct.E0.to_bytes())
    for c in ct.root_commitments:
        w.blob(c.to_bytes())
    for tree, table in zip(ct.trees, ct.leaf_components):
        paths = [path for path, _ in iter_leaves(tree)]
        w.u32(len(paths))
        for path in paths:
            C, C2 = table[path]
            w.blob(C.to_bytes())
            w.blob(C2.to_bytes())
    w.u8(ct.cipher_id)
    w.blob(ct.nonce)
    return w.bytes()


def dump_ciphertext(ct):
    w = _Writer()
    w.raw(_ct_header(ct))
    w.u64(len(ct.body))
    w.raw(ct.body)
    return w.bytes()


def _read_ct_header(r):
    params = _magic(r, b"ANYC")
    file_id = r.text()
    count = r.u16()
    if count < 1:
        raise FormatError("ciphertext needs at least one privilege tree")
    trees = []
    for _ in range(count):
        data = r.blob()
        try:
            tree, end = decode_tree(data)
        except ValueError as exc:
            raise FormatError(f"bad privilege tree: {exc}") from exc
        if end != len(data):
            raise FormatError("trailing bytes after privilege tree")
        trees.append(tree)
    E0 = _gt(params, r.blob())
    commitments = tuple(_g0(params, r.blob()) for _ in range(count))
    tables = []
    for tree in trees:
        paths = [path for path, _ in iter_leaves(tree)]
        if r.u32() != len(paths):
            raise FormatError("leaf component count does not match the tree")
        tables.append({path: (_g0(params, r.blob()), _g0(params, r.blob())) for path in paths})
    cipher_id = r.u8()
    nonce = r.blob()
    return params, file_id, tuple(trees), E0, commitments, tuple(tables), cipher_id, nonce


def load_ciphertext(data):
    r = _Reader(data)
    params, file_id, trees, E0, commitments, tables, cipher_id, nonce = _read_ct_header(r)
    body = r.raw(r.u64())
    r.done()
    if trees[0].label != "read" or any(t.index != i for i, t in enumerate(trees)):
        raise FormatError("privilege trees out of order")
    return Ciphertext(file_id, trees, E0, commitments, tables, nonce + body, cipher_id)


def split_ciphertext(data):
    """``.anyc`` bytes -> (header, body) without decoding group elements.

    Only framing is checked here; structural validation is load_ciphertext's job.
    """
    r = _Reader(data)
    _magic(r, b"ANYC")
    r.text()
    count = r.u16()
    for _ in range(count):
        r.blob()
    r.blob()
    for _ in range(count):
        r.blob()
    for _ in range(count):
        for _ in range(r.u32()):
            r.blob()
            r.blob()
    r.u8()
    r.blob()
    header_end = r.pos
    body = r.raw(r.u64())
    r.done()
    return bytes(r.data[:header_end]), body


def join_ciphertext(header, body):
    return header + struct.pack(">Q", len(body)) + body


# ---------------------------------------------------------------------------
# verification set

def dump_verification(vr, params):
    w = _Writer()
    w.raw(b"ANYV")
    w.u16(VERSION)
    w.u8(params.preset_id)
    w.text(vr.file_id)
    w.u16(len(vr.entries))
    for e in vr.entries:
        w.blob(e.to_bytes())
    return w.bytes()


def load_verification(data):
    r = _Reader(data)
    params = _magic(r, b"ANYV")
    file_id = r.text()
    entries = tuple(_gt(params, r.blob()) for _ in range(r.u16()))
    r.done()
    return VerificationSet(file_id, entries)


# ---------------------------------------------------------------------------
# keys

def dump_public_key(pk, partition):
    """Public key plus the public category partition (authority -> categories)."""
    w = _Writer()
    w.raw(b"ANYP")
    w.u16(VERSION)
    w.u8(pk.params.preset_id)
    w.blob(pk.g.to_bytes())
    w.blob(pk.Y.to_bytes())
    w.u16(len(partition))
    for k in sorted(partition):
        w.u16(k)
        cats = sorted(partition[k])
        w.u16(len(cats))
        for cat in cats:
            w.text(cat)
    return w.bytes()


def load_public_key(data):
    """Returns ``(pk, partition)``."""
    r = _Reader(data)
    params = _magic(r, b"ANYP")
    g = _g0(params, r.blob())
    if g != generator(params):
        raise FormatError("public key generator does not match the preset")
    Y = _gt(params, r.blob())
    partition = {}
    for _ in range(r.u16()):
        k = r.u16()
        partition[k] = frozenset(r.text() for _ in range(r.u16()))
    r.done()
    return PublicKey(params, g, Y), partition


@dataclass(frozen=True)
class Keyring:
    """Key file contents: an authority's master share or a user's private key."""

    role: int
    params: object
    key: object  # MasterKeyShare or PrivateKey
    categories: frozenset = frozenset()  # authority role only
    n: int = 0  # authority role only: network size

    def __post_init__(self):
        expected = {ROLE_AUTHORITY: MasterKeyShare, ROLE_USER: PrivateKey}.get(self.role)
        if expected is None or not isinstance(self.key, expected):
            raise FormatError("keyring role does not match its key type")


def dump_keyring(ring):
    params = ring.params
    w = _Writer()
    w.raw(b"ANYK")
    w.u16(VERSION)
    w.u8(ring.role)
    w.u8(params.preset_id)
    if ring.role == ROLE_AUTHORITY:
        share = ring.key
        w.u16(share.index)
        w.u16(ring.n)
        w.blob(scalar_to_bytes(params, share.v))
        w.blob(share.x.to_bytes())
        cats = sorted(ring.categories)
        w.u16(len(cats))
        for cat in cats:
            w.text(cat)
    else:
        sk = ring.key
        w.blob(sk.D.to_bytes())
        attrs = sorted(sk.components)
        w.u32(len(attrs))
        for attr in attrs:
            D_i, D_i2 = sk.components[attr]
            w.text(attr)
            w.blob(D_i.to_bytes())
            w.blob(D_i2.to_bytes())
    return w.bytes()


def load_keyring(data):
    r = _Reader(data)
    if r.raw(4) != b"ANYK":
        raise FormatError("not a key file")
    if r.u16() != VERSION:
        raise FormatError("unsupported key file version")
    role = r.u8()
    try:
        params = preset_by_id(r.u8())
    except ValueError as exc:
        raise FormatError(str(exc)) from exc
    if role == ROLE_AUTHORITY:
        index = r.u16()
        n = r.u16()
        try:
            v = scalar_from_bytes(params, r.blob())
        except ValueError as exc:
            raise FormatError(str(exc)) from exc
        x = _g0(params, r.blob())
        cats = frozenset(r.text() for _ in range(r.u16()))
        r.done()
        return Keyring(role, params, MasterKeyShare(index, v, x), cats, n)
    if role == ROLE_USER:
        D = _g0(params, r.blob())
        components = {}
        for _ in range(r.u32()):
            attr = r.text()
            components[attr] = (_g0(params, r.blob()), _g0(params, r.blob()))
        r.done()
        if not components:
            raise FormatError("private key without attributes")
        return Keyring(role, params, PrivateKey(D, components))
    raise FormatError(f"unknown key role {role}")
