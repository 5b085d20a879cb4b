"""Cloud-server store with privilege verification.

Layout under the store root::

    index.json            {"seq": last sequence number, "files": {file_id: seq}}
    audit.log             one line per verification attempt
    files/<file_id>/      ct.bin, vr.bin, payload.bin, meta
    locks/                flock files serializing writers

Readers open a file's directory once and read every member relative to
that descriptor, so a concurrent replace (build a staging directory, then
two renames) can never hand them a mix of two versions.
"""

import fcntl
import hashlib
import hmac
import json
import os
import re
import shutil
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass

from .algebra.rng import system_rng
from .formats import FormatError, join_ciphertext, load_ciphertext, load_verification, split_ciphertext

__all__ = [
    "StoreError",
    "NotFound",
    "Conflict",
    "BadRequest",
    "VerificationFailed",
    "StoredFile",
    "Challenge",
    "OperationRequest",
    "FileStore",
    "response_digest",
    "ACTION_LABELS",
    "NONCE_BYTES",
]

NONCE_BYTES = 16
DEFAULT_TTL = 1024
ACTION_LABELS = {"delete": "delete", "replace": "reencrypt"}
_ID_RE = re.compile(r"[A-Za-z0-9_-][A-Za-z0-9._-]{0,127}")


class StoreError(Exception):
    pass


class NotFound(StoreError):
    pass


class Conflict(StoreError):
    pass


class BadRequest(StoreError):
    pass


class VerificationFailed(StoreError):
    pass


def response_digest(token, nonce):
    """Client response: SHA-256 over the canonical Y^{s_p} bytes and the nonce."""
    return hashlib.sha256(bytes(token) + bytes(nonce)).digest()


@dataclass(frozen=True)
class StoredFile:
    file_id: str
    size: int
    r: int
    seq: int


@dataclass(frozen=True)
class Challenge:
    nonce: bytes
    file_id: str
    privilege: int
    expiry: int  # last challenge-clock tick at which it is still valid
    file_seq: int  # the file version it was issued against


@dataclass(frozen=True)
class OperationRequest:
    file_id: str
    privilege: int
    nonce: bytes
    digest: bytes


def _check_id(file_id):
    if not isinstance(file_id, str) or not _ID_RE.fullmatch(file_id):
        raise BadRequest(f"file id {file_id!r} is not a valid store key")
    return file_id


def _parse_blobs(ct_blob, vr_blob):
    try:
        ct = load_ciphertext(ct_blob)
        vr = load_verification(vr_blob)
        header, body = split_ciphertext(ct_blob)
    except FormatError as exc:
        raise BadRequest(f"malformed upload: {exc}") from exc
    _check_id(ct.file_id)
    if vr.file_id != ct.file_id:
        raise BadRequest("verification set belongs to another file")
    if len(vr.entries) != ct.r - 1:
        raise BadRequest(f"verification set has {len(vr.entries)} entries, expected {ct.r - 1}")
    if vr.entries and vr.entries[0].params != ct.E0.params:
        raise BadRequest("ciphertext and verification set use different presets")
    return ct, header, body


class FileStore:
    """Directory-backed store; safe for threads and for processes sharing ``root``."""

    def __init__(self, root, rng=None, ttl=DEFAULT_TTL):
        self.root = os.fspath(root)
        self.rng = rng if rng is not None else system_rng()
        self.ttl = ttl
        self._files = os.path.join(self.root, "files")
        self._locks = os.path.join(self.root, "locks")
        os.makedirs(self._files, exist_ok=True)
        os.makedirs(self._locks, exist_ok=True)
        self._index_path = os.path.join(self.root, "index.json")
        if not os.path.exists(self._index_path):
            with self._lock("index"):
                if not os.path.exists(self._index_path):
                    self._write_index({"seq": 0, "files": {}})
        self._challenges = {}
        self._grants = {}
        self._clock = 0
        self._table_lock = threading.Lock()

    # -- plumbing ------------------------------------------------------
    @contextmanager
    def _lock(self, name):
        fd = os.open(os.path.join(self._locks, name + ".lock"), os.O_RDWR | os.O_CREAT, 0o600)
        try:
            fcntl.flock(fd, fcntl.LOCK_EX)
            yield
        finally:
            fcntl.flock(fd, fcntl.LOCK_UN)
            os.close(fd)

    def _read_index(self):
        with open(self._index_path) as fh:
            return json.load(fh)

    def _write_index(self, index):
        tmp = self._index_path + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(index, fh, sort_keys=True, indent=1)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, self._index_path)

    def _bump_seq(self, file_id, remove=False):
        with self._lock("index"):
            index = self._read_index()
            if remove:
                index["files"].pop(file_id, None)
                seq = index["seq"]
            else:
                index["seq"] += 1
                seq = index["seq"]
                index["files"][file_id] = seq
            self._write_index(index)
        return seq

    def _dir(self, file_id):
        return os.path.join(self._files, file_id)

    def _write_version(self, file_id, header, body, vr_blob, r, seq):
        staging = os.path.join(self._files, f".staging-{file_id}-{self.rng.randbytes(6).hex()}")
        os.mkdir(staging)
        meta = f"file_id={file_id}\nsize={len(body)}\nr={r}\nseq={seq}\n"
        for name, data in (("ct.bin", header), ("payload.bin", body), ("vr.bin", vr_blob), ("meta", meta.encode())):
            with open(os.path.join(staging, name), "wb") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
        return staging

    def _swap_in(self, file_id, staging):
        live = self._dir(file_id)
        trash = None
        if os.path.exists(live):
            trash = os.path.join(self._files, f".trash-{file_id}-{self.rng.randbytes(6).hex()}")
            os.rename(live, trash)
        os.rename(staging, live)
        if trash is not None:
            shutil.rmtree(trash, ignore_errors=True)

    def _read_members(self, file_id, names):
        """Read ``names`` from one consistent version of ``file_id``."""
        _check_id(file_id)
        for _ in range(100):
            try:
                dfd = os.open(self._dir(file_id), os.O_RDONLY | os.O_DIRECTORY)
            except FileNotFoundError:
                if file_id not in self._read_index()["files"]:
                    raise NotFound(file_id) from None
                time.sleep(0.001)  # between the two renames of a replace
                continue
            try:
                out = {}
                for name in names:
                    fd = os.open(name, os.O_RDONLY, dir_fd=dfd)
                    with os.fdopen(fd, "rb") as fh:
                        out[name] = fh.read()
                return out
            except FileNotFoundError:
                continue  # the version was retired under us; reopen
            finally:
                os.close(dfd)
        raise StoreError(f"could not read a stable version of {file_id}")

    @staticmethod
    def _parse_meta(data):
        meta = dict(line.split("=", 1) for line in data.decode().splitlines() if line)
        return StoredFile(meta["file_id"], int(meta["size"]), int(meta["r"]), int(meta["seq"]))

    # -- storage -------------------------------------------------------
    def store(self, ct_blob, vr_blob):
        """Store an uploaded ``.anyc`` blob and its verification set; returns the file id."""
        ct, header, body = _parse_blobs(ct_blob, vr_blob)
        file_id = ct.file_id
        with self._lock(file_id):
            try:
                current = self._read_members(file_id, ("ct.bin", "payload.bin", "vr.bin"))
            except NotFound:
                current = None
            if current is not None:
                if (current["ct.bin"], current["payload.bin"], current["vr.bin"]) == (header, body, bytes(vr_blob)):
                    return file_id
                raise Conflict(f"file id {file_id} already stored with different content")
            seq = self._bump_seq(file_id)
            self._swap_in(file_id, self._write_version(file_id, header, body, bytes(vr_blob), ct.r, seq))
        return file_id

    def fetch(self, file_id):
        """The stored ``.anyc`` bytes. The verification set never leaves the store."""
        got = self._read_members(file_id, ("ct.bin", "payload.bin"))
        return join_ciphertext(got["ct.bin"], got["payload.bin"])

    def info(self, file_id):
        return self._parse_meta(self._read_members(file_id, ("meta",))["meta"])

    def list_files(self):
        return sorted(self._read_index()["files"])

    # -- privilege verification ---------------------------------------
    def open_challenge(self, file_id, privilege):
        meta = self.info(file_id)
        if not 1 <= privilege < meta.r:
            raise BadRequest(f"privilege {privilege} out of range 1..{meta.r - 1}")
        with self._table_lock:
            self._clock += 1
            while True:
                nonce = self.rng.randbytes(NONCE_BYTES)
                if nonce not in self._challenges:
                    break
            ch = Challenge(nonce, file_id, privilege, self._clock + self.ttl, meta.seq)
            self._challenges[nonce] = ch
        return ch

    def _audit(self, request, outcome):
        line = f"{time.time():.6f} {request.file_id} p={request.privilege} {outcome}\n"
        with self._lock("audit"), open(os.path.join(self.root, "audit.log"), "a") as fh:
            fh.write(line)

    def verify_privilege(self, request):
        """Check a response against E_p. The challenge is consumed either way."""
        with self._table_lock:
            self._clock += 1
            ch = self._challenges.pop(bytes(request.nonce), None)
            clock = self._clock
        if ch is None:
            self._audit(request, "replay")
            return False
        if (ch.file_id, ch.privilege) != (request.file_id, request.privilege):
            self._audit(request, "mismatch")
            return False
        if clock > ch.expiry:
            self._audit(request, "expired")
            return False
        try:
            got = self._read_members(request.file_id, ("vr.bin", "meta"))
        except NotFound:
            self._audit(request, "gone")
            return False
        if self._parse_meta(got["meta"]).seq != ch.file_seq:
            self._audit(request, "stale")
            return False
        entry = load_verification(got["vr.bin"]).entries[request.privilege - 1]
        ok = hmac.compare_digest(response_digest(entry.to_bytes(), ch.nonce), bytes(request.digest))
        if ok:
            with self._table_lock:
                self._grants[bytes(request.nonce)] = ch
        self._audit(request, "ok" if ok else "denied")
        return ok

    def required_privilege(self, file_id, action):
        """Privilege index gating ``action``: the tree with the action's label, else the last one."""
        if action not in ACTION_LABELS:
            raise BadRequest(f"unknown operation {action!r}")
        header, _ = split_ciphertext(self.fetch(file_id))
        ct_trees = load_ciphertext(join_ciphertext(header, b"")).trees
        for tree in ct_trees:
            if tree.index >= 1 and tree.label == ACTION_LABELS[action]:
                return tree.index
        if len(ct_trees) < 2:
            raise BadRequest(f"file {file_id} admits no gated operations")
        return len(ct_trees) - 1

    def execute_operation(self, request, action, new_ct=None, new_vr=None):
        """Run ``delete`` or ``replace`` for a request that passed :meth:`verify_privilege`."""
        with self._table_lock:
            grant = self._grants.pop(bytes(request.nonce), None)
        if grant is None or (grant.file_id, grant.privilege) != (request.file_id, request.privilege):
            raise VerificationFailed("no verified challenge for this request")
        if self.required_privilege(request.file_id, action) != request.privilege:
            raise VerificationFailed(f"privilege {request.privilege} does not cover {action}")
        file_id = request.file_id
        if action == "delete":
            with self._lock(file_id):
                if self.info(file_id).seq != grant.file_seq:
                    raise VerificationFailed("file changed since the challenge was issued")
                self._bump_seq(file_id, remove=True)
                trash = os.path.join(self._files, f".trash-{file_id}-{self.rng.randbytes(6).hex()}")
                os.rename(self._dir(file_id), trash)
                shutil.rmtree(trash, ignore_errors=True)
            return None
        if new_ct is None or new_vr is None:
            raise BadRequest("replace needs a new ciphertext and verification set")
        ct, header, body = _parse_blobs(new_ct, new_vr)
        if ct.file_id != file_id:
            raise BadRequest("replacement must keep the file id")
        with self._lock(file_id):
            if self.info(file_id).seq != grant.file_seq:
                raise VerificationFailed("file changed since the challenge was issued")
            seq = self._bump_seq(file_id)
            self._swap_in(file_id, self._write_version(file_id, header, body, bytes(new_vr), ct.r, seq))
        return seq
