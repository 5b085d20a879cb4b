"""Simulated N-authority network.

Authorities are isolated state machines that only talk through tagged,
length-prefixed messages delivered from in-process queues. Setup runs in
three barrier-separated phases:

1. every authority picks ``v_k`` and sends ``Y_k = e(g,g)^{v_k}`` to the
   combining authority (the lowest index); inside its cluster, every
   authority also sends ``g^{s_kj}`` to each peer;
2. the combiner multiplies the shares and sends ``Y = prod(Y_k)`` to all;
3. every authority derives ``x_k`` and its master share ``{v_k, x_k}``.

Only the combiner touches all N shares of ``Y``, so the network does O(N)
work for a fixed cluster size and each authority O(1) on average.

Key issuance follows the two-phase key generation: authorities send their
blinded contributions, ``g^{d_k}`` commitments and anonymous attribute
parts to the merging authority, which returns the merged key to the user.
Authorities only ever see the user's pseudonym and the attributes of their
own category.
"""

import hashlib
import secrets
import struct
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import chain

from .algebra import G0Element, GTElement, generator, gt_generator
from .algebra.rng import spawn
from .algebra.scalar import random_scalar
from .scheme import (
    MasterKeyShare,
    PrivateKey,
    SchemeError,
    blinded_contribution,
    combine_public,
    compute_blinder,
    keygen_attribute_part,
    keygen_merge,
)

__all__ = [
    "YSHARE",
    "BLIND",
    "CONTRIB",
    "DCOMMIT",
    "ATTRPART",
    "MERGED",
    "YTOTAL",
    "TAG_NAMES",
    "USER",
    "DEFAULT_CATEGORIES",
    "AuthorityError",
    "UnknownCategory",
    "Message",
    "TranscriptEntry",
    "SetupTranscript",
    "AuthorityConfig",
    "AuthorityState",
    "KeyRequest",
    "CompromiseReport",
    "category_of",
    "make_request",
    "run_setup",
    "issue_key",
    "simulate_compromise",
]

YSHARE, BLIND, CONTRIB, DCOMMIT, ATTRPART, MERGED, YTOTAL = range(1, 8)
TAG_NAMES = {
    YSHARE: "YSHARE",
    YTOTAL: "YTOTAL",
    BLIND: "BLIND",
    CONTRIB: "CONTRIB",
    DCOMMIT: "DCOMMIT",
    ATTRPART: "ATTRPART",
    MERGED: "MERGED",
}
# receiver index of the requesting user; authorities are numbered from 1
USER = 0

DEFAULT_CATEGORIES = ("Sex", "Age", "Nationality", "University", "Position", "Religion")

_HEADER = struct.Struct(">BHHI")


class AuthorityError(SchemeError):
    pass


class UnknownCategory(AuthorityError):
    def __init__(self, category):
        super().__init__(f"no authority is in charge of attribute category {category!r}")
        self.category = category


def category_of(attribute):
    """``Category:Value`` -> ``Category``; a bare attribute is its own category."""
    return attribute.split(":", 1)[0]


@dataclass(frozen=True)
class Message:
    """Wire message: tag byte, sender, receiver, length-prefixed payload."""

    tag: int
    sender: int
    receiver: int
    payload: bytes

    def encode(self):
        return _HEADER.pack(self.tag, self.sender, self.receiver, len(self.payload)) + self.payload

    @classmethod
    def decode(cls, data):
        if len(data) < _HEADER.size:
            raise AuthorityError("truncated message header")
        tag, sender, receiver, n = _HEADER.unpack_from(data)
        payload = bytes(data[_HEADER.size:])
        if tag not in TAG_NAMES:
            raise AuthorityError(f"unknown message tag {tag}")
        if len(payload) != n:
            raise AuthorityError("message length mismatch")
        return cls(tag, sender, receiver, payload)

    @property
    def digest(self):
        return hashlib.sha256(self.encode()).hexdigest()


@dataclass(frozen=True)
class TranscriptEntry:
    phase: int
    kind: str  # tag name, or DERIVE for a local phase-3 step
    sender: int
    receiver: int
    digest: str

    def line(self):
        return f"{self.phase} {self.kind} {self.sender}->{self.receiver} {self.digest or '-'}"


@dataclass
class SetupTranscript:
    clusters: list
    entries: list = field(default_factory=list)

    def count(self, kind=None, phase=None):
        return sum(
            1 for e in self.entries
            if (kind is None or e.kind == kind) and (phase is None or e.phase == phase)
        )

    def dump(self):
        return "\n".join(e.line() for e in self.entries) + "\n"

    def summary(self):
        sizes = ",".join(str(len(c)) for c in self.clusters)
        return (
            f"clusters={len(self.clusters)} sizes={sizes} "
            f"yshare={self.count('YSHARE')} ytotal={self.count('YTOTAL')} "
            f"blind={self.count('BLIND')}"
        )


@dataclass(frozen=True)
class AuthorityConfig:
    n: int
    cluster_size: int
    partition: dict  # authority index -> frozenset of categories

    def __post_init__(self):
        if self.n < 1:
            raise AuthorityError("need at least one authority")
        if not 1 <= self.cluster_size <= self.n:
            raise AuthorityError(f"cluster size must be in 1..{self.n}")
        if self.n > 1 and self.cluster_size < 2:
            raise AuthorityError("a cluster of one authority cannot blind its share")
        partition = {k: frozenset(self.partition.get(k, ())) for k in range(1, self.n + 1)}
        extra = set(self.partition) - set(partition)
        if extra:
            raise AuthorityError(f"partition names unknown authorities {sorted(extra)}")
        seen = {}
        for k, cats in partition.items():
            for cat in cats:
                if cat in seen:
                    raise AuthorityError(f"category {cat!r} owned by authorities {seen[cat]} and {k}")
                seen[cat] = k
        object.__setattr__(self, "partition", partition)

    @classmethod
    def with_default_partition(cls, n, cluster_size=None, categories=DEFAULT_CATEGORIES):
        """Deal ``categories`` round-robin; authorities beyond them get ``Cat<k>``."""
        if n < 1:
            raise AuthorityError(f"need at least one authority, got N={n}")
        partition = {k: set() for k in range(1, n + 1)}
        for i, cat in enumerate(categories):
            partition[i % n + 1].add(cat)
        for k in range(len(categories) + 1, n + 1):
            partition[k].add(f"Cat{k}")
        return cls(n, n if cluster_size is None else cluster_size, partition)

    def clusters(self):
        """Contiguous blocks of ``cluster_size``; the remainder joins the last block."""
        c = self.cluster_size
        ids = list(range(1, self.n + 1))
        blocks = [ids[i:i + c] for i in range(0, self.n - self.n % c, c)]
        if self.n % c:
            blocks[-1].extend(ids[self.n - self.n % c:])
        return blocks

    def owner(self, attribute):
        cat = category_of(attribute)
        for k, cats in self.partition.items():
            if cat in cats:
                return k
        raise UnknownCategory(cat)


class AuthorityState:
    """One semi-honest authority."""

    def __init__(self, index, params, categories, rng):
        self.index = index
        self.params = params
        self.categories = frozenset(categories)
        self.rng = rng
        self.inbox = []
        self.outbox = []
        self.compromised = False
        self.requests_seen = []  # (nym, attributes) pairs handed to this authority
        self._share = None
        self._v = None
        self._Y = None
        self._total = None  # combiner only
        self._sent = {}  # transient g^{s_kj}, dropped after phase 3

    @classmethod
    def restore(cls, share, params, categories, rng):
        """An authority that finished setup earlier, rebuilt from its master share."""
        state = cls(share.index, params, categories, rng)
        state._share = share
        state._v = share.v
        return state

    @property
    def share(self):
        if self._share is None:
            raise AuthorityError(f"authority {self.index} has not completed setup")
        return self._share

    @property
    def ready(self):
        return self._share is not None

    def _send(self, tag, receiver, payload):
        msg = Message(tag, self.index, receiver, payload)
        self.outbox.append(msg)
        return msg

    def _take(self, tag):
        got = [m for m in self.inbox if m.tag == tag]
        self.inbox = [m for m in self.inbox if m.tag != tag]
        return got

    # -- setup ---------------------------------------------------------
    def publish_Y(self, combiner):
        self._v = random_scalar(self.params, self.rng)
        self._Y = gt_generator(self.params) ** self._v
        if combiner == self.index:
            return []
        return [self._send(YSHARE, combiner, self._Y.to_bytes())]

    def combine_Y(self, peers):
        """Combiner only: multiply every Y_k and hand the product to ``peers``."""
        shares = [GTElement.from_bytes(self.params, m.payload) for m in self._take(YSHARE)]
        if len(shares) != len(peers):
            raise AuthorityError(f"combiner has {len(shares)} Y shares, expected {len(peers)}")
        Y = combine_public([self._Y] + shares, self.params).Y
        self._total = Y
        data = Y.to_bytes()
        return [self._send(YTOTAL, j, data) for j in peers]

    def send_blinding(self, cluster):
        g = generator(self.params)
        msgs = []
        for j in cluster:
            if j == self.index:
                continue
            element = g ** random_scalar(self.params, self.rng)
            self._sent[j] = element
            msgs.append(self._send(BLIND, j, element.to_bytes()))
        return msgs

    def derive(self):
        if self._share is not None:
            raise AuthorityError("master share already derived")
        totals = self._take(YTOTAL)
        if totals:
            Y = GTElement.from_bytes(self.params, totals[-1].payload)
        elif self._total is not None:
            Y = self._total
        else:
            raise AuthorityError(f"authority {self.index} never received Y")
        received = {m.sender: G0Element.from_bytes(self.params, m.payload) for m in self._take(BLIND)}
        if set(received) != set(self._sent):
            raise AuthorityError(f"authority {self.index} is missing blinding shares")
        x = compute_blinder(self.params, self._sent.values(), received.values())
        self._share = MasterKeyShare(self.index, self._v, x)
        self._sent = {}
        return combine_public([Y], self.params)


def _deliver(states, messages, shuffle_rng=None):
    messages = list(messages)
    if shuffle_rng is not None:
        shuffle_rng.shuffle(messages)
    for msg in messages:
        states[msg.receiver].inbox.append(msg)


def run_setup(config, params, rng, shuffle_rng=None):
    """Run the three-phase setup; returns ``(pk, states, transcript)``.

    ``shuffle_rng`` randomizes delivery order within each phase, which must
    not change any output.
    """
    states = {
        k: AuthorityState(k, params, config.partition[k], spawn(rng, f"authority-{k}"))
        for k in range(1, config.n + 1)
    }
    clusters = config.clusters()
    transcript = SetupTranscript(clusters=[list(c) for c in clusters])

    def log(phase, msgs):
        for m in msgs:
            transcript.entries.append(TranscriptEntry(phase, TAG_NAMES[m.tag], m.sender, m.receiver, m.digest))

    combiner = min(states)
    phase1 = list(chain.from_iterable(states[k].publish_Y(combiner) for k in states))
    for cluster in clusters:
        for k in cluster:
            phase1.extend(states[k].send_blinding(cluster))
    log(1, phase1)
    _deliver(states, phase1, shuffle_rng)

    phase2 = states[combiner].combine_Y([k for k in states if k != combiner])
    log(2, phase2)
    _deliver(states, phase2, shuffle_rng)

    pks = []
    for k in states:
        pks.append(states[k].derive())
        transcript.entries.append(TranscriptEntry(3, "DERIVE", k, k, ""))
    if any(pk.Y != pks[0].Y for pk in pks):
        raise AuthorityError("authorities disagree on the public key")
    return pks[0], [states[k] for k in states], transcript


# ---------------------------------------------------------------------------
# key issuance

@dataclass(frozen=True)
class KeyRequest:
    """What the user sends out. ``gid`` never leaves the client."""

    nym: str
    gid: str
    attributes: dict  # authority index -> tuple of attributes

    def __post_init__(self):
        if self.nym == self.gid:
            raise AuthorityError("pseudonym must differ from the global identifier")

    @property
    def all_attributes(self):
        return [a for k in sorted(self.attributes) for a in self.attributes[k]]


def make_request(config, gid, attributes, rng=None):
    """Route ``Category:Value`` attributes to their authorities under a fresh nym."""
    attributes = list(dict.fromkeys(attributes))
    if not attributes:
        raise AuthorityError("a key request needs at least one attribute")
    routed = defaultdict(list)
    for attr in attributes:
        routed[config.owner(attr)].append(attr)
    nym = rng.randbytes(16).hex() if rng is not None else secrets.token_hex(16)
    return KeyRequest(nym, gid, {k: tuple(v) for k, v in sorted(routed.items())})


def _pack_elements(elements):
    return b"".join(e.to_bytes() for e in elements)


def _unpack_elements(params, data):
    n = params.field_bytes + 1
    if len(data) % n:
        raise AuthorityError("payload is not a whole number of G0 elements")
    return [G0Element.from_bytes(params, data[i:i + n]) for i in range(0, len(data), n)]


def issue_key(states, request, rng, log=None, escrow=None):
    """Issue a private key for ``request`` through the whole network.

    ``log`` collects every :class:`Message` exchanged; ``escrow`` (a
    :class:`KeyEscrow`) records d_k and r_i for white-box checks.
    """
    states = {s.index: s for s in states}
    if not all(s.ready for s in states.values()):
        raise AuthorityError("setup has not completed")
    if not any(request.attributes.values()):
        raise AuthorityError("a key request needs at least one attribute")
    for k, attrs in request.attributes.items():
        if k not in states:
            raise AuthorityError(f"request names unknown authority {k}")
        for attr in attrs:
            if category_of(attr) not in states[k].categories:
                raise AuthorityError(f"authority {k} is not in charge of {attr!r}")
    params = next(iter(states.values())).params
    merger = min(states)
    g = generator(params)
    messages = []

    def send(state, tag, payload):
        msg = state._send(tag, merger, payload)
        messages.append(msg)
        states[merger].inbox.append(msg)

    for k, state in states.items():
        attrs = request.attributes.get(k, ())
        state.requests_seen.append((request.nym, tuple(attrs)))
        session = spawn(rng, f"issue-{k}")
        d = random_scalar(params, session)
        parts = []
        for attr in attrs:
            r = random_scalar(params, session, nonzero=True)
            parts.extend(keygen_attribute_part(params, attr, r))
            if escrow is not None:
                escrow.r[attr] = r
        if escrow is not None:
            escrow.d[k] = d
        # the merger addresses its own contribution to itself
        send(state, CONTRIB, blinded_contribution(params, state.share, d).to_bytes())
        send(state, DCOMMIT, (g ** d).to_bytes())
        if parts:
            send(state, ATTRPART, _pack_elements(parts))

    # merging authority: sees only group elements and counts, no attribute names
    head = states[merger]
    contribs = [G0Element.from_bytes(params, m.payload) for m in head._take(CONTRIB)]
    commits = [G0Element.from_bytes(params, m.payload) for m in head._take(DCOMMIT)]
    slots = {}
    for m in head._take(ATTRPART):
        elems = _unpack_elements(params, m.payload)
        for pos in range(0, len(elems), 2):
            slots[(m.sender, pos // 2)] = (elems[pos], elems[pos + 1])
    merged = keygen_merge(params, contribs, commits, slots, expected=len(states))

    body = [merged.D]
    for slot in sorted(merged.components):
        body.extend(merged.components[slot])
    reply = head._send(MERGED, USER, _pack_elements(body))
    messages.append(reply)

    # user side: put attribute names back on the anonymous slots
    elems = _unpack_elements(params, Message.decode(reply.encode()).payload)
    D, rest = elems[0], elems[1:]
    components = {}
    order = sorted((k, pos) for k, attrs in request.attributes.items() for pos in range(len(attrs)))
    if len(rest) != 2 * len(order):
        raise AuthorityError("merged key does not match the request")
    for i, (k, pos) in enumerate(order):
        components[request.attributes[k][pos]] = (rest[2 * i], rest[2 * i + 1])
    if log is not None:
        log.extend(messages)
    return PrivateKey(D, components)


# ---------------------------------------------------------------------------
# compromise analysis

@dataclass
class CompromiseReport:
    subset: frozenset
    blinders_cancel: bool  # product of the revealed x_k is the identity
    master_exposed: bool  # g^{sum v_k} is assemblable from what the subset knows
    assembled_master: object  # that element, when assemblable
    recovered_blinders: dict  # honest authority -> its x_k, when determined
    mintable_categories: frozenset


def _reduce(row, pivots, p):
    vec, combo = dict(row[0]), dict(row[1])
    for var, (pvec, pcombo) in pivots.items():
        c = vec.get(var, 0)
        if not c:
            continue
        for key, val in pvec.items():
            vec[key] = (vec.get(key, 0) - c * val) % p
        for key, val in pcombo.items():
            combo[key] = (combo.get(key, 0) - c * val) % p
        vec = {k: v for k, v in vec.items() if v}
    return vec, combo


def _solve(known, target, p):
    """Express ``target`` as a Z_p combination of ``known`` exponent vectors.

    Vectors are dicts over symbolic secret variables. Returns coefficients
    per known index, or None when the target is outside their span.
    """
    pivots = {}
    for idx, vec in enumerate(known):
        vec, combo = _reduce((vec, {idx: 1}), pivots, p)
        if not vec:
            continue
        var = min(vec)
        inv = pow(vec[var], -1, p)
        vec = {k: v * inv % p for k, v in vec.items()}
        combo = {k: v * inv % p for k, v in combo.items()}
        # keep pivots fully reduced against the new one
        for other, (ovec, ocombo) in list(pivots.items()):
            c = ovec.get(var, 0)
            if c:
                nvec = {k: (ovec.get(k, 0) - c * vec.get(k, 0)) % p for k in set(ovec) | set(vec)}
                ncombo = {k: (ocombo.get(k, 0) - c * combo.get(k, 0)) % p for k in set(ocombo) | set(combo)}
                pivots[other] = ({k: v for k, v in nvec.items() if v}, ncombo)
        pivots[var] = (vec, combo)
    residue, combo = _reduce((target, {}), pivots, p)
    if residue:
        return None
    return {k: (-v) % p for k, v in combo.items() if v % p}


def simulate_compromise(states, subset, transcript, issuance_logs=()):
    """What an adversary holding the master shares of ``subset`` can derive.

    Knowledge is modelled in the generic group: every G0 element the
    adversary holds is an exponent vector over the secret variables (v_k,
    s_kj, d_k). The master element ``g^{sum v_k}`` is exposed iff its vector
    lies in the Z_p span of the known ones. ``issuance_logs`` adds the
    key-issuance messages those authorities sent or received.
    """
    states = {s.index: s for s in states}
    subset = frozenset(subset)
    params = next(iter(states.values())).params
    p = params.p
    g = generator(params)

    def x_vector(k):
        cluster = next(c for c in transcript.clusters if k in c)
        vec = {}
        for j in cluster:
            if j != k:
                vec[("s", k, j)] = 1
                vec[("s", j, k)] = p - 1
        return vec

    known_vecs, known_elems = [], []
    for k in sorted(subset):
        share = states[k].share
        known_vecs.append({("v", k): 1})
        known_elems.append(g ** share.v)
        known_vecs.append(x_vector(k))
        known_elems.append(share.x)

    for session, log in enumerate(issuance_logs):
        for msg in log:
            if msg.sender not in subset and msg.receiver not in subset:
                continue
            if msg.tag == CONTRIB:
                vec = dict(x_vector(msg.sender))
                vec[("v", msg.sender)] = 1
                vec[("d", session, msg.sender)] = 1
            elif msg.tag == DCOMMIT:
                vec = {("d", session, msg.sender): 1}
            else:
                continue
            known_vecs.append(vec)
            known_elems.append(G0Element.from_bytes(params, msg.payload))

    target = {("v", k): 1 for k in states}
    coeffs = _solve(known_vecs, target, p)
    assembled = None
    if coeffs is not None:
        assembled = G0Element.identity(params)
        for idx, c in coeffs.items():
            assembled = assembled * known_elems[idx] ** c

    product = G0Element.identity(params)
    for k in subset:
        product = product * states[k].share.x

    recovered = {}
    for cluster in transcript.clusters:
        honest = [k for k in cluster if k not in subset]
        if len(honest) == 1 and len(cluster) > 1:
            acc = G0Element.identity(params)
            for k in cluster:
                if k in subset:
                    acc = acc * states[k].share.x
            recovered[honest[0]] = acc.inverse()

    mintable = frozenset(chain.from_iterable(states[k].categories for k in subset))
    return CompromiseReport(
        subset=subset,
        blinders_cancel=bool(subset) and product.is_identity(),
        master_exposed=coeffs is not None,
        assembled_master=assembled,
        recovered_blinders=recovered,
        mintable_categories=mintable,
    )
