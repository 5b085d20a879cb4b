"""Core algorithms of the multi-authority scheme over the pairing group.

Setup arithmetic (public-key assembly, pairwise blinders), the two-phase
key generation, encryption under r privilege trees, decryption with
``decrypt_node``, verification-parameter derivation and re-encryption.

Every ciphertext carries a root commitment ``g^{s_p}`` per tree. Key
recovery divides ``e(g^{s_0}, D) = Y^{s_0} * e(g,g)^{s_0 * sum(d)}`` by the
root value of the tree to isolate ``Y^{s_0}``; pairing ``D`` with ``g``
itself would leave the ``s_0`` exponent out.
"""

import hashlib
from dataclasses import dataclass, field

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .algebra import G0Element, GTElement, generator, gt_generator, hash_to_group, pairing, pairing_product
from .algebra.scalar import lagrange_coeff, random_scalar
from .privtree import (
    READ_LABEL,
    REENCRYPT_LABEL,
    Leaf,
    PrivilegeTree,
    assign_shares,
    iter_leaves,
    node_at,
    parse_policy,
    satisfied_subset,
    satisfies,
)

__all__ = [
    "SchemeError",
    "PolicyNotSatisfied",
    "PrivilegeRefused",
    "PayloadAuthError",
    "PublicKey",
    "MasterKeyShare",
    "PrivateKey",
    "Ciphertext",
    "VerificationSet",
    "SessionSecrets",
    "KeyEscrow",
    "CIPHER_AES256_GCM",
    "combine_public",
    "compute_blinder",
    "blinded_contribution",
    "keygen_attribute_part",
    "keygen_merge",
    "make_trees",
    "encrypt",
    "decrypt_node",
    "recover_content_key",
    "decrypt_read",
    "derive_verification",
    "reencrypt_index",
    "reencrypt",
    "kdf",
]

CIPHER_AES256_GCM = 1
NONCE_BYTES = 12


class SchemeError(Exception):
    pass


class PolicyNotSatisfied(SchemeError):
    """The key's attributes do not satisfy the required privilege tree."""


class PrivilegeRefused(PolicyNotSatisfied):
    """Re-encryption requested without the read and re-encrypt privileges."""


class PayloadAuthError(SchemeError):
    """The payload failed authenticated decryption (tampered or wrong key)."""


@dataclass(frozen=True)
class PublicKey:
    params: object
    g: G0Element
    Y: GTElement


@dataclass(frozen=True)
class MasterKeyShare:
    index: int
    v: int
    x: G0Element


@dataclass(frozen=True)
class PrivateKey:
    D: G0Element
    components: dict  # attribute -> (D_i, D_i')

    def __post_init__(self):
        if not self.components:
            raise SchemeError("a private key needs at least one attribute")

    @property
    def attributes(self):
        return frozenset(self.components)


@dataclass(frozen=True)
class Ciphertext:
    file_id: str
    trees: tuple
    E0: GTElement
    root_commitments: tuple
    leaf_components: tuple  # per tree: {path: (C, C')}
    payload: bytes  # nonce || AES-GCM ciphertext
    cipher_id: int = CIPHER_AES256_GCM

    @property
    def r(self):
        return len(self.trees)

    @property
    def nonce(self):
        return self.payload[:NONCE_BYTES]

    @property
    def body(self):
        return self.payload[NONCE_BYTES:]


@dataclass(frozen=True)
class VerificationSet:
    file_id: str
    entries: tuple  # E_p for p = 1..r-1


@dataclass
class SessionSecrets:
    """White-box escrow of encryption randomness. Never serialized."""

    K_e: GTElement
    s: list
    shares: list


@dataclass
class KeyEscrow:
    """White-box escrow of key-generation randomness. Never serialized."""

    d: dict = field(default_factory=dict)
    r: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Setup

def combine_public(Y_shares, params):
    Y_shares = list(Y_shares)
    if not Y_shares:
        raise SchemeError("need at least one Y_k share")
    Y = Y_shares[0]
    for share in Y_shares[1:]:
        Y = Y * share
    return PublicKey(params, generator(params), Y)


def compute_blinder(params, sent, received):
    """x_k = prod(g^{s_kj}) / prod(g^{s_jk})."""
    sent = list(sent)
    received = list(received)
    if len(sent) != len(received):
        raise SchemeError(f"blinder needs matching share counts, got {len(sent)} and {len(received)}")
    x = G0Element.identity(params)
    for out, inc in zip(sent, received):
        x = x * out / inc
    return x


# ---------------------------------------------------------------------------
# KeyGenerate

def blinded_contribution(params, share, d):
    """x_k * g^{v_k} * g^{d_k}."""
    g = generator(params)
    return share.x * g ** ((share.v + d) % params.p)


def keygen_attribute_part(params, attribute, r):
    """(H(att)^r, g^r) for one attribute."""
    if r % params.p == 0:
        raise SchemeError("attribute randomness r_i must be nonzero")
    return hash_to_group(params, attribute) ** r, generator(params) ** r


def keygen_merge(params, blinded_contribs, d_commitments, attr_parts, expected=None):
    """Merge per-authority contributions into a private key.

    ``attr_parts`` maps attribute -> (H(att)^{r_i}, g^{r_i}).
    """
    blinded_contribs = list(blinded_contribs)
    d_commitments = list(d_commitments)
    if not blinded_contribs or len(blinded_contribs) != len(d_commitments):
        raise SchemeError("missing authority contribution")
    if expected is not None and len(blinded_contribs) != expected:
        raise SchemeError(f"expected {expected} contributions, got {len(blinded_contribs)}")
    D = G0Element.identity(params)
    for c in blinded_contribs:
        D = D * c
    gd = G0Element.identity(params)
    for c in d_commitments:
        gd = gd * c
    components = {attr: (h_r * gd, g_r) for attr, (h_r, g_r) in attr_parts.items()}
    return PrivateKey(D, components)


# ---------------------------------------------------------------------------
# Encrypt

def make_trees(policies):
    """Build privilege trees from ``(label, policy)`` pairs or nodes.

    The first entry must be the read privilege.
    """
    trees = []
    for index, (label, policy) in enumerate(policies):
        root = parse_policy(policy) if isinstance(policy, str) else policy
        trees.append(PrivilegeTree(index, label, root))
    return trees


def _check_trees(trees):
    trees = tuple(trees)
    if not trees:
        raise SchemeError("at least one privilege tree is required")
    for index, tree in enumerate(trees):
        if not isinstance(tree, PrivilegeTree):
            raise SchemeError(f"tree {index} is not a PrivilegeTree")
        if tree.index != index:
            raise SchemeError(f"tree at position {index} carries privilege index {tree.index}")
    if trees[0].label != READ_LABEL:
        raise SchemeError("privilege tree 0 must be labelled 'read'")
    return trees


def kdf(K_e):
    """256-bit payload key from the GT content key."""
    return hashlib.sha256(b"anonyabe-kdf-v1\x00" + K_e.to_bytes()).digest()


def encrypt(pk, payload, trees, rng, file_id=None):
    """Encrypt ``payload`` under privilege trees.

    Returns ``(ciphertext, verification_set, session_secrets)``. Only the
    ciphertext is public; the verification set is for the cloud server.
    """
    params = pk.params
    trees = _check_trees(trees)
    g = pk.g
    if file_id is None:
        file_id = rng.randbytes(16).hex()
    K_e = gt_generator(params) ** random_scalar(params, rng, nonzero=True)

    secrets, share_maps, commitments, leaf_tables, vr = [], [], [], [], []
    for tree in trees:
        s = random_scalar(params, rng)
        shares = assign_shares(tree, s, params.p, rng)
        table = {}
        for path, leaf in iter_leaves(tree):
            share = shares.shares[path]
            table[path] = (g ** share, hash_to_group(params, leaf.attribute) ** share)
        secrets.append(s)
        share_maps.append(shares)
        commitments.append(g ** s)
        leaf_tables.append(table)
        if tree.index >= 1:
            vr.append(pk.Y ** s)

    E0 = K_e * pk.Y ** secrets[0]
    nonce = rng.randbytes(NONCE_BYTES)
    body = AESGCM(kdf(K_e)).encrypt(nonce, bytes(payload), file_id.encode())
    ct = Ciphertext(
        file_id=file_id,
        trees=trees,
        E0=E0,
        root_commitments=tuple(commitments),
        leaf_components=tuple(leaf_tables),
        payload=nonce + body,
    )
    return ct, VerificationSet(file_id, tuple(vr)), SessionSecrets(K_e, secrets, share_maps)


# ---------------------------------------------------------------------------
# Decrypt

def decrypt_node(ct, sk, tree_index, path=()):
    """e(g,g)^{sum(d) * q_x(0)} for the node at ``path``, or None (bottom)."""
    tree = ct.trees[tree_index]
    table = ct.leaf_components[tree_index]
    p = sk.D.params.p

    def walk(path, node):
        if isinstance(node, Leaf):
            comp = sk.components.get(node.attribute)
            if comp is None:
                return None
            D_i, D_i2 = comp
            C, C2 = table[path]
            return pairing_product([(D_i, C), (D_i2.inverse(), C2)])
        values = [walk(path + (i,), child) for i, child in enumerate(node.children, start=1)]
        chosen = satisfied_subset([v is not None for v in values], node.threshold)
        if chosen is None:
            return None
        F = GTElement.identity(sk.D.params)
        for i in chosen:
            F = F * values[i - 1] ** lagrange_coeff(i, chosen, 0, p)
        return F

    return walk(tuple(path), node_at(tree, path))


def _blinded_root(pk, sk, ct, index):
    """Y^{s_p} from a satisfying key: e(g^{s_p}, D) / DecryptNode(root)."""
    A = decrypt_node(ct, sk, index)
    if A is None:
        raise PolicyNotSatisfied(f"key does not satisfy privilege tree {index}")
    B = pairing(ct.root_commitments[index], sk.D)
    return B / A


def recover_content_key(pk, sk, ct):
    """The GT content key K_e as computed with ``sk`` (wrong if sk is invalid)."""
    if not satisfies(ct.trees[0], sk.attributes):
        raise PolicyNotSatisfied("key does not satisfy the read privilege")
    return ct.E0 / _blinded_root(pk, sk, ct, 0)


def _open_payload(ct, K_e):
    if ct.cipher_id != CIPHER_AES256_GCM:
        raise SchemeError(f"unsupported cipher id {ct.cipher_id}")
    try:
        return AESGCM(kdf(K_e)).decrypt(ct.nonce, ct.body, ct.file_id.encode())
    except InvalidTag:
        raise PayloadAuthError("payload authentication failed") from None


def decrypt_read(pk, sk, ct):
    """Recover the payload; needs a key satisfying tree 0."""
    return _open_payload(ct, recover_content_key(pk, sk, ct))


def derive_verification(pk, sk, ct, index):
    """Y^{s_p} for privilege ``index`` >= 1, to prove the privilege to the server."""
    if not 1 <= index < ct.r:
        raise IndexError(f"privilege index {index} out of range 1..{ct.r - 1}")
    if not satisfies(ct.trees[index], sk.attributes):
        raise PolicyNotSatisfied(f"key does not satisfy privilege tree {index}")
    return _blinded_root(pk, sk, ct, index)


# ---------------------------------------------------------------------------
# ReEncrypt

def reencrypt_index(ct):
    """The tree labelled 're-encrypt', else the last tree."""
    for tree in ct.trees:
        if tree.label == REENCRYPT_LABEL:
            return tree.index
    return ct.r - 1


def reencrypt(pk, sk, ct, new_trees, rng, reenc_index=None):
    """Decrypt, then encrypt the payload afresh under ``new_trees``.

    A brand-new content key and fresh tree secrets are drawn; the file id
    is kept.
    """
    index = reencrypt_index(ct) if reenc_index is None else reenc_index
    if not 0 <= index < ct.r:
        raise IndexError(f"privilege index {index} out of range")
    attrs = sk.attributes
    if not satisfies(ct.trees[0], attrs) or not satisfies(ct.trees[index], attrs):
        raise PrivilegeRefused("re-encryption needs the read and re-encrypt privileges")
    plaintext = decrypt_read(pk, sk, ct)
    return encrypt(pk, plaintext, new_trees, rng, file_id=ct.file_id)
