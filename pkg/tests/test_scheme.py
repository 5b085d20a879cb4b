import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import helpers
from anonyabe.algebra import DEMO, G0Element, SeededRandom, generator, gt_generator, hash_to_group, pairing
from anonyabe.privtree import Leaf, PrivilegeTree, ShareMap, iter_leaves, node_at, parse_policy, recover_in_clear, satisfies
from anonyabe.scheme import (
    Ciphertext,
    KeyEscrow,
    PayloadAuthError,
    PolicyNotSatisfied,
    PrivateKey,
    PrivilegeRefused,
    SchemeError,
    combine_public,
    compute_blinder,
    decrypt_node,
    decrypt_read,
    derive_verification,
    encrypt,
    keygen_attribute_part,
    keygen_merge,
    make_trees,
    recover_content_key,
    reencrypt,
    reencrypt_index,
)

POLICIES = [
    ("read", "Sex:Male and (Age:30 or Age:40)"),
    ("write", "2 of (Sex:Male, Position:PhD, University:MIT)"),
    ("reencrypt", "Position:PhD and University:MIT"),
]


@pytest.fixture(scope="module")
def three_priv(demo_net):
    rng = SeededRandom("ct")
    return encrypt(demo_net.pk, b"grades.xlsx contents", make_trees(POLICIES), rng)


def test_roundtrip_and_escrowed_key(demo_net, three_priv):
    ct, vr, secrets = three_priv
    sk = demo_net.key(["Sex:Male", "Age:30"], seed="r1")
    assert decrypt_read(demo_net.pk, sk, ct) == b"grades.xlsx contents"
    assert recover_content_key(demo_net.pk, sk, ct) == secrets.K_e
    assert ct.E0 == secrets.K_e * demo_net.pk.Y ** secrets.s[0]


def test_decrypt_node_values(demo_net, three_priv):
    """DecryptNode at a node is e(g,g)^{sum(d) * q_x(0)}; check with the escrowed shares and d_k."""
    ct, _, secrets = three_priv
    escrow = KeyEscrow()
    sk = demo_net.key(["Sex:Male", "Age:40", "Position:PhD"], seed="r2", escrow=escrow)
    d_total = sum(escrow.d.values()) % DEMO.p
    egg = gt_generator(DEMO)
    for idx, tree in enumerate(ct.trees):
        shares = secrets.shares[idx].shares
        for path, leaf in iter_leaves(tree):
            got = decrypt_node(ct, sk, idx, path)
            if leaf.attribute in sk.components:
                assert got == egg ** (d_total * shares[path] % DEMO.p)
            else:
                assert got is None
    assert decrypt_node(ct, sk, 0) == egg ** (d_total * secrets.s[0] % DEMO.p)
    # Age:30 branch is missing but Age:40 covers the OR gate
    assert decrypt_node(ct, sk, 0, (2,)) == egg ** (d_total * _share_at(secrets, ct, 0, (2,)) % DEMO.p)


def _share_at(secrets, ct, idx, path):
    """q_x(0) at an internal node, recomputed from its children's shares."""
    node = node_at(ct.trees[idx], path)
    sub = {p[len(path):]: v for p, v in secrets.shares[idx].shares.items() if p[:len(path)] == path}
    attrs = {leaf.attribute for _, leaf in iter_leaves(node)}
    return recover_in_clear(node, ShareMap(0, sub), attrs, DEMO.p)


def test_non_satisfying_key_is_refused(demo_net, three_priv):
    ct, _, _ = three_priv
    sk = demo_net.key(["Sex:Female", "Age:30"], seed="r3")
    assert decrypt_node(ct, sk, 0) is None
    with pytest.raises(PolicyNotSatisfied):
        decrypt_read(demo_net.pk, sk, ct)
    with pytest.raises(PolicyNotSatisfied):
        derive_verification(demo_net.pk, sk, ct, 1)


def test_verification_tokens_match_vr(demo_net, three_priv):
    ct, vr, secrets = three_priv
    assert len(vr.entries) == ct.r - 1 == 2
    sk = demo_net.key(["Sex:Male", "Position:PhD", "University:MIT"], seed="r4")
    for p in (1, 2):
        token = derive_verification(demo_net.pk, sk, ct, p)
        assert token == vr.entries[p - 1] == demo_net.pk.Y ** secrets.s[p]
    with pytest.raises(IndexError):
        derive_verification(demo_net.pk, sk, ct, 0)
    with pytest.raises(IndexError):
        derive_verification(demo_net.pk, sk, ct, 3)


def test_tampered_payload_fails_authentication(demo_net, three_priv):
    ct, _, _ = three_priv
    sk = demo_net.key(["Sex:Male", "Age:30"], seed="r5")
    body = bytearray(ct.payload)
    body[-1] ^= 1
    bad = Ciphertext(ct.file_id, ct.trees, ct.E0, ct.root_commitments, ct.leaf_components, bytes(body))
    with pytest.raises(PayloadAuthError):
        decrypt_read(demo_net.pk, sk, bad)
    renamed = Ciphertext("other", ct.trees, ct.E0, ct.root_commitments, ct.leaf_components, ct.payload)
    with pytest.raises(PayloadAuthError):
        decrypt_read(demo_net.pk, sk, renamed)


def test_key_from_another_network_fails(demo_net, three_priv):
    ct, _, _ = three_priv
    other = helpers.network(DEMO, n=3, seed="elsewhere")
    sk = other.key(["Sex:Male", "Age:30"], seed="r6")
    with pytest.raises(PayloadAuthError):
        decrypt_read(demo_net.pk, sk, ct)


def test_reencrypt(demo_net, three_priv):
    ct, _, secrets = three_priv
    owner = demo_net.key(["Sex:Male", "Age:30", "Position:PhD", "University:MIT"], seed="r7")
    rng = SeededRandom("rec")
    assert reencrypt_index(ct) == 2
    new_ct, new_vr, new_secrets = reencrypt(demo_net.pk, owner, ct, make_trees([("read", "Age:30")]), rng)
    assert new_ct.file_id == ct.file_id
    assert new_secrets.K_e != secrets.K_e
    assert new_vr.entries == ()
    assert decrypt_read(demo_net.pk, owner, new_ct) == b"grades.xlsx contents"
    reader = demo_net.key(["Sex:Male", "Age:30"], seed="r8")
    with pytest.raises(PrivilegeRefused):
        reencrypt(demo_net.pk, reader, ct, make_trees([("read", "x")]), rng)
    with pytest.raises(IndexError):
        reencrypt(demo_net.pk, owner, ct, make_trees([("read", "x")]), rng, reenc_index=5)


def test_reencrypt_index_falls_back_to_last(demo_net):
    ct, _, _ = encrypt(demo_net.pk, b"", make_trees([("read", "a"), ("x", "b"), ("y", "c")]), SeededRandom(1))
    assert reencrypt_index(ct) == 2
    single, _, _ = encrypt(demo_net.pk, b"", make_trees([("read", "a")]), SeededRandom(1))
    assert reencrypt_index(single) == 0


def test_tree_list_validation(demo_net):
    rng = SeededRandom(2)
    with pytest.raises(SchemeError):
        encrypt(demo_net.pk, b"", [], rng)
    with pytest.raises(SchemeError):
        encrypt(demo_net.pk, b"", [PrivilegeTree(1, "write", Leaf("a"))], rng)
    with pytest.raises(SchemeError):
        encrypt(demo_net.pk, b"", [PrivilegeTree(0, "read", Leaf("a")), PrivilegeTree(2, "w", Leaf("a"))], rng)
    with pytest.raises(SchemeError):
        encrypt(demo_net.pk, b"", ["read"], rng)


def test_encryption_is_deterministic_under_seed_and_fresh_otherwise(demo_net):
    trees = make_trees([("read", "a or b")])
    a = encrypt(demo_net.pk, b"m", trees, SeededRandom(3))[0]
    b = encrypt(demo_net.pk, b"m", trees, SeededRandom(3))[0]
    c = encrypt(demo_net.pk, b"m", trees, SeededRandom(4))[0]
    assert a == b
    assert a.E0 != c.E0 and a.nonce != c.nonce and a.file_id != c.file_id


def test_leaf_components_share_exponent(demo_net):
    """Leaf components are (g^q, H(att)^q) with the same exponent."""
    ct, _, secrets = encrypt(demo_net.pk, b"m", make_trees([("read", "a and b")]), SeededRandom(5))
    for path, (C, C2) in ct.leaf_components[0].items():
        attr = "a" if path == (1,) else "b"
        assert pairing(C, hash_to_group(DEMO, attr)) == pairing(generator(DEMO), C2)
    assert ct.root_commitments[0] == generator(DEMO) ** secrets.s[0]


# -- key generation arithmetic --------------------------------------------------

def test_blinders_cancel_and_key_merge():
    rng = random.Random(1)
    p = DEMO.p
    g = generator(DEMO)
    n = 4
    s = {(k, j): rng.randrange(p) for k in range(n) for j in range(n) if k != j}
    xs = [
        compute_blinder(DEMO, [g ** s[(k, j)] for j in range(n) if j != k], [g ** s[(j, k)] for j in range(n) if j != k])
        for k in range(n)
    ]
    total = G0Element.identity(DEMO)
    for x in xs:
        total = total * x
    assert total.is_identity()
    with pytest.raises(SchemeError):
        compute_blinder(DEMO, [g], [])
    Ys = [gt_generator(DEMO) ** rng.randrange(p) for _ in range(n)]
    pk = combine_public(Ys, DEMO)
    assert pk.Y == Ys[0] * Ys[1] * Ys[2] * Ys[3]
    with pytest.raises(SchemeError):
        combine_public([], DEMO)


def test_keygen_parts_and_merge_errors():
    g = generator(DEMO)
    with pytest.raises(SchemeError):
        keygen_attribute_part(DEMO, "a", 0)
    h, gr = keygen_attribute_part(DEMO, "a", 5)
    assert h == hash_to_group(DEMO, "a") ** 5 and gr == g ** 5
    with pytest.raises(SchemeError):
        keygen_merge(DEMO, [], [], {})
    with pytest.raises(SchemeError):
        keygen_merge(DEMO, [g], [g], {"a": (h, gr)}, expected=2)
    with pytest.raises(SchemeError):
        PrivateKey(g, {})


# -- randomized round trips ----------------------------------------------------------

@given(st.integers(0, 2**32))
@settings(max_examples=12)
def test_random_trees_decrypt_iff_satisfied(demo_net, seed):
    rng = random.Random(seed)
    attrs = helpers.universe(demo_net.config, 8)
    tree = helpers.random_tree(rng, attrs, max_nodes=12)
    held = set(rng.sample(attrs, rng.randint(1, len(attrs))))
    ct, _, secrets = encrypt(demo_net.pk, b"payload", make_trees([("read", tree)]), SeededRandom(seed))
    sk = demo_net.key(sorted(held), seed=seed)
    if satisfies(tree, held):
        assert decrypt_read(demo_net.pk, sk, ct) == b"payload"
    else:
        assert decrypt_node(ct, sk, 0) is None
        with pytest.raises(PolicyNotSatisfied):
            decrypt_read(demo_net.pk, sk, ct)


def test_collusion_hybrid_key_fails(demo_net):
    ct, _, secrets = encrypt(demo_net.pk, b"m", make_trees([("read", "Sex:Male and Age:30")]), SeededRandom(8))
    a = demo_net.key(["Sex:Male"], seed="alice")
    b = demo_net.key(["Age:30"], seed="bob")
    comps = {**a.components, **b.components}
    for D in (a.D, b.D):
        hybrid = PrivateKey(D, comps)
        assert recover_content_key(demo_net.pk, hybrid, ct) != secrets.K_e
        with pytest.raises(PayloadAuthError):
            decrypt_read(demo_net.pk, hybrid, ct)


def test_policy_objects_and_text_build_same_tree():
    a = make_trees([("read", "a and b")])[0]
    b = make_trees([("read", parse_policy("a and b"))])[0]
    assert a == b
