"""Acceptance criteria 1-9. Each test prints one ``criterion N: PASS/FAIL`` line."""

import itertools
import random
import time

import numpy as np
import pytest

import helpers
import oracles
from anonyabe.algebra import DEMO, TOY, SeededRandom, generator, pairing
from anonyabe.algebra.scalar import lagrange_coeff
from anonyabe.authorities import simulate_compromise
from anonyabe.bench import linear_fit, medians, read_csv
from anonyabe.cli import EXIT_OK, EXIT_POLICY, bench_main, dec_main, enc_main, keygen_main, rec_main, setup_main
from anonyabe.formats import dump_ciphertext, dump_verification
from anonyabe.privtree import satisfies
from anonyabe.scheme import (
    PayloadAuthError,
    PolicyNotSatisfied,
    PrivateKey,
    decrypt_node,
    decrypt_read,
    derive_verification,
    encrypt,
    make_trees,
    recover_content_key,
)
from anonyabe.server import FileStore, OperationRequest, response_digest

pytestmark = pytest.mark.slow


# -- criteria 1 and 2: round trip and soundness over 200 random instances --------------

@pytest.fixture(scope="module")
def instances():
    """200 instances, each with a fresh network, a satisfying and a failing key."""
    rng = random.Random(2024)
    out = []
    start = time.perf_counter()
    for i in range(200):
        n = rng.randint(2, 8)
        net = helpers.network(DEMO, n=n, seed=f"acc-{i}")
        universe = helpers.universe(net.config, rng.randint(1, 16))
        tree = helpers.random_tree(rng, universe, max_nodes=rng.randint(1, 32))
        good = helpers.minimal_satisfying(tree, rng)
        good |= set(rng.sample(universe, rng.randint(0, len(universe))))
        bad = helpers.maximal_failing(tree, universe, rng)
        if not bad:
            bad = {f"{sorted(net.config.partition[1])[0]}:decoy"}
        payload = rng.randbytes(rng.randint(0, 4096))
        ct, _, secrets = encrypt(net.pk, payload, make_trees([("read", tree)]), SeededRandom(f"ct-{i}"))
        out.append((net, tree, ct, payload, net.key(sorted(good), seed=f"g{i}"), net.key(sorted(bad), seed=f"b{i}")))
    return out, time.perf_counter() - start


def test_criterion_1_round_trip(instances, acceptance):
    cases, setup_time = instances
    start = time.perf_counter()
    ok = sum(
        satisfies(tree, good.attributes) and decrypt_read(net.pk, good, ct) == payload
        for net, tree, ct, payload, good, _ in cases
    )
    elapsed = setup_time + time.perf_counter() - start
    passed = ok == len(cases) == 200 and elapsed < 600
    acceptance(1, passed, f"{ok}/{len(cases)} satisfying instances decrypt exactly, {elapsed:.0f}s total")
    assert passed


def test_criterion_2_soundness(instances, acceptance):
    cases, _ = instances
    ok = 0
    for net, tree, ct, _, _, bad in cases:
        if satisfies(tree, bad.attributes) or decrypt_node(ct, bad, 0) is not None:
            continue
        try:
            decrypt_read(net.pk, bad, ct)
        except PolicyNotSatisfied:
            ok += 1
    acceptance(2, ok == len(cases), f"{ok}/{len(cases)} non-satisfying keys get bottom and policy-not-satisfied")
    assert ok == len(cases)


# -- criterion 3: collusion ------------------------------------------------------------

def test_criterion_3_collusion(acceptance):
    rng = random.Random(33)
    trials = ok = 0
    nets = [helpers.network(DEMO, n=rng.randint(2, 5), seed=f"col-{k}") for k in range(10)]
    while trials < 100:
        net = nets[trials % len(nets)]
        universe = helpers.universe(net.config, rng.randint(2, 12))
        tree = helpers.random_tree(rng, universe, max_nodes=rng.randint(3, 24))
        minimal = sorted(helpers.minimal_satisfying(tree, rng))
        if len(minimal) < 2:
            continue
        rng.shuffle(minimal)
        cut = rng.randint(1, len(minimal) - 1)
        a_attrs, b_attrs = set(minimal[:cut]), set(minimal[cut:])
        assert not satisfies(tree, a_attrs) and not satisfies(tree, b_attrs)
        ct, _, secrets = encrypt(net.pk, b"secret", make_trees([("read", tree)]), SeededRandom(f"col-{trials}"))
        a = net.key(sorted(a_attrs), seed=f"ca{trials}")
        b = net.key(sorted(b_attrs), seed=f"cb{trials}")
        comps = {**a.components, **b.components}
        hybrids = [PrivateKey(a.D, comps), PrivateKey(b.D, comps), PrivateKey(a.D * b.D, comps)]
        failed = 0
        for hybrid in hybrids:
            if recover_content_key(net.pk, hybrid, ct) == secrets.K_e:
                continue
            try:
                decrypt_read(net.pk, hybrid, ct)
            except PayloadAuthError:
                failed += 1
        ok += failed == len(hybrids)
        trials += 1
    acceptance(3, ok == 100, f"{ok}/100 coalitions: every hybrid key fails to recover K_e")
    assert ok == 100


# -- criterion 4: compromise tolerance ----------------------------------------------------

def test_criterion_4_compromise_tolerance(acceptance):
    bad = []
    checked = 0
    for n in (4, 6, 8):
        for k in range(50):
            net = helpers.network(DEMO, n=n, seed=f"tol-{n}-{k}")
            for size in range(1, n - 1):
                for subset in itertools.combinations(range(1, n + 1), size):
                    rep = simulate_compromise(net.states, subset, net.transcript)
                    checked += 1
                    if rep.blinders_cancel or rep.master_exposed:
                        bad.append((n, k, subset))
    counter = []
    for k in range(10):
        net = helpers.network(DEMO, n=6, cluster_size=3, seed=f"ctr-{k}")
        for cluster in net.transcript.clusters:
            for pair in itertools.combinations(cluster, 2):
                (honest,) = set(cluster) - set(pair)
                rep = simulate_compromise(net.states, pair, net.transcript)
                got = rep.recovered_blinders.get(honest)
                combined = got
                if got is not None:
                    for j in pair:
                        combined = combined * net.states[j - 1].share.x
                counter.append(got == net.states[honest - 1].share.x and combined.is_identity())
    passed = not bad and all(counter) and len(counter) == 60
    acceptance(4, passed, f"{checked} subsets of size <= N-2 safe ({len(bad)} leaks); "
                          f"C=3 pairs recover the cluster blinder in {sum(counter)}/{len(counter)} cases")
    assert passed


# -- criterion 5: algebra oracles --------------------------------------------------------

def test_criterion_5_algebra_oracles(acceptance):
    start = time.perf_counter()
    p, q = TOY.p, TOY.q
    g = generator(TOY)
    table = oracles.dlog_table(oracles.tate((TOY.gx, TOY.gy), (TOY.gx, TOY.gy), q, p), p, q)
    powers = [g ** x for x in range(p)]
    pair_bad = sum(
        table.get(pairing(powers[x], powers[y]).value) != x * y % p for x in range(p) for y in range(p)
    )
    # every c0 + c1 x + c2 x^2 + c3 x^3 over F_97, recovered at 0 from every 4- and 5-point subset of 1..5
    xs = np.arange(1, 6, dtype=np.int64)
    c = np.arange(p, dtype=np.int64)
    c0, c1, c2 = np.meshgrid(c, c, c, indexing="ij")
    subsets = [S for k in (4, 5) for S in itertools.combinations(range(1, 6), k)]
    lams = {S: [lagrange_coeff(i, S, 0, p) for i in S] for S in subsets}
    lag_bad = 0
    for c3 in range(p):
        evals = {int(x): (c0 + x * (c1 + x * (c2 + x * c3))) % p for x in xs}
        for S, lam in lams.items():
            got = np.zeros_like(c0)
            for i, l in zip(S, lam):
                got = (got + l * evals[i]) % p
            lag_bad += int(np.count_nonzero(got != c0))
    lag_count = p ** 4 * len(subsets)
    elapsed = time.perf_counter() - start
    passed = pair_bad == 0 and lag_bad == 0 and elapsed < 60
    acceptance(5, passed, f"{p * p} pairings vs dlog table, {lag_count} interpolations, "
                          f"{pair_bad + lag_bad} mismatches, {elapsed:.1f}s")
    assert passed


# -- criteria 6 and 7: complexity shape from cmd_bench CSVs ---------------------------------

def bench_csv(tmp_path, name, *args):
    path = tmp_path / f"{name}.csv"
    assert bench_main([*args, "--preset", "demo", "--seed", name, "--csv", str(path)]) == EXIT_OK
    with open(path) as fh:
        return read_csv(fh)


def fit(records, op, key, x=lambda k: k):
    m = medians(records, op, key)
    return linear_fit([x(k) for k in m], list(m.values()))[2]


def test_criterion_6_complexity_shape(tmp_path, acceptance):
    auth = bench_csv(tmp_path, "authorities", "-d", "authorities", "-r", "2:16:2", "--reps", "9", "--cluster-size", "2")
    attrs = bench_csv(tmp_path, "attributes", "-d", "attributes", "-r", "2:20:2", "--reps", "5")
    nodes = bench_csv(tmp_path, "nodes", "-d", "nodes", "-r", "7:31:3", "--reps", "5")
    r2_i = fit(attrs, "keygen", lambda r: r.I)
    r2_n = fit(auth, "keygen", lambda r: r.N)
    r2_enc = fit(nodes, "encrypt", lambda r: (r.X, r.K), lambda k: k[0] * k[1])
    r2_dec = fit(nodes, "decrypt", lambda r: r.X)
    per = medians(auth, "setup_per_authority", lambda r: r.N)
    mean = sum(per.values()) / len(per)
    spread = max(abs(v - mean) / mean for v in per.values())
    checks = {"a-I": r2_i >= 0.9, "a-N": r2_n >= 0.9, "b": r2_enc >= 0.9, "c": r2_dec >= 0.9, "d": spread <= 0.25}
    passed = all(checks.values())
    acceptance(6, passed, f"R2 keygen~I {r2_i:.3f}, keygen~N {r2_n:.3f}, encrypt~XK {r2_enc:.3f}, "
                          f"decrypt~X {r2_dec:.3f}; setup/authority spread {spread:.1%} over N=2..16")
    assert passed, checks


def test_criterion_7_shape_independence(tmp_path, acceptance):
    recs = bench_csv(tmp_path, "shapes", "-d", "shapes", "--reps", "7")
    worst = {}
    for op in ("encrypt", "decrypt"):
        m = {r.op: None for r in recs if r.op.startswith(op + "@")}
        values = [medians(recs, name, lambda r: r.X)[20] for name in m]
        assert len(values) == 5
        mean = sum(values) / len(values)
        worst[op] = max(abs(v - mean) / mean for v in values)
    passed = all(w <= 0.20 for w in worst.values())
    acceptance(7, passed, f"5 shapes at X=20: encrypt within {worst['encrypt']:.1%}, "
                          f"decrypt within {worst['decrypt']:.1%} of the mean")
    assert passed


# -- criterion 8: verification protocol -------------------------------------------------------

def test_criterion_8_verification_protocol(tmp_path, demo_net, acceptance):
    fs = FileStore(tmp_path / "store", rng=SeededRandom("acc-8"))
    trees = make_trees([("read", "Sex:Male or Sex:Female"), ("write", "Position:PhD"),
                        ("reencrypt", "2 of (Position:PhD, University:MIT, Age:40)")])
    ct, vr, _ = encrypt(demo_net.pk, b"doc", trees, SeededRandom("acc-8"))
    fs.store(dump_ciphertext(ct), dump_verification(vr, DEMO))
    owner = demo_net.key(["Sex:Male", "Position:PhD", "University:MIT"], seed="acc-8-owner")
    once = []
    for p in (1, 2):
        ch = fs.open_challenge(ct.file_id, p)
        req = OperationRequest(ct.file_id, p, ch.nonce,
                               response_digest(derive_verification(demo_net.pk, owner, ct, p).to_bytes(), ch.nonce))
        once.append((fs.verify_privilege(req), fs.verify_privilege(req)))
    rng = random.Random(8)
    outsiders = [demo_net.key(["Sex:Female", "Age:40"], seed="o1"), demo_net.key(["University:MIT"], seed="o2"),
                 demo_net.key(["Age:40", "Religion:None"], seed="o3")]
    false_count = 0
    for i in range(100):
        sk = outsiders[i % 3]
        p = 1 + i % 2
        assert not satisfies(ct.trees[p].root, sk.attributes)
        ch = fs.open_challenge(ct.file_id, p)
        if i % 2:
            digest = rng.randbytes(32)
        else:
            digest = response_digest(helpers.forged_token(ct, sk, p).to_bytes(), ch.nonce)
        false_count += not fs.verify_privilege(OperationRequest(ct.file_id, p, ch.nonce, digest))
    passed = once == [(True, False), (True, False)] and false_count == 100
    acceptance(8, passed, f"valid digests verify once then replay fails {once}; {false_count}/100 guesses rejected")
    assert passed


# -- criterion 9: revocation through the CLI ----------------------------------------------------

def test_criterion_9_revocation(tmp_path, acceptance):
    keys = tmp_path / "keys"
    setup_main(["-n", "3", "-o", str(keys), "--seed", "acc-9"])
    pub = str(keys / "pub.key")
    masters = [str(keys / f"master{k}.key") for k in (1, 2, 3)]
    users = {
        "owner": ["Position:PhD", "University:MIT", "Sex:Female"],
        "revoked": ["Position:PhD", "Sex:Male"],
        "unrelated": ["University:MIT", "Age:30"],
    }
    for name, attrs in users.items():
        assert keygen_main(["--pub", pub, "--master", *masters, "-a", *attrs, "-o", str(tmp_path / f"{name}.key"),
                            "--seed", f"acc-9-{name}"]) == EXIT_OK
    original = tmp_path / "plan.txt"
    original.write_bytes(b"quarterly plan\n" * 64)
    old, new = tmp_path / "old.anyc", tmp_path / "new.anyc"
    assert enc_main(["--pub", pub, "-i", str(original), "-o", str(old), "--seed", "acc-9-enc",
                     "-p", "read=Position:PhD or University:MIT",
                     "-p", "reencrypt=University:MIT and Sex:Female"]) == EXIT_OK

    def dec(name, ct):
        out = tmp_path / f"{name}-{ct.stem}.out"
        code = dec_main(["--pub", pub, "-k", str(tmp_path / f"{name}.key"), "-i", str(ct), "-o", str(out)])
        return code, out.read_bytes() if out.exists() else None

    before = {name: dec(name, old)[0] for name in users}
    assert rec_main(["--pub", pub, "-k", str(tmp_path / "owner.key"), "-i", str(old), "-o", str(new),
                     "--seed", "acc-9-rec", "-p", "read=University:MIT",
                     "-p", "reencrypt=University:MIT and Sex:Female"]) == EXIT_OK
    refused = rec_main(["--pub", pub, "-k", str(tmp_path / "revoked.key"), "-i", str(old), "-o", str(tmp_path / "x.anyc"),
                        "-p", "read=Sex:Male"])
    after = {name: dec(name, new) for name in users}
    passed = (
        set(before.values()) == {EXIT_OK}
        and after["revoked"] == (EXIT_POLICY, None)
        and after["unrelated"] == (EXIT_OK, original.read_bytes())
        and after["owner"] == (EXIT_OK, original.read_bytes())
        and refused == EXIT_POLICY
    )
    acceptance(9, passed, f"before rec all {sorted(set(before.values()))}; after rec revoked exit "
                          f"{after['revoked'][0]}, unrelated exit {after['unrelated'][0]}, owner plaintext matches "
                          f"{after['owner'][1] == original.read_bytes()}")
    assert passed
