"""Command-line tools: anonyabe-setup, -keygen, -enc, -dec, -rec and -bench.

Exit codes: 0 success, 1 usage, 2 I/O or malformed file, 3 policy not
satisfied or privilege refused, 4 verification failure.
"""

import argparse
import os
import sys

from .algebra import PRESETS, SeededRandom, default_preset_name, get_preset, spawn, system_rng
from .authorities import AuthorityConfig, AuthorityError, AuthorityState, issue_key, make_request, run_setup
from .bench import DIMENSIONS, SHAPES, run_bench, write_csv
from .formats import (
    ROLE_AUTHORITY,
    ROLE_USER,
    FormatError,
    Keyring,
    dump_ciphertext,
    dump_keyring,
    dump_public_key,
    dump_verification,
    load_ciphertext,
    load_keyring,
    load_public_key,
)
from .privtree import READ_LABEL, TreeError
from .scheme import (
    PayloadAuthError,
    PolicyNotSatisfied,
    PrivilegeRefused,
    SchemeError,
    decrypt_read,
    derive_verification,
    encrypt,
    make_trees,
    reencrypt,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_POLICY = 3
EXIT_VERIFY = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; these tools reserve 2 for I/O."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _rng(args):
    return SeededRandom(args.seed) if args.seed is not None else system_rng()


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


def _write(path, data):
    tmp = f"{path}.tmp-{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _parser(prog, description):
    p = _Parser(prog=prog, description=description)
    p.add_argument("--seed", help="deterministic randomness (testing and reproducible runs)")
    return p


def _load_pub(path):
    return load_public_key(_read(path))


def _load_user_key(path):
    ring = load_keyring(_read(path))
    if ring.role != ROLE_USER:
        raise UsageError(f"{path} is not a user private key")
    return ring.key


def _parse_policies(items):
    """``label=policy`` strings -> privilege trees; the first must be ``read``."""
    pairs = []
    for item in items:
        label, sep, policy = item.partition("=")
        label = label.strip()
        if not sep or not label or not label.replace("-", "").replace("_", "").isalnum():
            raise UsageError(f"policy {item!r} is not of the form LABEL=POLICY")
        pairs.append((label, policy))
    if not pairs:
        raise UsageError("at least one policy is required")
    if pairs[0][0] != READ_LABEL:
        raise UsageError(f"the first policy must be labelled {READ_LABEL!r}")
    labels = [label for label, _ in pairs]
    if len(set(labels)) != len(labels):
        raise UsageError("privilege labels must be distinct")
    return make_trees(pairs)


def _vr_path(ct_path, explicit):
    if explicit:
        return explicit
    root, ext = os.path.splitext(ct_path)
    return (root if ext == ".anyc" else ct_path) + ".anyv"


def _run(fn, argv):
    try:
        return fn(argv)
    except SystemExit as exc:  # argparse: --help or a usage error
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TreeError as exc:  # includes policy syntax errors with their position
        print(f"error: policy: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AuthorityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PrivilegeRefused as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_POLICY
    except PolicyNotSatisfied as exc:
        print(f"denied: {exc}", file=sys.stderr)
        return EXIT_POLICY
    except PayloadAuthError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (OSError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SchemeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


# ---------------------------------------------------------------------------

def _setup(argv):
    p = _parser("anonyabe-setup", "Jointly generate the public key and N master key shares.")
    p.add_argument("-n", "--authorities", type=int, required=False, help="number of authorities N")
    p.add_argument("-c", "--cluster-size", type=int, help="authorities per blinding cluster (default N)")
    p.add_argument("--preset", default=None, choices=sorted(PRESETS), help="pairing parameters")
    p.add_argument("-o", "--out", default=".", help="output directory")
    p.add_argument("--categories", help="comma-separated attribute categories, dealt round-robin")
    p.add_argument("--transcript", help="also write the full message transcript here")
    p.add_argument("--show-params", action="store_true", help="print the preset constants and exit")
    args = p.parse_args(argv)
    params = get_preset(args.preset or default_preset_name())
    if args.show_params:
        for name in ("name", "preset_id", "q", "p", "cofactor", "gx", "gy"):
            value = getattr(params, name)
            print(f"{name} = {hex(value) if isinstance(value, int) and name not in ('preset_id',) else value}")
        return EXIT_OK
    if args.authorities is None:
        p.error("the following arguments are required: -n/--authorities")
    n = args.authorities
    if args.categories:
        cats = tuple(c.strip() for c in args.categories.split(",") if c.strip())
        config = AuthorityConfig.with_default_partition(n, args.cluster_size, cats)
    else:
        config = AuthorityConfig.with_default_partition(n, args.cluster_size)
    rng = _rng(args)
    pk, states, transcript = run_setup(config, params, rng)
    os.makedirs(args.out, exist_ok=True)
    _write(os.path.join(args.out, "pub.key"), dump_public_key(pk, config.partition))
    for state in states:
        ring = Keyring(ROLE_AUTHORITY, params, state.share, state.categories, n)
        _write(os.path.join(args.out, f"master{state.index}.key"), dump_keyring(ring))
    if args.transcript:
        with open(args.transcript, "w") as fh:
            fh.write(transcript.dump())
    print(f"setup N={n} C={config.cluster_size} preset={params.name} {transcript.summary()}")
    for k in sorted(config.partition):
        print(f"  authority {k}: {', '.join(sorted(config.partition[k])) or '-'}")
    return EXIT_OK


def _keygen(argv):
    p = _parser("anonyabe-keygen", "Issue a private key through every authority's share.")
    p.add_argument("--pub", required=True, help="pub.key")
    p.add_argument("--master", nargs="+", required=True, help="every authority's master key file")
    p.add_argument("-a", "--attr", nargs="+", required=True, help="attributes, Category:Value")
    p.add_argument("--gid", default="user", help="global identifier (never leaves this process)")
    p.add_argument("-o", "--out", required=True, help="output private key file")
    args = p.parse_args(argv)
    pk, partition = _load_pub(args.pub)
    rings = [load_keyring(_read(path)) for path in args.master]
    if any(r.role != ROLE_AUTHORITY for r in rings):
        raise UsageError("--master files must be authority key files")
    if any(r.params != pk.params for r in rings):
        raise UsageError("master keys and public key use different presets")
    n = len(partition)
    have = {r.key.index for r in rings}
    missing = sorted(set(range(1, n + 1)) - have)
    if missing:
        raise UsageError(f"missing master share for authorities {missing}")
    if len(rings) != n:
        raise UsageError("duplicate master share")
    for attr in args.attr:
        if ":" not in attr or not attr.split(":", 1)[1]:
            raise UsageError(f"attribute {attr!r} is not of the form Category:Value")
    rng = _rng(args)
    config = AuthorityConfig(n, n, partition)
    states = [
        AuthorityState.restore(r.key, pk.params, r.categories, spawn(rng, f"authority-{r.key.index}"))
        for r in sorted(rings, key=lambda r: r.key.index)
    ]
    request = make_request(config, args.gid, args.attr, rng)
    sk = issue_key(states, request, rng)
    _write(args.out, dump_keyring(Keyring(ROLE_USER, pk.params, sk)))
    print(f"issued key with {len(sk.components)} attribute components")
    return EXIT_OK


def _enc(argv):
    p = _parser("anonyabe-enc", "Encrypt a file under r privilege trees.")
    p.add_argument("--pub", required=True, help="pub.key")
    p.add_argument("-i", "--in", dest="input", required=True, help="plaintext file")
    p.add_argument("-p", "--policy", action="append", default=[], required=True,
                   help="LABEL=POLICY, repeatable; the first must be read=...")
    p.add_argument("-o", "--out", required=True, help="ciphertext output (.anyc)")
    p.add_argument("--vr", help="verification set output (default: .anyv next to --out)")
    p.add_argument("--file-id", help="file id (default: random)")
    args = p.parse_args(argv)
    trees = _parse_policies(args.policy)
    pk, _ = _load_pub(args.pub)
    data = _read(args.input)
    ct, vr, _ = encrypt(pk, data, trees, _rng(args), file_id=args.file_id)
    vr_path = _vr_path(args.out, args.vr)
    _write(args.out, dump_ciphertext(ct))
    _write(vr_path, dump_verification(vr, pk.params))
    print(f"file_id={ct.file_id} r={ct.r} vr_entries={len(vr.entries)}")
    return EXIT_OK


def _dec(argv):
    p = _parser("anonyabe-dec", "Decrypt a file, or derive the token proving a privilege.")
    p.add_argument("--pub", required=True, help="pub.key")
    p.add_argument("-k", "--key", required=True, help="user private key")
    p.add_argument("-i", "--in", dest="input", required=True, help="ciphertext (.anyc)")
    p.add_argument("-o", "--out", help="plaintext output, or token output with --privilege")
    p.add_argument("--privilege", type=int, default=0, help="0 decrypts; p >= 1 prints the Y^{s_p} token")
    args = p.parse_args(argv)
    pk, _ = _load_pub(args.pub)
    sk = _load_user_key(args.key)
    ct = load_ciphertext(_read(args.input))
    if args.privilege == 0:
        if not args.out:
            raise UsageError("--out is required to decrypt")
        _write(args.out, decrypt_read(pk, sk, ct))
        return EXIT_OK
    try:
        token = derive_verification(pk, sk, ct, args.privilege)
    except IndexError as exc:
        raise UsageError(str(exc)) from None
    if args.out:
        _write(args.out, token.to_bytes())
    else:
        print(token.to_bytes().hex())
    return EXIT_OK


def _rec(argv):
    p = _parser("anonyabe-rec", "Re-encrypt a file under new privilege trees.")
    p.add_argument("--pub", required=True, help="pub.key")
    p.add_argument("-k", "--key", required=True, help="user private key")
    p.add_argument("-i", "--in", dest="input", required=True, help="current ciphertext (.anyc)")
    p.add_argument("-p", "--policy", action="append", default=[], required=True,
                   help="LABEL=POLICY for the new file, repeatable")
    p.add_argument("-o", "--out", required=True, help="new ciphertext output (.anyc)")
    p.add_argument("--vr", help="new verification set output")
    p.add_argument("--privilege", type=int, help="index of the re-encrypt tree (default: by label)")
    args = p.parse_args(argv)
    trees = _parse_policies(args.policy)
    pk, _ = _load_pub(args.pub)
    sk = _load_user_key(args.key)
    ct = load_ciphertext(_read(args.input))
    try:
        new_ct, vr, _ = reencrypt(pk, sk, ct, trees, _rng(args), reenc_index=args.privilege)
    except IndexError as exc:
        raise UsageError(str(exc)) from None
    _write(args.out, dump_ciphertext(new_ct))
    _write(_vr_path(args.out, args.vr), dump_verification(vr, pk.params))
    print(f"file_id={new_ct.file_id} r={new_ct.r} vr_entries={len(vr.entries)}")
    return EXIT_OK


def _parse_range(text, dimension):
    if dimension == "shapes":
        names = [s for s in text.split(",") if s] if text else list(SHAPES)
        return names
    values = []
    for part in text.split(","):
        if ":" in part:
            bits = [int(b) for b in part.split(":")]
            if len(bits) not in (2, 3):
                raise UsageError(f"bad range {part!r}; use START:STOP[:STEP]")
            start, stop = bits[0], bits[1]
            step = bits[2] if len(bits) == 3 else 1
            if step < 1:
                raise UsageError("range step must be positive")
            values.extend(range(start, stop + 1, step))
        elif part:
            values.append(int(part))
    if not values or min(values) < 1:
        raise UsageError("range values must be positive integers")
    return values


def _bench(argv):
    p = _parser("anonyabe-bench", "Time the core algorithms along one dimension; writes CSV.")
    p.add_argument("-d", "--dimension", required=True, choices=DIMENSIONS)
    p.add_argument("-r", "--range", dest="values", default="",
                   help="values, e.g. 2:16:2 or 1,5,10 (shapes: comma-separated names)")
    p.add_argument("--reps", type=int, default=3, help="repetitions per point")
    p.add_argument("--cluster-size", type=int, default=2, help="cluster size for the authorities sweep")
    p.add_argument("--preset", default=None, choices=sorted(PRESETS))
    p.add_argument("--csv", help="output CSV (default stdout)")
    args = p.parse_args(argv)
    try:
        values = _parse_range(args.values, args.dimension)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.dimension != "shapes" and not args.values:
        raise UsageError("--range is required for this dimension")
    if args.reps < 1:
        raise UsageError("--reps must be positive")
    params = get_preset(args.preset or default_preset_name())
    rng = SeededRandom(args.seed if args.seed is not None else "bench")
    try:
        records = run_bench(args.dimension, values, args.reps, params, rng,
                            defaults={"cluster_size": args.cluster_size})
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    text = write_csv(records)
    if args.csv:
        _write(args.csv, text.encode())
    else:
        sys.stdout.write(text)
    return EXIT_OK


def setup_main(argv=None):
    return _run(_setup, sys.argv[1:] if argv is None else argv)


def keygen_main(argv=None):
    return _run(_keygen, sys.argv[1:] if argv is None else argv)


def enc_main(argv=None):
    return _run(_enc, sys.argv[1:] if argv is None else argv)


def dec_main(argv=None):
    return _run(_dec, sys.argv[1:] if argv is None else argv)


def rec_main(argv=None):
    return _run(_rec, sys.argv[1:] if argv is None else argv)


def bench_main(argv=None):
    return _run(_bench, sys.argv[1:] if argv is None else argv)


TOOLS = {
    "setup": setup_main,
    "keygen": keygen_main,
    "enc": enc_main,
    "dec": dec_main,
    "rec": rec_main,
    "bench": bench_main,
}


def main(argv=None):
    """``python -m anonyabe TOOL ...`` dispatcher."""
    argv = sys.argv[1:] if argv is None else argv
    if not argv or argv[0] not in TOOLS:
        print(f"usage: python -m anonyabe {{{','.join(TOOLS)}}} ...", file=sys.stderr)
        return EXIT_USAGE
    return TOOLS[argv[0]](argv[1:])
