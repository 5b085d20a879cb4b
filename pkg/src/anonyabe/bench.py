"""Benchmark harness for the core algorithms.

Each dimension sweep holds everything else at its default (4 authorities,
20 attributes, a 100 KB file, a 20-attribute read tree) and writes one CSV
row per repetition and operation.
"""

import csv
import gc
import io
import statistics
import time
from dataclasses import astuple, dataclass, fields

from .algebra import DEMO, SeededRandom, clear_hash_cache, spawn
from .authorities import DEFAULT_CATEGORIES, AuthorityConfig, issue_key, make_request, run_setup
from .privtree import Gate, Leaf, PrivilegeTree, iter_leaves, iter_nodes
from .scheme import decrypt_read, encrypt

__all__ = [
    "CSV_HEADER",
    "DIMENSIONS",
    "SHAPES",
    "DEFAULTS",
    "BenchRecord",
    "attribute_names",
    "grouped_tree",
    "shape_tree",
    "tree_stats",
    "run_bench",
    "write_csv",
    "read_csv",
    "medians",
    "linear_fit",
]

CSV_HEADER = ("op", "N", "I", "X", "K", "filesize", "rep", "micros")
DIMENSIONS = ("authorities", "attributes", "nodes", "filesize", "trees", "shapes")
DEFAULTS = {"N": 4, "I": 20, "filesize": 100 * 1024, "read_attributes": 20, "cluster_size": 2}


@dataclass(frozen=True)
class BenchRecord:
    op: str
    N: int
    I: int
    X: int
    K: float
    filesize: int
    rep: int
    micros: int

    def __post_init__(self):
        if self.micros <= 0:
            raise ValueError("wall time must be positive")


def attribute_names(count, categories=DEFAULT_CATEGORIES):
    """``count`` distinct ``Category:Value`` attributes spread over ``categories``."""
    return [f"{categories[i % len(categories)]}:a{i}" for i in range(count)]


def grouped_tree(x, attrs):
    """A tree of exactly ``x`` nodes: groups of a 2-of-4 gate over four leaves
    under a 2-of-n root, leftovers hung on the root. Uses ``attrs`` in order.
    """
    if x < 1:
        raise ValueError("a tree needs at least one node")
    it = iter(attrs)
    if x == 1:
        return Leaf(next(it))
    groups, rest = divmod(x - 1, 5)
    children = [Gate(2, tuple(Leaf(next(it)) for _ in range(4))) for _ in range(groups)]
    children += [Leaf(next(it)) for _ in range(rest)]
    return Gate(min(2, len(children)), tuple(children))


def _leaves(attrs):
    return [Leaf(a) for a in attrs]


def _balanced(L):
    return Gate(2, (Gate(3, tuple(L[0:5])), Gate(2, tuple(L[5:10])), Gate(4, tuple(L[10:16]))))


def _chain(L):
    inner = Gate(2, tuple(L[12:16]))
    inner = Gate(3, tuple(L[8:12]) + (inner,))
    inner = Gate(2, tuple(L[4:8]) + (inner,))
    return Gate(2, tuple(L[0:4]) + (inner,))


def _wide(L):
    inner = Gate(1, (L[15],))
    inner = Gate(1, (L[14], inner))
    inner = Gate(2, (L[13], inner))
    return Gate(1, tuple(L[0:13]) + (inner,))


def _deep(L):
    left = Gate(3, (Gate(2, tuple(L[0:6])),) + tuple(L[6:10]))
    return Gate(2, (left, Gate(4, tuple(L[10:16]))))


def _flat_groups(L):
    return Gate(4, tuple(L[0:4]) + tuple(Gate(2, tuple(L[i:i + 4])) for i in (4, 8, 12)))


# five 20-node shapes with 16 leaves and 4 gates each
SHAPES = {
    "balanced": _balanced,
    "chain": _chain,
    "wide": _wide,
    "deep": _deep,
    "flatgroups": _flat_groups,
}


def shape_tree(name, attrs):
    return SHAPES[name](_leaves(attrs))


def tree_stats(trees):
    """(X, K): total node count and mean gate threshold over ``trees``."""
    x = 0
    thresholds = []
    for tree in trees:
        for _, node in iter_nodes(tree):
            x += 1
            if isinstance(node, Gate):
                thresholds.append(node.threshold)
    return x, (statistics.fmean(thresholds) if thresholds else 0.0)


def _timed(fn):
    clear_hash_cache()
    gc.collect()
    gc.disable()
    try:
        start = time.perf_counter_ns()
        out = fn()
        elapsed = time.perf_counter_ns() - start
    finally:
        gc.enable()
    return out, max(1, elapsed // 1000)


class _Network:
    def __init__(self, n, params, rng, cluster_size=None):
        c = min(n, cluster_size or n)
        self.config = AuthorityConfig.with_default_partition(n, c if n > 1 else 1)
        self.pk, self.states, _ = run_setup(self.config, params, spawn(rng, f"setup-{n}"))

    def key_for(self, attrs, rng):
        return issue_key(self.states, make_request(self.config, "bench-user", attrs, rng), rng)


def run_bench(dimension, values, reps=3, params=DEMO, rng=None, defaults=None, progress=None):
    """Sweep ``dimension`` over ``values``; returns a list of :class:`BenchRecord`.

    Repetitions are interleaved across the sweep points (rep outer, point
    inner) so a slow stretch of wall time spreads over all points instead of
    inflating one of them. Records come back ordered by point, op, rep.
    """
    if dimension not in DIMENSIONS:
        raise ValueError(f"unknown dimension {dimension!r}; pick one of {', '.join(DIMENSIONS)}")
    if reps < 1:
        raise ValueError("need at least one repetition")
    d = dict(DEFAULTS, **(defaults or {}))
    rng = rng if rng is not None else SeededRandom(0)
    slots = {}

    def emit(point, slot, op, N, I, X, K, size, rep, micros):
        rec = BenchRecord(op, N, I, X, round(K, 4), size, rep, micros)
        slots[(point, slot, rep)] = rec
        if progress is not None:
            progress(rec)

    def ordered():
        return [slots[key] for key in sorted(slots)]

    if dimension == "authorities":
        attrs = attribute_names(d["I"])
        _Network(values[0], params, spawn(rng, "warmup"), d["cluster_size"]).key_for(attrs, spawn(rng, "warmup"))
        for rep in range(reps):
            for point, n in enumerate(values):
                sub = spawn(rng, f"auth-{n}-{rep}")
                net, micros = _timed(lambda: _Network(n, params, sub, d["cluster_size"]))
                emit(point, 0, "setup", n, 0, 0, 0, 0, rep, micros)
                emit(point, 1, "setup_per_authority", n, 0, 0, 0, 0, rep, max(1, micros // n))
                _, micros = _timed(lambda: net.key_for(attrs, sub))
                emit(point, 2, "keygen", n, len(attrs), 0, 0, 0, rep, micros)
        return ordered()

    net = _Network(d["N"], params, rng)
    n = d["N"]

    if dimension == "attributes":
        net.key_for(attribute_names(values[0]), spawn(rng, "warmup"))
        for rep in range(reps):
            for point, count in enumerate(values):
                attrs = attribute_names(count)
                sub = spawn(rng, f"attr-{count}-{rep}")
                _, micros = _timed(lambda: net.key_for(attrs, sub))
                emit(point, 0, "keygen", n, count, 0, 0, 0, rep, micros)
        return ordered()

    def cases():
        read_attrs = attribute_names(d["read_attributes"])
        if dimension == "nodes":
            for x in values:
                attrs = attribute_names(x)
                yield "", [PrivilegeTree(0, "read", grouped_tree(x, attrs))], attrs, d["filesize"]
        elif dimension == "filesize":
            tree = PrivilegeTree(0, "read", Gate(len(read_attrs), tuple(_leaves(read_attrs))))
            for size in values:
                yield "", [tree], read_attrs, size
        elif dimension == "trees":
            for r in values:
                trees = [PrivilegeTree(0, "read", Gate(len(read_attrs), tuple(_leaves(read_attrs))))]
                for p in range(1, r):
                    trees.append(PrivilegeTree(p, f"op{p}", grouped_tree(6, read_attrs[p % 15:])))
                yield "", trees, read_attrs, d["filesize"]
        else:
            attrs = attribute_names(16)
            for name in values:
                if name not in SHAPES:
                    raise ValueError(f"unknown shape {name!r}")
                yield "@" + name, [PrivilegeTree(0, "read", shape_tree(name, attrs))], attrs, d["filesize"]

    prepared = []
    for suffix, trees, attrs, size in cases():
        x, k = tree_stats(trees)
        leaves = len({leaf.attribute for t in trees for _, leaf in iter_leaves(t)})
        sk = net.key_for(attrs, spawn(rng, "key"))
        payload = spawn(rng, "payload").randbytes(size)
        prepared.append((suffix, trees, payload, sk, x, k, leaves, size))
    if prepared:
        _, trees, payload, sk, *_ = prepared[0]
        decrypt_read(net.pk, sk, encrypt(net.pk, payload, trees, spawn(rng, "warmup"))[0])
    for rep in range(reps):
        for point, (suffix, trees, payload, sk, x, k, leaves, size) in enumerate(prepared):
            sub = spawn(rng, f"{dimension}-{x}-{size}-{rep}")
            (ct, _, _), micros = _timed(lambda: encrypt(net.pk, payload, trees, sub))
            emit(point, 0, "encrypt" + suffix, n, leaves, x, k, size, rep, micros)
            out, micros = _timed(lambda: decrypt_read(net.pk, sk, ct))
            if out != payload:
                raise AssertionError("benchmark round-trip failed")
            emit(point, 1, "decrypt" + suffix, n, leaves, x, k, size, rep, micros)
    return ordered()


def write_csv(records, fh=None):
    """Write records with the fixed header; returns the text when ``fh`` is None."""
    own = fh is None
    fh = io.StringIO() if own else fh
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rec in records:
        w.writerow(astuple(rec))
    return fh.getvalue() if own else None


def read_csv(fh):
    reader = csv.reader(fh)
    header = tuple(next(reader))
    if header != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    types = [f.type for f in fields(BenchRecord)]
    return [BenchRecord(*(t(v) for t, v in zip(types, row))) for row in reader]


def medians(records, op, key):
    """{key(record): median micros} over the records of ``op``."""
    groups = {}
    for rec in records:
        if rec.op == op:
            groups.setdefault(key(rec), []).append(rec.micros)
    return {k: statistics.median(v) for k, v in sorted(groups.items())}


def linear_fit(xs, ys):
    """Least squares ``y = slope * x + intercept``; returns (slope, intercept, r2)."""
    xs = [float(x) for x in xs]
    ys = [float(y) for y in ys]
    slope, intercept = statistics.linear_regression(xs, ys)
    r = statistics.correlation(xs, ys)
    return slope, intercept, r * r
