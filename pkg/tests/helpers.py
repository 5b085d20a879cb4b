"""Shared builders for the test suite."""

from dataclasses import dataclass

from anonyabe.algebra import GTElement, SeededRandom, pairing
from anonyabe.algebra.scalar import lagrange_coeff
from anonyabe.algebra.group import pairing_product
from anonyabe.authorities import AuthorityConfig, issue_key, make_request, run_setup
from anonyabe.privtree import Gate, Leaf, iter_leaves, satisfies


@dataclass
class Network:
    config: object
    pk: object
    states: list
    transcript: object

    @property
    def params(self):
        return self.pk.params

    def key(self, attrs, seed=0, log=None, escrow=None):
        rng = SeededRandom(f"key-{seed}")
        request = make_request(self.config, f"gid-{seed}", list(attrs), rng)
        return issue_key(self.states, request, rng, log=log, escrow=escrow)


def network(params, n=3, cluster_size=None, seed=0, categories=None):
    if categories is None:
        config = AuthorityConfig.with_default_partition(n, cluster_size)
    else:
        config = AuthorityConfig.with_default_partition(n, cluster_size, categories)
    pk, states, transcript = run_setup(config, params, SeededRandom(f"net-{seed}"))
    return Network(config, pk, states, transcript)


def universe(config, count):
    """``count`` attributes spread round-robin over the configured categories."""
    cats = sorted(c for cs in config.partition.values() for c in cs)
    return [f"{cats[i % len(cats)]}:v{i}" for i in range(count)]


def random_tree(rng, attrs, max_nodes=32, max_children=4):
    """Random threshold tree over ``attrs`` with at most ``max_nodes`` nodes."""
    budget = [max_nodes - 1]

    def build(depth):
        if depth >= 4 or budget[0] < 2 or rng.random() < 0.35:
            return Leaf(rng.choice(attrs))
        n = rng.randint(1, min(max_children, budget[0]))
        budget[0] -= n
        children = tuple(build(depth + 1) for _ in range(n))
        return Gate(rng.randint(1, n), children)

    if max_nodes == 1:
        return Leaf(rng.choice(attrs))
    n = rng.randint(min(2, budget[0]), min(max_children, budget[0]))
    budget[0] -= n
    return Gate(rng.randint(1, n), tuple(build(1) for _ in range(n)))


def tree_attributes(node):
    return sorted({leaf.attribute for _, leaf in iter_leaves(node)})


def minimal_satisfying(node, rng):
    """A minimal satisfying set, found by random greedy removal."""
    current = set(tree_attributes(node))
    order = sorted(current)
    rng.shuffle(order)
    for attr in order:
        if satisfies(node, current - {attr}):
            current.discard(attr)
    return current


def maximal_failing(node, pool, rng):
    """A maximal subset of ``pool`` that does not satisfy ``node``."""
    current = set()
    order = list(pool)
    rng.shuffle(order)
    for attr in order:
        if not satisfies(node, current | {attr}):
            current.add(attr)
    return current


def forged_token(ct, sk, index):
    """What a key that fails tree ``index`` computes if it ignores thresholds:
    interpolate over whatever children it can evaluate."""
    params = sk.D.params
    p = params.p
    table = ct.leaf_components[index]

    def walk(path, node):
        if isinstance(node, Leaf):
            comp = sk.components.get(node.attribute)
            if comp is None:
                return None
            C, C2 = table[path]
            return pairing_product([(comp[0], C), (comp[1].inverse(), C2)])
        vals = [walk(path + (i,), c) for i, c in enumerate(node.children, start=1)]
        idx = [i for i, v in enumerate(vals, start=1) if v is not None]
        if not idx:
            return None
        F = GTElement.identity(params)
        for i in idx:
            F = F * vals[i - 1] ** lagrange_coeff(i, idx, 0, p)
        return F

    A = walk((), ct.trees[index].root)
    if A is None:
        A = GTElement.identity(params)
    return pairing(ct.root_commitments[index], sk.D) / A
