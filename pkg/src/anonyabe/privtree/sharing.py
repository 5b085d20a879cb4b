"""Shamir sharing of a secret down a privilege tree."""

from dataclasses import dataclass

from ..algebra.scalar import lagrange_coeff
from .tree import Leaf, PrivilegeTree

__all__ = ["ShareMap", "assign_shares", "recover_secret", "recover_in_clear", "satisfied_subset"]


@dataclass(frozen=True)
class ShareMap:
    """Leaf constants q_leaf(0), keyed by root-to-leaf index path."""

    secret: int
    shares: dict


def _eval(coeffs, x, p):
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % p
    return acc


def assign_shares(tree, secret, p, rng):
    """Top-down share assignment.

    Each gate with threshold k gets a random degree-(k-1) polynomial whose
    constant term is the value handed down by its parent; child number i
    receives the polynomial evaluated at i.
    """
    node = tree.root if isinstance(tree, PrivilegeTree) else tree
    shares = {}
    stack = [((), node, secret % p)]
    while stack:
        path, node, value = stack.pop()
        if isinstance(node, Leaf):
            shares[path] = value
            continue
        coeffs = [value] + [rng.randrange(p) for _ in range(node.threshold - 1)]
        for idx in range(len(node.children), 0, -1):
            stack.append((path + (idx,), node.children[idx - 1], _eval(coeffs, idx, p)))
    return ShareMap(secret % p, shares)


def recover_secret(points, p):
    """Interpolate f(0) from ``(index, share)`` pairs."""
    points = list(points)
    indices = [i for i, _ in points]
    if len(set(indices)) != len(indices):
        raise ValueError("duplicate share index")
    if not points:
        raise ValueError("no shares given")
    return sum(s * lagrange_coeff(i, indices, 0, p) for i, s in points) % p


def satisfied_subset(flags, k):
    """1-based indices of the first ``k`` true entries, or None.

    The first k satisfied children form the lexicographically smallest
    satisfying subset, which keeps decryption deterministic.
    """
    chosen = [i for i, ok in enumerate(flags, start=1) if ok][:k]
    return chosen if len(chosen) == k else None


def recover_in_clear(tree, shares, attrs, p):
    """Recover the root secret from leaf shares held for ``attrs``.

    Mirrors the in-exponent decryption recursion; returns None when the
    attribute set does not satisfy the tree.
    """
    node = tree.root if isinstance(tree, PrivilegeTree) else tree

    def walk(path, node):
        if isinstance(node, Leaf):
            return shares.shares[path] if node.attribute in attrs else None
        values = [walk(path + (i,), child) for i, child in enumerate(node.children, start=1)]
        chosen = satisfied_subset([v is not None for v in values], node.threshold)
        if chosen is None:
            return None
        return recover_secret([(i, values[i - 1]) for i in chosen], p)

    return walk((), node)
