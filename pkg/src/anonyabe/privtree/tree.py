"""Threshold-gate privilege trees."""

from dataclasses import dataclass

__all__ = [
    "Leaf",
    "Gate",
    "PrivilegeTree",
    "TreeError",
    "READ_LABEL",
    "REENCRYPT_LABEL",
    "satisfies",
    "iter_leaves",
    "iter_nodes",
    "node_at",
    "node_count",
    "path_str",
    "encode_node",
    "decode_node",
    "encode_tree",
    "decode_tree",
]

READ_LABEL = "read"
REENCRYPT_LABEL = "reencrypt"


class TreeError(ValueError):
    pass


@dataclass(frozen=True)
class Leaf:
    attribute: str

    def __post_init__(self):
        if not isinstance(self.attribute, str) or not self.attribute:
            raise TreeError("leaf attribute must be a non-empty string")


@dataclass(frozen=True)
class Gate:
    """k-of-n threshold gate; children are indexed 1..n in order."""

    threshold: int
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if not self.children:
            raise TreeError("gate needs at least one child")
        if not 0 < self.threshold <= len(self.children):
            raise TreeError(
                f"threshold {self.threshold} out of range for {len(self.children)} children"
            )
        for child in self.children:
            if not isinstance(child, (Leaf, Gate)):
                raise TreeError(f"invalid child node {child!r}")


@dataclass(frozen=True)
class PrivilegeTree:
    index: int
    label: str
    root: object

    def __post_init__(self):
        if self.index < 0:
            raise TreeError("privilege index must be non-negative")
        if self.index == 0 and self.label != READ_LABEL:
            raise TreeError("privilege 0 must be labelled 'read'")
        if not isinstance(self.root, (Leaf, Gate)):
            raise TreeError("tree root must be a Leaf or Gate")


def _root(tree):
    return tree.root if isinstance(tree, PrivilegeTree) else tree


def satisfies(tree, attrs):
    """True iff the attribute set satisfies ``tree`` (a PrivilegeTree or node).

    Children are counted node by node, so a gate with two leaves on the same
    attribute counts that attribute twice.
    """
    node = _root(tree)
    if isinstance(node, Leaf):
        return node.attribute in attrs
    count = 0
    for child in node.children:
        if satisfies(child, attrs):
            count += 1
            if count >= node.threshold:
                return True
    return False


def iter_nodes(tree, path=()):
    """Yield ``(path, node)`` in preorder; paths are 1-based child indices."""
    node = _root(tree)
    yield path, node
    if isinstance(node, Gate):
        for idx, child in enumerate(node.children, start=1):
            yield from iter_nodes(child, path + (idx,))


def iter_leaves(tree):
    for path, node in iter_nodes(tree):
        if isinstance(node, Leaf):
            yield path, node


def node_at(tree, path):
    node = _root(tree)
    for idx in path:
        if not isinstance(node, Gate) or not 1 <= idx <= len(node.children):
            raise TreeError(f"no node at path {path_str(path)!r}")
        node = node.children[idx - 1]
    return node


def node_count(tree):
    return sum(1 for _ in iter_nodes(tree))


def path_str(path):
    return ".".join(str(i) for i in path)


# ---------------------------------------------------------------------------
# binary codec: preorder, LEB128 varints, length-prefixed UTF-8 attributes

_LEAF, _GATE = 0, 1


def _put_varint(out, n):
    while True:
        byte = n & 0x7F
        n >>= 7
        if n:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return


def _get_varint(data, pos):
    shift = 0
    value = 0
    while True:
        if pos >= len(data):
            raise TreeError("truncated varint")
        byte = data[pos]
        pos += 1
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value, pos
        shift += 7
        if shift > 63:
            raise TreeError("varint too long")


def _put_str(out, text):
    raw = text.encode()
    _put_varint(out, len(raw))
    out += raw


def _get_str(data, pos):
    n, pos = _get_varint(data, pos)
    if pos + n > len(data):
        raise TreeError("truncated string")
    try:
        return data[pos:pos + n].decode(), pos + n
    except UnicodeDecodeError as exc:
        raise TreeError("attribute is not valid UTF-8") from exc


def _encode_into(out, node):
    if isinstance(node, Leaf):
        out.append(_LEAF)
        _put_str(out, node.attribute)
    else:
        out.append(_GATE)
        _put_varint(out, node.threshold)
        _put_varint(out, len(node.children))
        for child in node.children:
            _encode_into(out, child)


def _decode_from(data, pos, depth=0):
    if depth > 256:
        raise TreeError("tree nesting too deep")
    if pos >= len(data):
        raise TreeError("truncated tree")
    tag = data[pos]
    pos += 1
    if tag == _LEAF:
        attr, pos = _get_str(data, pos)
        return Leaf(attr), pos
    if tag == _GATE:
        k, pos = _get_varint(data, pos)
        n, pos = _get_varint(data, pos)
        children = []
        for _ in range(n):
            child, pos = _decode_from(data, pos, depth + 1)
            children.append(child)
        return Gate(k, tuple(children)), pos
    raise TreeError(f"unknown node tag {tag}")


def encode_node(node):
    out = bytearray()
    _encode_into(out, node)
    return bytes(out)


def decode_node(data, pos=0):
    """Decode one node starting at ``pos``; returns ``(node, next_pos)``."""
    return _decode_from(data, pos)


def encode_tree(tree):
    out = bytearray()
    _put_varint(out, tree.index)
    _put_str(out, tree.label)
    _encode_into(out, tree.root)
    return bytes(out)


def decode_tree(data, pos=0):
    index, pos = _get_varint(data, pos)
    label, pos = _get_str(data, pos)
    root, pos = _decode_from(data, pos)
    return PrivilegeTree(index, label, root), pos
