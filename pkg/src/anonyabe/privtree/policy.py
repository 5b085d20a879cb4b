"""Textual policy language.

Grammar (``and`` binds tighter than ``or``; keywords are case-insensitive)::

    expr    := conj ("or" conj)*
    conj    := primary ("and" primary)*
    primary := "(" expr ")"
             | INT "of" "(" expr ("," expr)* ")"
             | ATTR

``ATTR`` is a bare word such as ``Sex:Male`` or a double-quoted string
(``"University:Tsinghua University"``) with ``\\"`` and ``\\\\`` escapes.
A chain ``a and b and c`` becomes a single 3-of-3 gate, a chain of ``or``
a single 1-of-n gate.
"""

import re

from .tree import Gate, Leaf, TreeError

__all__ = ["PolicySyntaxError", "parse_policy", "render_policy"]

_KEYWORDS = {"and", "or", "of"}
_TOKEN = re.compile(
    r"""\s*(?:
        (?P<lparen>\() |
        (?P<rparen>\)) |
        (?P<comma>,) |
        (?P<quoted>"(?:[^"\\]|\\.)*") |
        (?P<word>[^\s(),"]+)
    )""",
    re.VERBOSE,
)
_BARE_SAFE = re.compile(r'[^\s(),"\\]+')


class PolicySyntaxError(TreeError):
    """Malformed policy text; ``position`` is a 0-based character offset."""

    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


def _tokenize(text):
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise PolicySyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        value = m.group(kind)
        if kind == "quoted":
            value = re.sub(r"\\(.)", r"\1", value[1:-1])
            if not value:
                raise PolicySyntaxError("empty quoted attribute", start)
        elif kind == "word" and value.lower() in _KEYWORDS:
            kind = value.lower()
        tokens.append((kind, value, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self, offset=0):
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def take(self, kind):
        tok = self.peek()
        if tok[0] != kind:
            shown = "end of input" if tok[0] == "end" else repr(tok[1])
            raise PolicySyntaxError(f"expected {kind}, found {shown}", tok[2])
        self.i += 1
        return tok

    def expr(self):
        items = [self.conj()]
        while self.peek()[0] == "or":
            self.i += 1
            items.append(self.conj())
        return items[0] if len(items) == 1 else Gate(1, tuple(items))

    def conj(self):
        items = [self.primary()]
        while self.peek()[0] == "and":
            self.i += 1
            items.append(self.primary())
        return items[0] if len(items) == 1 else Gate(len(items), tuple(items))

    def primary(self):
        kind, value, pos = self.peek()
        if kind == "lparen":
            self.i += 1
            node = self.expr()
            self.take("rparen")
            return node
        if kind == "word" and value.isdigit() and self.peek(1)[0] == "of":
            self.i += 2
            self.take("lparen")
            children = [self.expr()]
            while self.peek()[0] == "comma":
                self.i += 1
                children.append(self.expr())
            self.take("rparen")
            k = int(value)
            if not 0 < k <= len(children):
                raise PolicySyntaxError(
                    f"threshold {k} out of range for {len(children)} children", pos
                )
            return Gate(k, tuple(children))
        if kind in ("word", "quoted"):
            self.i += 1
            return Leaf(value)
        shown = "end of input" if kind == "end" else repr(value)
        raise PolicySyntaxError(f"expected attribute or '(', found {shown}", pos)


def parse_policy(text):
    """Parse policy text into a tree of :class:`Leaf` / :class:`Gate` nodes."""
    parser = _Parser(text)
    node = parser.expr()
    parser.take("end")
    return node


def _render_attr(attr):
    if _BARE_SAFE.fullmatch(attr) and attr.lower() not in _KEYWORDS and not attr.isdigit():
        return attr
    return '"' + attr.replace("\\", "\\\\").replace('"', '\\"') + '"'


def render_policy(node, _top=True):
    """Inverse of :func:`parse_policy` up to whitespace."""
    if isinstance(node, Leaf):
        return _render_attr(node.attribute)
    parts = [render_policy(child, False) for child in node.children]
    n = len(parts)
    if n >= 2 and node.threshold == n:
        body = " and ".join(parts)
    elif n >= 2 and node.threshold == 1:
        body = " or ".join(parts)
    else:
        return f"{node.threshold} of ({', '.join(parts)})"
    return body if _top else f"({body})"
