"""Group elements and the symmetric pairing.

G0 is the order-p subgroup of E(F_q) for ``E: y^2 = x^3 + x``; points are
kept in affine coordinates (gmpy2 makes inversion cheap enough that
projective formulas buy nothing in Python). GT is the order-p subgroup of
``F_{q^2}^*``, stored as ``(re, im)`` pairs for ``re + im*i`` with
``i^2 = -1``.

The public API speaks multiplicative notation: ``a * b`` is the group law,
``a ** k`` exponentiation and ``a / b`` division, for both G0 and GT.
"""

import functools
import hashlib

from gmpy2 import invert, mpz

__all__ = [
    "InvalidElementError",
    "G0Element",
    "GTElement",
    "pairing",
    "pairing_product",
    "hash_to_group",
    "clear_hash_cache",
    "generator",
    "gt_generator",
]


class InvalidElementError(ValueError):
    """Raised when bytes or coordinates do not describe a subgroup element."""


# ---------------------------------------------------------------------------
# F_q^2 arithmetic on (re, im) tuples

def _f2_mul(u, v, q):
    a, b = u
    c, d = v
    t0 = a * c
    t1 = b * d
    return ((t0 - t1) % q, ((a + b) * (c + d) - t0 - t1) % q)


def _f2_sqr(u, q):
    a, b = u
    return ((a + b) * (a - b) % q, 2 * a * b % q)


def _f2_conj(u, q):
    return (u[0], -u[1] % q)


def _f2_inv(u, q):
    a, b = u
    n = invert((a * a + b * b) % q, q)
    return (a * n % q, -b * n % q)


def _f2_pow(u, k, q):
    """Left-to-right 4-bit fixed window exponentiation, k >= 0."""
    if k == 0:
        return (mpz(1), mpz(0))
    table = [(mpz(1), mpz(0)), u]
    for _ in range(14):
        table.append(_f2_mul(table[-1], u, q))
    acc = None
    nibbles = (k.bit_length() + 3) // 4
    for pos in range(nibbles - 1, -1, -1):
        if acc is not None:
            for _ in range(4):
                acc = _f2_sqr(acc, q)
        d = (k >> (4 * pos)) & 0xF
        if d:
            acc = table[d] if acc is None else _f2_mul(acc, table[d], q)
        elif acc is None:
            acc = table[0]
    return acc


# ---------------------------------------------------------------------------
# Affine point arithmetic; ``None`` is the point at infinity.

def _on_curve(pt, q):
    x, y = pt
    return (y * y - x * x * x - x) % q == 0


def _neg(pt, q):
    if pt is None:
        return None
    return (pt[0], -pt[1] % q)


def _double(pt, q):
    if pt is None:
        return None
    x, y = pt
    if y == 0:
        return None
    lam = (3 * x * x + 1) * invert(2 * y, q) % q
    x3 = (lam * lam - 2 * x) % q
    return (x3, (lam * (x - x3) - y) % q)


def _add(p1, p2, q):
    if p1 is None:
        return p2
    if p2 is None:
        return p1
    x1, y1 = p1
    x2, y2 = p2
    if x1 == x2:
        if (y1 + y2) % q == 0:
            return None
        return _double(p1, q)
    lam = (y2 - y1) * invert(x2 - x1, q) % q
    x3 = (lam * lam - x1 - x2) % q
    return (x3, (lam * (x1 - x3) - y1) % q)


def _wnaf(k, width=4):
    digits = []
    full = 1 << width
    half = 1 << (width - 1)
    while k:
        if k & 1:
            d = k & (full - 1)
            if d >= half:
                d -= full
            k -= d
        else:
            d = 0
        digits.append(d)
        k >>= 1
    return digits


def _mul(pt, k, q):
    """Scalar multiplication k*pt for k >= 0 using width-4 NAF."""
    if pt is None or k == 0:
        return None
    twice = _double(pt, q)
    odd = [pt]
    for _ in range(3):
        odd.append(_add(odd[-1], twice, q))
    acc = None
    for d in reversed(_wnaf(k)):
        acc = _double(acc, q)
        if d > 0:
            acc = _add(acc, odd[d >> 1], q)
        elif d < 0:
            acc = _add(acc, _neg(odd[(-d) >> 1], q), q)
    return acc


def _sqrt(a, q):
    # q = 3 mod 4
    r = pow(a, (q + 1) // 4, q)
    return r if r * r % q == a % q else None


# ---------------------------------------------------------------------------
# Tate pairing

def _miller(P, Q, params):
    """Miller function f_{p-1,P} evaluated at the distorted image of Q.

    Vertical lines are dropped: at the distorted point their value lies
    in F_q and is erased by the final exponentiation. Iterating over p-1
    instead of p skips the final vertical addition line.
    """
    q = params._q
    xq = Q[0]
    yq = Q[1]
    xt, yt = P
    xp, yp = P
    f = (mpz(1), mpz(0))
    n = params._p - 1
    for bit in bin(n)[3:]:
        lam = (3 * xt * xt + 1) * invert(2 * yt, q) % q
        # line value lam*(x_Q + x_T) - y_T + i*y_Q
        f = _f2_sqr(f, q)
        f = _f2_mul(f, ((lam * (xq + xt) - yt) % q, yq), q)
        x3 = (lam * lam - 2 * xt) % q
        yt = (lam * (xt - x3) - yt) % q
        xt = x3
        if bit == "1":
            lam = (yp - yt) * invert(xp - xt, q) % q
            f = _f2_mul(f, ((lam * (xq + xt) - yt) % q, yq), q)
            x3 = (lam * lam - xt - xp) % q
            yt = (lam * (xt - x3) - yt) % q
            xt = x3
    return f


def _final_exp(f, params):
    q = params._q
    # f^(q-1) = conj(f) / f = conj(f)^2 / norm(f)
    a, b = f
    n = invert((a * a + b * b) % q, q)
    c = _f2_sqr(_f2_conj(f, q), q)
    g = (c[0] * n % q, c[1] * n % q)
    return _f2_pow(g, (q + 1) // params._p, q)


class G0Element:
    """Element of the order-p subgroup of E(F_q)."""

    __slots__ = ("params", "point")

    def __init__(self, params, point, check=True):
        if point is not None:
            point = (mpz(point[0]) % params._q, mpz(point[1]) % params._q)
            if check and not _on_curve(point, params._q):
                raise InvalidElementError("point is not on the curve")
            if check and _mul(point, params._p, params._q) is not None:
                raise InvalidElementError("point is not in the order-p subgroup")
        self.params = params
        self.point = point

    @classmethod
    def identity(cls, params):
        return cls(params, None, check=False)

    def is_identity(self):
        return self.point is None

    def _same(self, other):
        if not isinstance(other, G0Element):
            return NotImplemented
        if other.params != self.params:
            raise ValueError("elements from different parameter sets")
        return True

    def __mul__(self, other):
        if self._same(other) is NotImplemented:
            return NotImplemented
        return G0Element(self.params, _add(self.point, other.point, self.params._q), check=False)

    def __truediv__(self, other):
        if self._same(other) is NotImplemented:
            return NotImplemented
        q = self.params._q
        return G0Element(self.params, _add(self.point, _neg(other.point, q), q), check=False)

    def __pow__(self, k):
        k = int(k) % self.params.p
        return G0Element(self.params, _mul(self.point, k, self.params._q), check=False)

    def inverse(self):
        return G0Element(self.params, _neg(self.point, self.params._q), check=False)

    def __eq__(self, other):
        if not isinstance(other, G0Element):
            return NotImplemented
        return self.params == other.params and self.point == other.point

    def __hash__(self):
        return hash(("G0", self.point))

    def __repr__(self):
        if self.point is None:
            return "G0Element(identity)"
        return f"G0Element(x=0x{int(self.point[0]):x})"

    # x || flag, flag: 0 even y, 1 odd y, 2 infinity
    def to_bytes(self):
        n = self.params.field_bytes
        if self.point is None:
            return bytes(n) + b"\x02"
        x, y = self.point
        return int(x).to_bytes(n, "big") + bytes([int(y) & 1])

    @classmethod
    def from_bytes(cls, params, data):
        n = params.field_bytes
        if len(data) != n + 1:
            raise InvalidElementError(f"G0 encoding must be {n + 1} bytes, got {len(data)}")
        flag = data[-1]
        x = int.from_bytes(data[:n], "big")
        if flag == 2:
            if x:
                raise InvalidElementError("non-canonical infinity encoding")
            return cls.identity(params)
        if flag > 1 or x >= params.q:
            raise InvalidElementError("malformed G0 encoding")
        q = params._q
        x = mpz(x)
        y = _sqrt((x * x * x + x) % q, q)
        if y is None:
            raise InvalidElementError("x is not the abscissa of a curve point")
        if int(y) & 1 != flag:
            y = -y % q
        return cls(params, (x, y))


class GTElement:
    """Element of the order-p subgroup of F_{q^2}^*."""

    __slots__ = ("params", "value")

    def __init__(self, params, value, check=True):
        q = params._q
        value = (mpz(value[0]) % q, mpz(value[1]) % q)
        if check and _f2_pow(value, params.p, q) != (1, 0):
            raise InvalidElementError("value is not in the order-p subgroup of GT")
        self.params = params
        self.value = value

    @classmethod
    def identity(cls, params):
        return cls(params, (1, 0), check=False)

    def is_identity(self):
        return self.value == (1, 0)

    def _same(self, other):
        if not isinstance(other, GTElement):
            return False
        if other.params != self.params:
            raise ValueError("elements from different parameter sets")
        return True

    def __mul__(self, other):
        if not self._same(other):
            return NotImplemented
        return GTElement(self.params, _f2_mul(self.value, other.value, self.params._q), check=False)

    def __truediv__(self, other):
        if not self._same(other):
            return NotImplemented
        # unitary: inverse is the conjugate
        q = self.params._q
        return GTElement(self.params, _f2_mul(self.value, _f2_conj(other.value, q), q), check=False)

    def __pow__(self, k):
        k = int(k) % self.params.p
        return GTElement(self.params, _f2_pow(self.value, k, self.params._q), check=False)

    def inverse(self):
        return GTElement(self.params, _f2_conj(self.value, self.params._q), check=False)

    def __eq__(self, other):
        if not isinstance(other, GTElement):
            return NotImplemented
        return self.params == other.params and self.value == other.value

    def __hash__(self):
        return hash(("GT", self.value))

    def __repr__(self):
        return f"GTElement(0x{int(self.value[0]):x} + 0x{int(self.value[1]):x}i)"

    def to_bytes(self):
        n = self.params.field_bytes
        return int(self.value[0]).to_bytes(n, "big") + int(self.value[1]).to_bytes(n, "big")

    @classmethod
    def from_bytes(cls, params, data):
        n = params.field_bytes
        if len(data) != 2 * n:
            raise InvalidElementError(f"GT encoding must be {2 * n} bytes, got {len(data)}")
        a = int.from_bytes(data[:n], "big")
        b = int.from_bytes(data[n:], "big")
        if a >= params.q or b >= params.q:
            raise InvalidElementError("GT coordinate out of range")
        return cls(params, (a, b))


def generator(params):
    return _generator(params)


@functools.lru_cache(maxsize=None)
def _generator(params):
    return G0Element(params, (params.gx, params.gy))


def gt_generator(params):
    """e(g, g)."""
    return _gt_generator(params)


@functools.lru_cache(maxsize=None)
def _gt_generator(params):
    g = generator(params)
    return pairing(g, g)


def _check_pair(a, b):
    if not isinstance(a, G0Element) or not isinstance(b, G0Element):
        raise InvalidElementError("pairing inputs must be G0 elements")
    if a.params != b.params:
        raise InvalidElementError("pairing inputs use different parameter sets")


def pairing(a, b):
    """Symmetric pairing e(a, b) = Tate(a, distort(b))."""
    return pairing_product([(a, b)])


def pairing_product(pairs):
    """Product of pairings sharing a single final exponentiation."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("empty pairing product")
    params = pairs[0][0].params
    q = params._q
    f = (mpz(1), mpz(0))
    for a, b in pairs:
        _check_pair(a, b)
        if a.params != params:
            raise InvalidElementError("pairing inputs use different parameter sets")
        if a.point is None or b.point is None:
            continue
        f = _f2_mul(f, _miller(a.point, b.point, params), q)
    return GTElement(params, _final_exp(f, params), check=False)


@functools.lru_cache(maxsize=4096)
def _hash_point(params, data):
    q = params._q
    n = params.field_bytes + 16
    counter = 0
    while True:
        digest = hashlib.shake_256(
            b"anonyabe-h2g" + counter.to_bytes(4, "big") + data
        ).digest(n + 1)
        counter += 1
        x = mpz(int.from_bytes(digest[:n], "big")) % q
        rhs = (x * x * x + x) % q
        if rhs == 0:
            continue
        y = _sqrt(rhs, q)
        if y is None:
            continue
        if int(y) & 1 != digest[n] & 1:
            y = -y % q
        pt = _mul((x, y), params.cofactor, q)
        if pt is not None:
            return pt


def hash_to_group(params, data):
    """Map arbitrary bytes to G0 by try-and-increment.

    Deterministic: the same input always lands on the same element.
    """
    if isinstance(data, str):
        data = data.encode()
    return G0Element(params, _hash_point(params, bytes(data)), check=False)


def clear_hash_cache():
    """Forget memoized hash_to_group results (benchmarks time a cold cache)."""
    _hash_point.cache_clear()
