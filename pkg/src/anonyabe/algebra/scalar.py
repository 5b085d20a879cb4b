"""Scalars of Z_p.

Scalars are plain Python ints reduced into ``[0, p)``; these helpers cover
sampling, Lagrange coefficients and the fixed-width wire encoding.
"""

__all__ = ["random_scalar", "lagrange_coeff", "scalar_to_bytes", "scalar_from_bytes"]


def random_scalar(params, rng, nonzero=False):
    """Uniform element of Z_p (of Z_p^* when ``nonzero``)."""
    if nonzero:
        return rng.randrange(1, params.p)
    return rng.randrange(params.p)


def lagrange_coeff(i, S, x, p):
    """Lagrange basis polynomial for ``i`` over the point set ``S``, at ``x``.

    Returns prod_{j in S, j != i} (x - j) / (i - j) mod p.
    """
    points = [j % p for j in S]
    if len(set(points)) != len(points):
        raise ValueError("interpolation points must be pairwise distinct")
    i %= p
    if i not in points:
        raise ValueError("i must be one of the interpolation points")
    num = 1
    den = 1
    for j in points:
        if j == i:
            continue
        num = num * (x - j) % p
        den = den * (i - j) % p
    return num * pow(den, -1, p) % p


def scalar_to_bytes(params, value):
    if not 0 <= value < params.p:
        raise ValueError("scalar out of range")
    return value.to_bytes(params.scalar_bytes, "big")


def scalar_from_bytes(params, data):
    if len(data) != params.scalar_bytes:
        raise ValueError(f"scalar encoding must be {params.scalar_bytes} bytes")
    value = int.from_bytes(data, "big")
    if value >= params.p:
        raise ValueError("scalar out of range")
    return value
