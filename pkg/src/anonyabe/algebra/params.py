"""Curve presets for the symmetric pairing.

Both presets use the supersingular curve ``y^2 = x^3 + x`` over ``F_q`` with
``q = 3 (mod 4)``. The curve has ``q + 1`` points, embedding degree 2, and
the distortion map ``(x, y) -> (-x, i*y)`` into ``F_{q^2} = F_q[i]/(i^2+1)``
turns the reduced Tate pairing into a symmetric bilinear map on the order-p
subgroup.

``demo`` (512-bit q, 160-bit p) is sized like the classic type-A pairing
parameters. It is functional but below modern security margins; do not use
it to protect real data. ``toy`` is small enough for exhaustive
discrete-log oracles in tests.
"""

import os
from dataclasses import dataclass, field

from gmpy2 import mpz

__all__ = ["PairingParams", "TOY", "DEMO", "PRESETS", "get_preset", "preset_by_id", "default_preset_name"]

PRESET_ENV = "ANONYABE_PRESET"


@dataclass(frozen=True)
class PairingParams:
    name: str
    preset_id: int
    q: int
    p: int
    cofactor: int
    gx: int
    gy: int
    a: int = 1
    b: int = 0
    embedding_degree: int = 2
    # mpz copies used by the arithmetic; excluded from eq/repr
    _q: mpz = field(init=False, repr=False, compare=False)
    _p: mpz = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_q", mpz(self.q))
        object.__setattr__(self, "_p", mpz(self.p))

    @property
    def field_bytes(self):
        return (self.q.bit_length() + 7) // 8

    @property
    def scalar_bytes(self):
        return (self.p.bit_length() + 7) // 8

    def __hash__(self):
        return hash((self.name, self.q, self.p))


# Generators: smallest x >= 1 on the curve, even root y, times the cofactor.
TOY = PairingParams(
    name="toy",
    preset_id=1,
    q=5431,
    p=97,
    cofactor=56,
    gx=1369,
    gy=4710,
)

_DEMO_P = 2**159 + 2**135 + 1

DEMO = PairingParams(
    name="demo",
    preset_id=2,
    q=0x800000000000000000000000000000000000000000000000000000000000000000000000000000000000018700757D000800FFF5FF000C00FFF1FF041000F6FB,
    p=_DEMO_P,
    cofactor=0xFFFFFF000000FFFFFF000000FFFFFF000000FFFDFF000400FFF9FF000800FFF5FF000C00FFF1FF041000F6FC,
    gx=0x768B5B24AB3116E12F7E227268A232CC93796C715FC70C2A38E5419A13B88F7755E98813BE544BE6F47F1B11DC05381D4570B1569F1E38C63862129CC6EF72C7,
    gy=0x17F2E0A0C2319846DE377923BCFDE296F6CF84BD2FA84BAE3B9EE4CC511F727697466E50319FB2E9ABA1F0263291A75D780F267A30002607298EB14747C61453,
)

PRESETS = {TOY.name: TOY, DEMO.name: DEMO}
_BY_ID = {params.preset_id: params for params in PRESETS.values()}


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def preset_by_id(preset_id):
    try:
        return _BY_ID[preset_id]
    except KeyError:
        raise ValueError(f"unknown preset id {preset_id}") from None


def default_preset_name():
    """Preset named by $ANONYABE_PRESET, falling back to ``demo``."""
    return os.environ.get(PRESET_ENV, DEMO.name)
