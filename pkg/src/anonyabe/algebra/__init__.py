"""Pairing-group arithmetic: G0, GT, the pairing, hashing and scalars."""

from .group import (
    G0Element,
    GTElement,
    InvalidElementError,
    clear_hash_cache,
    generator,
    gt_generator,
    hash_to_group,
    pairing,
    pairing_product,
)
from .params import DEMO, PRESETS, TOY, PairingParams, default_preset_name, get_preset, preset_by_id
from .rng import SeededRandom, spawn, system_rng
from .scalar import lagrange_coeff, random_scalar, scalar_from_bytes, scalar_to_bytes

__all__ = [
    "G0Element",
    "GTElement",
    "InvalidElementError",
    "clear_hash_cache",
    "generator",
    "gt_generator",
    "hash_to_group",
    "pairing",
    "pairing_product",
    "DEMO",
    "PRESETS",
    "TOY",
    "PairingParams",
    "default_preset_name",
    "get_preset",
    "preset_by_id",
    "SeededRandom",
    "spawn",
    "system_rng",
    "lagrange_coeff",
    "random_scalar",
    "scalar_from_bytes",
    "scalar_to_bytes",
]
