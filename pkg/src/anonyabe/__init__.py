"""Multi-authority CP-ABE with per-operation privilege trees.

Subpackages and modules:

- ``algebra``: the pairing group, hashing onto it and scalars
- ``privtree``: privilege trees, the policy language and Shamir sharing
- ``scheme``: encryption, key merging, decryption and re-encryption
- ``authorities``: the simulated authority network
- ``formats`` and ``server``: file formats and the cloud-server store
- ``cli`` and ``bench``: command-line tools and the benchmark harness
"""

from .scheme import (
    Ciphertext,
    PayloadAuthError,
    PolicyNotSatisfied,
    PrivateKey,
    PrivilegeRefused,
    PublicKey,
    SchemeError,
    VerificationSet,
    decrypt_node,
    decrypt_read,
    derive_verification,
    encrypt,
    make_trees,
    reencrypt,
)

__version__ = "0.1.0"

__all__ = [
    "Ciphertext",
    "PayloadAuthError",
    "PolicyNotSatisfied",
    "PrivateKey",
    "PrivilegeRefused",
    "PublicKey",
    "SchemeError",
    "VerificationSet",
    "decrypt_node",
    "decrypt_read",
    "derive_verification",
    "encrypt",
    "make_trees",
    "reencrypt",
]
