"""Privilege trees: structure, policy language, satisfaction and sharing."""

from .policy import PolicySyntaxError, parse_policy, render_policy
from .sharing import ShareMap, assign_shares, recover_in_clear, recover_secret, satisfied_subset
from .tree import (
    READ_LABEL,
    REENCRYPT_LABEL,
    Gate,
    Leaf,
    PrivilegeTree,
    TreeError,
    decode_node,
    decode_tree,
    encode_node,
    encode_tree,
    iter_leaves,
    iter_nodes,
    node_at,
    node_count,
    path_str,
    satisfies,
)

__all__ = [
    "PolicySyntaxError",
    "parse_policy",
    "render_policy",
    "ShareMap",
    "assign_shares",
    "recover_in_clear",
    "recover_secret",
    "satisfied_subset",
    "READ_LABEL",
    "REENCRYPT_LABEL",
    "Gate",
    "Leaf",
    "PrivilegeTree",
    "TreeError",
    "decode_node",
    "decode_tree",
    "encode_node",
    "encode_tree",
    "iter_leaves",
    "iter_nodes",
    "node_at",
    "node_count",
    "path_str",
    "satisfies",
]
