"""Node roles, the channel-initiation permission relation, and the two stock
architectures (client-server and peer-to-peer).

An architecture is a mapping actor-id -> role set, fixed for the whole
simulation. Roles only gate who may *initiate* a channel; once open, traffic
is bidirectional, so the permission check applies to the initiator side only.
"""
from __future__ import annotations

from enum import Enum

from .errors import DuplicateId, EmptyArchitecture


class Role(Enum):
    CLIENT = "client"
    AGGREGATOR = "aggregator"
    SERVER = "server"


RoleSet = frozenset  # nonempty frozenset of Role values
Actors = dict  # actor-id (str) -> RoleSet

CLIENT_ONLY: RoleSet = frozenset({Role.CLIENT})
SERVER_AGGREGATOR: RoleSet = frozenset({Role.SERVER, Role.AGGREGATOR})
ALL_ROLES: RoleSet = frozenset(Role)

# (initiator role, receiver role) pairs that may open a channel. Clients
# initiate nothing; aggregators reach peers and servers; servers reach peers
# and clients.
ALLOWED_PAIRS = frozenset({
    (Role.SERVER, Role.SERVER),
    (Role.SERVER, Role.CLIENT),
    (Role.AGGREGATOR, Role.AGGREGATOR),
    (Role.AGGREGATOR, Role.SERVER),
})


def can_initiate(src: RoleSet, dst: RoleSet) -> bool:
    """True iff some role of src may open a channel to some role of dst."""
    return any((a, b) in ALLOWED_PAIRS for a in src for b in dst)


def role_names(roles: RoleSet) -> str:
    return "{" + ",".join(sorted(r.value for r in roles)) + "}"


def client_server_architecture(client_ids, server_id: str) -> Actors:
    """Clients plus one server-aggregator under ``server_id``."""
    ids = [str(i) for i in client_ids]
    if len(set(ids)) != len(ids):
        raise DuplicateId("client ids must be distinct")
    server_id = str(server_id)
    if server_id in ids:
        raise DuplicateId(f"server id {server_id!r} collides with a client id")
    actors: Actors = {cid: CLIENT_ONLY for cid in ids}
    actors[server_id] = SERVER_AGGREGATOR
    return actors


def p2p_architecture(node_ids) -> Actors:
    """Every node holds all three roles; no central authority."""
    ids = [str(i) for i in node_ids]
    if not ids:
        raise EmptyArchitecture("a peer-to-peer architecture needs at least one node")
    if len(set(ids)) != len(ids):
        raise DuplicateId("node ids must be distinct")
    return {nid: ALL_ROLES for nid in ids}
