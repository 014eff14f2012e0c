"""Poisoning attacks injectable into a federated run.

label_flip remaps attacker training labels once before any round (data
poisoning); sign_flip and gaussian_noise corrupt the attacker's parameter
update between local training and collection (model poisoning), so the
server-side view stays indistinguishable from an honest client. Attackers
are static: a fixed id set, active every round, knowing only their own state.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .actors import Role
from .dataset import Dataset
from .errors import InvalidArgument, NoLabels, ShapeMismatch, UnknownAttacker
from .learners import ParamVector
from .pool import Pool
from .rng import substream

LABEL_FLIP = "label_flip"
SIGN_FLIP = "sign_flip"
GAUSSIAN_NOISE = "gaussian_noise"
KINDS = (LABEL_FLIP, SIGN_FLIP, GAUSSIAN_NOISE)


@dataclass(frozen=True)
class AttackSpec:
    """Which clients misbehave and how.

    scale is the update multiplier for sign_flip (attacker submits
    before - scale * (after - before)) and the noise standard deviation for
    gaussian_noise; zero degrades either to a no-op.
    """

    kind: str
    attacker_ids: tuple[str, ...]
    flip_map: dict[int, int] | None = None
    scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown attack kind {self.kind!r}")
        ids = tuple(str(i) for i in self.attacker_ids)
        if not ids:
            raise InvalidArgument("attacker_ids must be nonempty")
        if len(set(ids)) != len(ids):
            raise InvalidArgument("attacker_ids must be distinct")
        object.__setattr__(self, "attacker_ids", ids)
        if self.kind == LABEL_FLIP:
            if self.flip_map is None:
                raise InvalidArgument("label_flip needs a flip_map (may be empty)")
            cleaned = {int(k): int(v) for k, v in self.flip_map.items()}
            object.__setattr__(self, "flip_map", cleaned)
        elif self.flip_map is not None:
            raise InvalidArgument(f"flip_map is only valid for {LABEL_FLIP}")
        if self.scale < 0:
            raise InvalidArgument("scale must be nonnegative")


def ensure_attackers_known(atk: AttackSpec, pool: Pool) -> None:
    """Every attacker id must name a client-roled actor of the pool."""
    for aid in atk.attacker_ids:
        roles = pool.actors.get(aid)
        if roles is None or Role.CLIENT not in roles:
            raise UnknownAttacker(f"attacker {aid!r} is not a client of the pool")


def poison_data(pool: Pool, atk: AttackSpec) -> None:
    """Remap attacker labels through flip_map, in place on the pool.

    Classes absent from flip_map pass through unchanged. Apply once, before
    any round and before carving subpools.
    """
    if atk.kind != LABEL_FLIP:
        raise InvalidArgument("poison_data only applies to label_flip attacks")
    ensure_attackers_known(atk, pool)
    for aid in atk.attacker_ids:
        d = pool.data.get(aid)
        if d is None or d.labels is None:
            raise NoLabels(f"attacker {aid!r} has no labeled dataset to poison")
        flipped = d.labels.copy()
        for src, dst in atk.flip_map.items():
            flipped[d.labels == src] = dst
        pool.data[aid] = Dataset(d.features, flipped, d.row_ids, d.feature_ids)


def poison_update(params_before: ParamVector, params_after: ParamVector,
                  atk: AttackSpec, attacker_id: str = "") -> ParamVector:
    """Corrupted parameters an attacker submits instead of its honest update.

    gaussian_noise draws are seeded by (atk.seed, attacker_id), so repeated
    calls are reproducible per attacker.
    """
    if atk.kind not in (SIGN_FLIP, GAUSSIAN_NOISE):
        raise InvalidArgument("poison_update applies to sign_flip and gaussian_noise only")
    if params_before.shape_tag != params_after.shape_tag or len(params_before) != len(params_after):
        raise ShapeMismatch(
            f"before/after params do not match: {params_before.shape_tag!r} "
            f"vs {params_after.shape_tag!r}")
    if atk.kind == SIGN_FLIP:
        update = params_after.values - params_before.values
        return ParamVector(params_before.values - atk.scale * update, params_before.shape_tag)
    noise = substream(atk.seed, "noise", attacker_id).normal(0.0, atk.scale, len(params_after))
    return ParamVector(params_after.values + noise, params_after.shape_tag)


def attach_attack(plan, atk: AttackSpec, pool: Pool):
    """Return a copy of a round plan with the attack armed.

    The pool is needed up front to reject attacker ids that are not clients;
    honest clients are untouched by the armed attack.
    """
    ensure_attackers_known(atk, pool)
    return dataclasses.replace(plan, attack=atk)
