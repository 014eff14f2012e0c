"""Per-actor model stores and the pool calculus.

A :class:`Pool` joins actors, their datasets and their model stores under one
id universe. ``select`` produces filtered views that share model storage with
the parent (an update through any view is visible through all); ``map`` is
the only cross-actor channel and is gated pairwise by the role permission
relation. Destination models are handed to map functions as read-only
snapshots taken when the map starts.
"""
from __future__ import annotations

from collections.abc import Mapping

from .actors import Role, can_initiate, role_names
from .errors import (
    FedSimError,
    InvalidArgument,
    MapError,
    PermissionDenied,
    SelectionTooLarge,
    UnknownActor,
)
from .rng import substream


class ModelStore(dict):
    """Key-value store of model payloads owned by one actor.

    Values are treated as immutable; replacing an entry is the only supported
    mutation. That convention is what makes snapshot views cheap and safe.
    """

    def __init__(self, owner_id: str, entries=None):
        super().__init__(entries or {})
        self._owner_id = str(owner_id)

    @property
    def owner_id(self) -> str:
        return self._owner_id

    def __repr__(self) -> str:
        return f"ModelStore({self._owner_id!r}, {dict(self)!r})"


class ModelView(Mapping):
    """Read-only snapshot of a ModelStore, taken at map start."""

    __slots__ = ("_entries", "owner_id")

    def __init__(self, store: ModelStore):
        self._entries = dict(store)
        self.owner_id = store.owner_id

    def __getitem__(self, key):
        value = self._entries[key]
        # lists are the one mutable payload shape; never hand them out raw
        return tuple(value) if isinstance(value, list) else value

    def __iter__(self):
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)

    def __repr__(self) -> str:
        return f"ModelView({self.owner_id!r}, {self._entries!r})"


class Pool:
    """Actors joined with their datasets and model stores."""

    def __init__(self, actors, data, models):
        self.actors = actors
        self.data = data
        self.models = models

    @classmethod
    def from_federated(cls, fed, actors, init=None) -> "Pool":
        """Build a pool from a federated dataset and an architecture.

        Every dataset key must name an actor; actors without data (a bare
        server, say) are fine. ``init`` may seed model entries per actor:
        it gets (actor_id, role_set) and returns a dict of entries.
        """
        for nid in fed:
            if nid not in actors:
                raise UnknownActor(f"dataset node {nid!r} has no actor in the architecture")
        models = {}
        for aid, roles in actors.items():
            entries = init(aid, roles) if init is not None else None
            models[aid] = ModelStore(aid, entries)
        return cls(dict(actors), dict(fed), models)

    @property
    def actor_ids(self) -> list[str]:
        return sorted(self.actors)

    def __len__(self) -> int:
        return len(self.actors)

    def __contains__(self, actor_id) -> bool:
        return actor_id in self.actors

    def select(self, criterion, seed: int = 0) -> "Pool":
        """Filtered view of this pool, sharing model storage.

        ``criterion`` is either a predicate over (actor_id, role_set) or a
        count n, in which case n actors are sampled uniformly without
        replacement, deterministically for the given seed.
        """
        if callable(criterion):
            chosen = [aid for aid in self.actor_ids if criterion(aid, self.actors[aid])]
        else:
            n = int(criterion)
            if n < 0:
                raise InvalidArgument("cannot select a negative number of actors")
            if n > len(self.actors):
                raise SelectionTooLarge(f"asked for {n} of {len(self.actors)} actors")
            ids = self.actor_ids
            picks = substream(seed, "select").permutation(len(ids))[:n]
            chosen = sorted(ids[i] for i in picks)
        actors = {aid: self.actors[aid] for aid in chosen}
        data = {aid: self.data[aid] for aid in chosen if aid in self.data}
        models = {aid: self.models[aid] for aid in chosen}
        return Pool(actors, data, models)

    @property
    def clients(self) -> "Pool":
        return self.select(lambda _aid, roles: Role.CLIENT in roles)

    @property
    def servers(self) -> "Pool":
        return self.select(lambda _aid, roles: Role.SERVER in roles)

    @property
    def aggregators(self) -> "Pool":
        return self.select(lambda _aid, roles: Role.AGGREGATOR in roles)

    def map(self, fn, dst: "Pool | None" = None) -> None:
        """Apply ``fn`` over this pool's actors in ascending-id order.

        With a destination pool, every (source, destination) actor pair must
        pass the initiation permission first; ``fn`` is then called as
        fn(own_model, dst_views) where dst_views are read-only snapshots in
        ascending destination-id order. Without a destination this is local
        computation, fn(own_model, own_dataset_or_None), and needs no
        permission.

        The first error raised by ``fn`` aborts the remaining invocations;
        non-domain exceptions are wrapped in MapError naming the actor.
        """
        src_ids = self.actor_ids
        if dst is None:
            for aid in src_ids:
                self._invoke(fn, aid, self.models[aid], self.data.get(aid))
            return
        dst_ids = dst.actor_ids
        for a in src_ids:
            for b in dst_ids:
                if not can_initiate(self.actors[a], dst.actors[b]):
                    raise PermissionDenied(
                        f"actor {a!r} {role_names(self.actors[a])} may not initiate "
                        f"communication to {b!r} {role_names(dst.actors[b])}")
        views = tuple(ModelView(dst.models[b]) for b in dst_ids)
        for aid in src_ids:
            self._invoke(fn, aid, self.models[aid], views)

    @staticmethod
    def _invoke(fn, aid, *args) -> None:
        try:
            fn(*args)
        except FedSimError:
            raise
        except Exception as exc:
            raise MapError(f"map function failed at actor {aid!r}: {exc}") from exc

    def __repr__(self) -> str:
        return f"Pool({self.actor_ids!r})"
