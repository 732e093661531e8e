"""Three-way merge of divergent version-graph branches.

When a graph receives changes forked from a non-head version, the two
branches are reconciled by building two convergence deltas: one applied to
the local head, one to the incoming branch tip, both landing on the same
merged state.  Non-overlapping changes flow across automatically; objects
touched by both branches are handed to an application-supplied resolver
together with the fork-point, local, and incoming states.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .errors import ResolverFault
from .graph import Edge, MergeStats, squash
from .model import (
    DEL,
    Delta,
    MOD,
    NEW,
    ObjectDelta,
    ObjectId,
    ObjectState,
    apply_delta,
    difference,
    state_diff,
    union,
)


@dataclass(frozen=True)
class ConflictEntry:
    """One object changed by both branches.

    ``original`` is the state at the fork point, ``mine`` the state at the
    receiving graph's head, ``theirs`` the state at the tip of the incoming
    branch; each is None where the object does not exist in that version.
    ``contested_dims`` are the dimensions written by both sides;
    ``existence_contested`` marks create/delete disagreements, for which a
    resolution must decide the whole object.
    """

    id: ObjectId
    original: Optional[ObjectState]
    mine: Optional[ObjectState]
    theirs: Optional[ObjectState]
    contested_dims: frozenset[str] = frozenset()
    existence_contested: bool = False


Resolver = Callable[
    [list[ConflictEntry], dict, dict, dict],
    Delta,
]


@dataclass(frozen=True)
class MergeResult:
    merged_version: str
    edge_h_to_m: Edge
    edge_b_to_m: Edge
    stats: MergeStats


class Resolution:
    """Convenience builder for the delta a resolver returns."""

    def __init__(self):
        self._entries: dict[ObjectId, ObjectDelta] = {}

    def keep_object(self, state: ObjectState) -> "Resolution":
        """Resolve the object to exactly this state."""
        self._entries[state.id] = ObjectDelta(NEW, state.values)
        return self

    def delete_object(self, oid: ObjectId) -> "Resolution":
        self._entries[oid] = ObjectDelta(DEL)
        return self

    def set_fields(self, oid: ObjectId, values: dict) -> "Resolution":
        """Resolve only the named dimensions; others merge automatically."""
        prev = self._entries.get(oid)
        if prev is not None and prev.kind != DEL:
            merged = dict(prev.values)
            merged.update(values)
            self._entries[oid] = ObjectDelta(prev.kind, merged)
        else:
            self._entries[oid] = ObjectDelta(MOD, values)
        return self

    def delta(self) -> Delta:
        return Delta(self._entries)


def detect_conflicts(delta_a_to_h: Delta, delta_a_to_b: Delta) -> list[ObjectId]:
    """Objects changed on both branches, in deterministic order."""
    common = delta_a_to_h.entries.keys() & delta_a_to_b.entries.keys()
    return sorted(common, key=ObjectId.sort_key)


def _covered_dims(entry: ObjectDelta, all_dims: Iterable[str]) -> set[str]:
    if entry.kind == MOD:
        return set(entry.values)
    return set(all_dims)  # new and del cover the whole object


def default_resolver(strategy: str) -> Resolver:
    """Built-in merge strategies: ``keep_mine`` or ``keep_theirs``.

    Each reasserts the preferred side's values for contested dimensions only;
    dimensions written by a single branch still merge automatically.  When
    one side deleted the object, the preferred side's verdict is taken
    wholesale.
    """
    if strategy not in ("keep_mine", "keep_theirs"):
        raise ValueError(f"unknown merge strategy: {strategy!r}")
    prefer_mine = strategy == "keep_mine"

    def resolver(conflicts, original_state, my_state, their_state) -> Delta:
        res = Resolution()
        for c in conflicts:
            preferred = c.mine if prefer_mine else c.theirs
            if c.existence_contested:
                if preferred is None:
                    res.delete_object(c.id)
                else:
                    res.keep_object(preferred)
            elif c.contested_dims:
                res.set_fields(
                    c.id, {d: preferred.values[d] for d in sorted(c.contested_dims)}
                )
        return res.delta()

    return resolver


def _auto_merge_base(
    oid: ObjectId,
    mine_entry: ObjectDelta,
    theirs_entry: ObjectDelta,
    mine: Optional[ObjectState],
    theirs: Optional[ObjectState],
) -> Optional[ObjectState]:
    """Default outcome for a conflict object when the resolver is silent.

    Field-level: dimensions written by one side only adopt that side's value;
    contested dimensions keep mine.  Existence disagreements keep mine's
    verdict wholesale.
    """
    if mine is None:
        return None
    if theirs is None or mine_entry.kind == DEL:
        return mine
    dims = set(mine.values) | set(theirs.values)
    mine_cov = _covered_dims(mine_entry, dims)
    theirs_cov = _covered_dims(theirs_entry, dims)
    values = {}
    for d in dims:
        if d in theirs_cov and d not in mine_cov:
            values[d] = theirs.values[d]
        else:
            values[d] = mine.values[d] if d in mine.values else theirs.values[d]
    return ObjectState(oid, values)


def _resolved_target(
    oid: ObjectId,
    res_entry: Optional[ObjectDelta],
    base: Optional[ObjectState],
    original: Optional[ObjectState],
    mine: Optional[ObjectState],
    theirs: Optional[ObjectState],
) -> Optional[ObjectState]:
    """Final merged state of one governed object."""
    if res_entry is None:
        return base
    if res_entry.kind == DEL:
        return None
    if res_entry.kind == NEW:
        return ObjectState(oid, res_entry.values)
    # partial resolution: overlay on the auto-merged base, or resurrect from
    # the fork-point state when both defaults say the object is gone
    start = base or original or mine or theirs
    if start is None:
        raise ResolverFault(f"resolution modifies {oid.canonical()}, which never existed")
    return ObjectState(oid, {**start.values, **res_entry.values})


def resolve(graph, fork: str, incoming_head: str, incoming: list[Edge], resolver=None) -> MergeResult:
    """Reconcile an incoming branch with the graph's head.

    Computes the two branch deltas, materializes the three states, invokes
    the resolver on the conflict set, and installs the incoming edges plus
    the two convergence edges; the graph's head moves to the merged version.
    The graph is left untouched if the resolver fails.
    """
    if resolver is None:
        resolver = default_resolver("keep_mine")

    delta_ah = squash(graph.get(fork))
    delta_ab = squash(incoming)
    state_a = graph.state_at(fork)
    state_h = graph.state_at(graph.head)
    state_b = apply_delta(state_a, delta_ab)

    conflict_ids = detect_conflicts(delta_ah, delta_ab)
    entries: list[ConflictEntry] = []
    for oid in conflict_ids:
        mine_e = delta_ah.entries[oid]
        theirs_e = delta_ab.entries[oid]
        mine = state_h.get(oid)
        theirs = state_b.get(oid)
        existence = (
            mine is None
            or theirs is None
            or DEL in (mine_e.kind, theirs_e.kind)
            or (mine_e.kind == NEW and theirs_e.kind == NEW)
        )
        dims = set(mine.values if mine else ()) | set(theirs.values if theirs else ())
        contested = _covered_dims(mine_e, dims) & _covered_dims(theirs_e, dims)
        entries.append(
            ConflictEntry(
                id=oid,
                original=state_a.get(oid),
                mine=mine,
                theirs=theirs,
                contested_dims=frozenset(contested),
                existence_contested=existence,
            )
        )

    try:
        resolution = resolver(entries, state_a, state_h, state_b)
    except Exception as exc:
        raise ResolverFault(f"merge function raised: {exc!r}") from exc
    if not isinstance(resolution, Delta):
        raise ResolverFault(f"merge function returned {type(resolution).__name__}, not a Delta")

    allowed = set(conflict_ids) | delta_ah.entries.keys() | delta_ab.entries.keys()
    for oid in resolution.entries:
        if oid not in allowed:
            raise ResolverFault(f"resolution touches {oid.canonical()}, which neither branch changed")

    governed = set(conflict_ids) | set(resolution.entries)
    by_entry = {e.id: e for e in entries}
    targets: dict[ObjectId, Optional[ObjectState]] = {}
    for oid in governed:
        if oid in by_entry:
            c = by_entry[oid]
            base = _auto_merge_base(
                oid, delta_ah.entries[oid], delta_ab.entries[oid], c.mine, c.theirs
            )
            original, mine, theirs = c.original, c.mine, c.theirs
        else:
            # cross-object fix on an object only one branch touched
            mine, theirs = state_h.get(oid), state_b.get(oid)
            base = mine if oid in delta_ah.entries else theirs
            original = state_a.get(oid)
        targets[oid] = _resolved_target(
            oid, resolution.entries.get(oid), base, original, mine, theirs
        )

    flow_to_h = difference(
        Delta({o: e for o, e in delta_ab.entries.items() if o not in governed}), delta_ah
    )
    flow_to_b = difference(
        Delta({o: e for o, e in delta_ah.entries.items() if o not in governed}), delta_ab
    )
    res_to_h: dict[ObjectId, ObjectDelta] = {}
    res_to_b: dict[ObjectId, ObjectDelta] = {}
    for oid in sorted(governed, key=ObjectId.sort_key):
        target = targets[oid]
        d_h = state_diff(state_h.get(oid), target)
        d_b = state_diff(state_b.get(oid), target)
        if d_h is not None:
            res_to_h[oid] = d_h
        if d_b is not None:
            res_to_b[oid] = d_b

    delta_h_to_m = union(flow_to_h, Delta(res_to_h))
    delta_b_to_m = union(flow_to_b, Delta(res_to_b))

    merged_version = graph.id_factory()
    edge_h_to_m = Edge(graph.head, merged_version, delta_h_to_m)
    edge_b_to_m = Edge(incoming_head, merged_version, delta_b_to_m)
    merged_state = apply_delta(state_h, delta_h_to_m)

    stats = MergeStats(
        path_keys=delta_ah.key_count(),
        incoming_keys=delta_ab.key_count(),
        conflict_objects=len(conflict_ids),
        resolution_keys=resolution.key_count(),
    )
    graph._apply_merge(fork, incoming, edge_h_to_m, edge_b_to_m, merged_state)
    return MergeResult(merged_version, edge_h_to_m, edge_b_to_m, stats)
