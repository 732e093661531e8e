"""Application-facing object heap: stable reads over one version, staged writes.

A snapshot holds the materialized state of one tracked type at a known
version plus the locally staged, uncommitted changes.  Reads consult the
staged overlay first, so a node always sees its own writes; the graph never
changes what a snapshot observes until the owner explicitly checks out.
"""

from __future__ import annotations

from typing import Optional

from .errors import (
    DuplicateObject,
    UnknownDimension,
    UnknownObject,
    VersionMismatch,
)
from .graph import ROOT, Edge
from .model import (
    DEL,
    Delta,
    DimValue,
    MOD,
    NEW,
    ObjectDelta,
    ObjectId,
    ObjectState,
    TypeDescriptor,
    apply_delta,
    check_dim_value,
    compose,
)


class Snapshot:
    """Single-owner heap section for one type.

    Exactly one application thread reads and writes a snapshot; isolation
    from concurrent graph activity is guaranteed by the checkout boundary.
    """

    def __init__(self, descriptor: TypeDescriptor, version: str = ROOT):
        self.descriptor = descriptor
        self.version = version
        self.state: dict[ObjectId, ObjectState] = {}
        self.staged: dict[ObjectId, ObjectDelta] = {}

    # -- visibility ------------------------------------------------------------

    def _staged_kind(self, oid: ObjectId) -> Optional[str]:
        entry = self.staged.get(oid)
        return entry.kind if entry else None

    def is_visible(self, oid: ObjectId) -> bool:
        kind = self._staged_kind(oid)
        if kind == DEL:
            return False
        if kind in (NEW, MOD):
            return True
        return oid in self.state

    def _require_visible(self, oid: ObjectId) -> None:
        if not self.is_visible(oid):
            raise UnknownObject(oid.canonical())

    def _require_dim(self, dim: str) -> None:
        if dim not in self.descriptor.dimension_set:
            raise UnknownDimension(f"{self.descriptor.type_name}.{dim}")

    # -- writes ------------------------------------------------------------------

    def create(self, obj: ObjectState) -> None:
        if obj.id.type_name != self.descriptor.type_name:
            raise UnknownObject(f"{obj.id.canonical()} is not a {self.descriptor.type_name}")
        if self.is_visible(obj.id):
            raise DuplicateObject(obj.id.canonical())
        values = dict(obj.values)
        for dim in values:
            self._require_dim(dim)
        for dim in self.descriptor.dimensions:
            if dim not in values:
                values[dim] = None
        for v in values.values():
            check_dim_value(v)
        entry = ObjectDelta(NEW, values)
        prev = self.staged.get(obj.id)
        self.staged[obj.id] = entry if prev is None else compose(
            Delta({obj.id: prev}), Delta({obj.id: entry})
        ).entries[obj.id]

    def delete(self, oid: ObjectId) -> None:
        self._require_visible(oid)
        if self._staged_kind(oid) == NEW and oid not in self.state:
            # never committed: the create and the delete cancel out
            del self.staged[oid]
            return
        prev = self.staged.get(oid)
        tomb = ObjectDelta(DEL)
        self.staged[oid] = tomb if prev is None else compose(
            Delta({oid: prev}), Delta({oid: tomb})
        ).entries[oid]

    def write(self, oid: ObjectId, dim: str, value: DimValue) -> None:
        self._require_visible(oid)
        self._require_dim(dim)
        check_dim_value(value)
        entry = ObjectDelta(MOD, {dim: value})
        prev = self.staged.get(oid)
        self.staged[oid] = entry if prev is None else compose(
            Delta({oid: prev}), Delta({oid: entry})
        ).entries[oid]

    # -- reads -------------------------------------------------------------------

    def read(self, oid: ObjectId, dim: str) -> DimValue:
        self._require_visible(oid)
        self._require_dim(dim)
        staged = self.staged.get(oid)
        if staged is not None and dim in staged.values:
            return staged.values[dim]
        committed = self.state.get(oid)
        if committed is not None and dim in committed.values:
            return committed.values[dim]
        return None

    def read_object(self, oid: ObjectId) -> ObjectState:
        self._require_visible(oid)
        staged = self.staged.get(oid)
        committed = self.state.get(oid)
        if staged is None:
            return committed
        if committed is None:
            return ObjectState(oid, staged.values)
        return committed.with_values(staged.values)

    def read_all(self) -> list[ObjectState]:
        visible = set(self.state)
        for oid, entry in self.staged.items():
            if entry.kind == DEL:
                visible.discard(oid)
            else:
                visible.add(oid)
        return [self.read_object(oid) for oid in sorted(visible, key=ObjectId.sort_key)]

    # -- graph interaction ---------------------------------------------------------

    def staged_delta(self) -> Delta:
        return Delta(self.staged)

    def absorb_commit(self, delta: Delta, new_version: str) -> None:
        """Fold the just-committed delta into the state and reset the staging area."""
        self.state = apply_delta(self.state, delta)
        self.staged = {}
        self.version = new_version

    def apply_checkout(self, edges: list[Edge], new_version: str) -> int:
        """Fold graph edges into the committed state; staged writes survive.

        Returns the number of (object, dimension) keys applied, as a work
        metric for callers that track costs.
        """
        if edges and edges[0].from_version != self.version:
            raise VersionMismatch(
                f"edges start at {edges[0].from_version}, snapshot is at {self.version}"
            )
        applied = 0
        for edge in edges:
            self.state = apply_delta(self.state, edge.delta)
            applied += edge.delta.key_count()
        self.version = new_version
        return applied
