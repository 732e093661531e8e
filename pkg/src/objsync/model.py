"""Object model: tracked types, object identities, and the delta algebra.

Everything else in the library is built on four pure functions over deltas:
``apply_delta``, ``compose``, ``difference``, and ``union``.  A delta is a
keyed record of object changes; applying it to a state map is total (deletes
of absent objects and re-creations of present objects are resolved by
no-op/replace so that squashed edges can carry tombstones safely).

All types here are immutable once constructed and safe to share across
threads.
"""

from __future__ import annotations

import math
import re
import struct
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Union

from .errors import DuplicateType, UnknownDimension, UnknownType

DimValue = Union[int, float, bool, str, None]

NEW = "new"
MOD = "mod"
DEL = "del"

_INT_LIKE = re.compile(r"^-?[0-9]+$")


def check_dim_value(value: DimValue) -> DimValue:
    """Validate that a value belongs to the closed scalar set."""
    if value is None or isinstance(value, (bool, int, str)):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite float not allowed as a dimension value: {value!r}")
        return value
    raise TypeError(f"unsupported dimension value type: {type(value).__name__}")


def values_equal(a: DimValue, b: DimValue) -> bool:
    """Equality used for change detection: type-strict, floats bitwise."""
    if type(a) is not type(b):
        return False
    if isinstance(a, float):
        return struct.pack(">d", a) == struct.pack(">d", b)
    return a == b


@dataclass(frozen=True)
class TypeDescriptor:
    """Schema of one tracked type: a name, ordered dimensions, optional key."""

    type_name: str
    dimensions: tuple[str, ...]
    primary_key: Optional[str] = None

    def __post_init__(self):
        if not self.type_name or "/" in self.type_name:
            raise ValueError(f"bad type name: {self.type_name!r}")
        object.__setattr__(self, "dimensions", tuple(self.dimensions))
        if len(set(self.dimensions)) != len(self.dimensions):
            raise ValueError(f"duplicate dimensions in type {self.type_name}")
        if self.primary_key is not None and self.primary_key not in self.dimensions:
            raise ValueError(
                f"primary key {self.primary_key!r} is not a dimension of {self.type_name}"
            )

    @property
    def dimension_set(self) -> frozenset[str]:
        return frozenset(self.dimensions)


class TypeRegistry:
    """Append-only name -> descriptor map shared by every node of a deployment."""

    def __init__(self, descriptors: Iterable[TypeDescriptor] = ()):
        self._types: dict[str, TypeDescriptor] = {}
        for d in descriptors:
            self.register(d)

    def register(self, descriptor: TypeDescriptor) -> "TypeRegistry":
        if descriptor.type_name in self._types:
            raise DuplicateType(descriptor.type_name)
        self._types[descriptor.type_name] = descriptor
        return self

    def get(self, type_name: str) -> TypeDescriptor:
        try:
            return self._types[type_name]
        except KeyError:
            raise UnknownType(type_name) from None

    def __contains__(self, type_name: str) -> bool:
        return type_name in self._types

    def names(self) -> list[str]:
        return list(self._types)


@dataclass(frozen=True)
class ObjectId:
    """Globally unique object identity: the pair (type name, key)."""

    type_name: str
    key: Union[int, str]

    def __post_init__(self):
        if isinstance(self.key, bool) or not isinstance(self.key, (int, str)):
            raise TypeError(f"object key must be int or str, got {type(self.key).__name__}")
        # String keys that parse as integers would collide with int keys in
        # the canonical "type/key" form.
        if isinstance(self.key, str) and _INT_LIKE.match(self.key):
            raise ValueError(f"string key {self.key!r} is indistinguishable from an int key")

    def sort_key(self):
        return (self.type_name, 0 if isinstance(self.key, int) else 1, self.key)

    def canonical(self) -> str:
        return f"{self.type_name}/{self.key}"

    @staticmethod
    def from_canonical(text: str) -> "ObjectId":
        type_name, _, raw = text.partition("/")
        if not type_name or not raw:
            raise ValueError(f"bad canonical object id: {text!r}")
        key: Union[int, str] = int(raw) if _INT_LIKE.match(raw) else raw
        return ObjectId(type_name, key)


@dataclass(frozen=True)
class ObjectState:
    """Materialized object: identity plus a dimension -> value map."""

    id: ObjectId
    values: Mapping[str, DimValue] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "values", dict(self.values))

    def get(self, dim: str) -> DimValue:
        return self.values[dim]

    def with_values(self, updates: Mapping[str, DimValue]) -> "ObjectState":
        merged = dict(self.values)
        merged.update(updates)
        return ObjectState(self.id, merged)

    def __eq__(self, other):
        if not isinstance(other, ObjectState):
            return NotImplemented
        if self.id != other.id or self.values.keys() != other.values.keys():
            return False
        return all(values_equal(v, other.values[k]) for k, v in self.values.items())

    def __hash__(self):
        return hash(self.id)


@dataclass(frozen=True)
class ObjectDelta:
    """Change record for one object: created, fields modified, or deleted."""

    kind: str
    values: Mapping[str, DimValue] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (NEW, MOD, DEL):
            raise ValueError(f"bad delta kind: {self.kind!r}")
        object.__setattr__(self, "values", dict(self.values))
        if self.kind == DEL and self.values:
            raise ValueError("delete entries carry no values")
        if self.kind == MOD and not self.values:
            raise ValueError("mod entries must name at least one dimension")

    def __eq__(self, other):
        if not isinstance(other, ObjectDelta):
            return NotImplemented
        if self.kind != other.kind or self.values.keys() != other.values.keys():
            return False
        return all(values_equal(v, other.values[k]) for k, v in self.values.items())

    def __hash__(self):
        return hash((self.kind, frozenset(self.values)))


class Delta:
    """A keyed record of object changes; the unit of storage and transmission.

    The empty delta is the identity of ``compose``.
    """

    __slots__ = ("entries",)

    def __init__(self, entries: Mapping[ObjectId, ObjectDelta] | None = None):
        self.entries: dict[ObjectId, ObjectDelta] = dict(entries or {})

    @staticmethod
    def empty() -> "Delta":
        return Delta()

    def is_empty(self) -> bool:
        return not self.entries

    def __len__(self):
        return len(self.entries)

    def __contains__(self, oid: ObjectId) -> bool:
        return oid in self.entries

    def __eq__(self, other):
        if not isinstance(other, Delta):
            return NotImplemented
        return self.entries == other.entries

    def __repr__(self):
        return f"Delta({self.entries!r})"

    def key_count(self) -> int:
        """Work-unit metric: one per object entry plus one per dimension."""
        return sum(1 + len(d.values) for d in self.entries.values())

    def object_ids(self) -> list[ObjectId]:
        return sorted(self.entries, key=ObjectId.sort_key)


def new_entry(state: ObjectState) -> ObjectDelta:
    return ObjectDelta(NEW, state.values)


def apply_delta(
    state: Mapping[ObjectId, ObjectState], delta: Delta
) -> dict[ObjectId, ObjectState]:
    """Apply a delta to a state map, returning the new map.

    Total by construction: del of an absent object is a no-op, new of a
    present object replaces it wholesale, and mod of an absent object is a
    no-op (the composition of a delete and a later mod nets to the delete).
    """
    out = dict(state)
    for oid, entry in delta.entries.items():
        if entry.kind == NEW:
            out[oid] = ObjectState(oid, entry.values)
        elif entry.kind == DEL:
            out.pop(oid, None)
        else:  # MOD
            current = out.get(oid)
            if current is not None:
                out[oid] = current.with_values(entry.values)
    return out


def fold(state: Mapping[ObjectId, ObjectState], deltas: Iterable[Delta]) -> dict[ObjectId, ObjectState]:
    out = dict(state)
    for d in deltas:
        out = apply_delta(out, d)
    return out


def _compose_entry(first: ObjectDelta, second: ObjectDelta) -> ObjectDelta:
    if second.kind == DEL:
        return second
    if second.kind == NEW:
        # Replacement wins regardless of what came before (includes the
        # del-then-new resurrection case).
        return second
    # second is MOD
    if first.kind == DEL:
        # mod of an absent object is a no-op, so the delete stands
        return first
    if first.kind == NEW:
        merged = dict(first.values)
        merged.update(second.values)
        return ObjectDelta(NEW, merged)
    merged = dict(first.values)
    merged.update(second.values)
    return ObjectDelta(MOD, merged)


def compose(first: Delta, second: Delta) -> Delta:
    """Squash two deltas into one, equivalent under apply for any base state."""
    if first.is_empty():
        return Delta(second.entries)
    if second.is_empty():
        return Delta(first.entries)
    out = dict(first.entries)
    for oid, entry in second.entries.items():
        prev = out.get(oid)
        out[oid] = entry if prev is None else _compose_entry(prev, entry)
    return Delta(out)


def compose_all(deltas: Iterable[Delta]) -> Delta:
    acc = Delta.empty()
    for d in deltas:
        acc = compose(acc, d)
    return acc


def _covers_all(entry: ObjectDelta) -> bool:
    """del and new entries cover the whole object (existence plus all fields)."""
    return entry.kind in (NEW, DEL)


def difference(a: Delta, b: Delta) -> Delta:
    """Entries of ``a`` restricted to (object, dimension) keys absent from ``b``.

    An object entirely covered by ``b`` is dropped; partial coverage of a
    new-object entry demotes it to a mod so the surviving fields can never
    re-create an object the other side deleted.
    """
    out: dict[ObjectId, ObjectDelta] = {}
    for oid, entry in a.entries.items():
        other = b.entries.get(oid)
        if other is None:
            out[oid] = entry
            continue
        if _covers_all(other):
            continue
        # other is MOD
        if entry.kind == DEL:
            # deletion is atomic; field-level coverage cannot carve it up
            out[oid] = entry
            continue
        remaining = {d: v for d, v in entry.values.items() if d not in other.values}
        if not remaining:
            continue
        out[oid] = ObjectDelta(MOD, remaining)
    return Delta(out)


def _union_entry(a: ObjectDelta, b: ObjectDelta) -> ObjectDelta:
    if b.kind in (NEW, DEL):
        return b
    # b is MOD
    if a.kind == DEL:
        # the b side asserts field values, so the object exists
        return b
    merged = dict(a.values)
    merged.update(b.values)
    return ObjectDelta(a.kind if a.kind == NEW else MOD, merged)


def union(a: Delta, b: Delta) -> Delta:
    """Key-wise union; on (object, dimension) collision the ``b`` entry wins."""
    if a.is_empty():
        return Delta(b.entries)
    if b.is_empty():
        return Delta(a.entries)
    out = dict(a.entries)
    for oid, entry in b.entries.items():
        prev = out.get(oid)
        out[oid] = entry if prev is None else _union_entry(prev, entry)
    return Delta(out)


def state_diff(before: Optional[ObjectState], after: Optional[ObjectState]) -> Optional[ObjectDelta]:
    """Minimal entry carrying one object from ``before`` to ``after``."""
    if after is None:
        return ObjectDelta(DEL) if before is not None else None
    if before is None:
        return ObjectDelta(NEW, after.values)
    changed = {
        d: v for d, v in after.values.items() if not values_equal(before.values.get(d), v)
    }
    return ObjectDelta(MOD, changed) if changed else None


def diff_states(
    before: Mapping[ObjectId, ObjectState], after: Mapping[ObjectId, ObjectState]
) -> Delta:
    """Delta carrying a whole state map from ``before`` to ``after``."""
    out: dict[ObjectId, ObjectDelta] = {}
    for oid in before.keys() | after.keys():
        entry = state_diff(before.get(oid), after.get(oid))
        if entry is not None:
            out[oid] = entry
    return Delta(out)


def delta_to_canonical(delta: Delta) -> dict:
    """Canonical wire form: map keyed "type_name/key", lexicographically sorted."""
    return {
        oid.canonical(): {"kind": entry.kind, "values": dict(entry.values)}
        for oid, entry in sorted(delta.entries.items(), key=lambda kv: kv[0].canonical())
    }


def delta_from_canonical(data: Mapping, registry: TypeRegistry) -> Delta:
    entries: dict[ObjectId, ObjectDelta] = {}
    for key, raw in data.items():
        oid = ObjectId.from_canonical(key)
        desc = registry.get(oid.type_name)
        values = raw.get("values", {})
        for dim, value in values.items():
            if dim not in desc.dimension_set:
                raise UnknownDimension(f"{oid.type_name} has no dimension {dim!r}")
            check_dim_value(value)
        entries[oid] = ObjectDelta(raw["kind"], values)
    return Delta(entries)
