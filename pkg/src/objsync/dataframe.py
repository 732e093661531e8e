"""The node-local composite: type registry, per-type graphs and snapshots,
remote registry, and the commit/checkout/push/fetch/pull orchestration.

One application thread owns the snapshots and calls the heap and sync
methods.  A server endpoint may concurrently apply pushes and serve fetches
against the graphs through ``handle_message``; it never touches the
snapshots, so the application's reads stay stable until it checks out.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Union

from .errors import (
    FetchRejected,
    MalformedFrame,
    PushRejected,
    SubscriptionError,
    TransportError,
    UnknownType,
    UnknownVersion,
)
from .graph import Edge, IdFactory, ROOT, VersionGraph, random_version_id, squash
from .merge import Resolver, default_resolver
from .model import (
    DimValue,
    ObjectId,
    ObjectState,
    TypeRegistry,
)
from .snapshot import Snapshot
from . import wire
from .wire import Message, TypePayload


@dataclass(frozen=True)
class RemoteHandle:
    """A known peer: a name and where to reach it."""

    name: str
    address: str


@dataclass(frozen=True)
class CommitReport:
    versions: dict[str, str] = field(default_factory=dict)
    keys_committed: int = 0
    merged_types: tuple[str, ...] = ()


@dataclass(frozen=True)
class CheckoutReport:
    keys_applied: int = 0
    types_advanced: tuple[str, ...] = ()


@dataclass(frozen=True)
class PushReport:
    types_sent: tuple[str, ...] = ()
    bytes_sent: int = 0
    keys_sent: int = 0
    remote_heads: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class FetchReport:
    types_received: tuple[str, ...] = ()
    bytes_received: int = 0
    keys_received: int = 0
    merged_types: tuple[str, ...] = ()
    merge_keys: int = 0


Transport = Callable[[RemoteHandle, bytes], bytes]


class Dataframe:
    def __init__(
        self,
        name: str,
        registry: TypeRegistry,
        types: Iterable[str] = (),
        resolver: Union[Resolver, str, None] = None,
        *,
        id_factory: IdFactory = random_version_id,
        key_factory: Optional[Callable[[], int]] = None,
        gc_enabled: bool = True,
        auto_resync: bool = False,
        transport: Optional[Transport] = None,
        on_graph_mutate: Optional[Callable[[VersionGraph], None]] = None,
    ):
        self.name = name
        self.registry = registry
        if isinstance(resolver, str):
            resolver = default_resolver(resolver)
        self.resolver: Optional[Resolver] = resolver
        self.id_factory = id_factory
        self.key_factory = key_factory or (lambda: random.getrandbits(63))
        self.gc_enabled = gc_enabled
        self.auto_resync = auto_resync
        self.transport = transport
        self.on_graph_mutate = on_graph_mutate
        self.graphs: dict[str, VersionGraph] = {}
        self.snapshots: dict[str, Snapshot] = {}
        self.remotes: dict[str, RemoteHandle] = {}
        self._synced = False
        self.subscribe_types(types)

    # -- configuration -----------------------------------------------------------

    def subscribe_types(self, names: Iterable[str]) -> None:
        """Declare the types this node synchronizes; fixed before first sync."""
        names = list(names)
        if self._synced and names:
            raise SubscriptionError("subscriptions are fixed once synchronization has started")
        for name in names:
            descriptor = self.registry.get(name)
            if name in self.graphs:
                continue
            self.graphs[name] = VersionGraph(
                name,
                id_factory=self.id_factory,
                gc_enabled=self.gc_enabled,
                on_mutate=self.on_graph_mutate,
            )
            self.snapshots[name] = Snapshot(descriptor)

    def add_remote(self, name: str, address: str) -> RemoteHandle:
        handle = RemoteHandle(name, address)
        self.remotes[name] = handle
        return handle

    def subscribed_types(self) -> list[str]:
        return list(self.graphs)

    def _snapshot(self, type_name: str) -> Snapshot:
        try:
            return self.snapshots[type_name]
        except KeyError:
            raise UnknownType(type_name) from None

    def _remote(self, name: str) -> RemoteHandle:
        try:
            return self.remotes[name]
        except KeyError:
            raise TransportError(f"unknown remote: {name!r}") from None

    # -- heap API ------------------------------------------------------------------

    def add(self, type_name: str, values: Mapping[str, DimValue]) -> ObjectId:
        """Create an object from a value map; the key comes from the primary
        key dimension or is generated when the type has none."""
        descriptor = self.registry.get(type_name)
        values = dict(values)
        if descriptor.primary_key is not None:
            if descriptor.primary_key not in values:
                values[descriptor.primary_key] = self.key_factory()
            key = values[descriptor.primary_key]
        else:
            key = self.key_factory()
        oid = ObjectId(type_name, key)
        self._snapshot(type_name).create(ObjectState(oid, values))
        return oid

    def create(self, obj: ObjectState) -> None:
        self._snapshot(obj.id.type_name).create(obj)

    def delete(self, oid: ObjectId) -> None:
        self._snapshot(oid.type_name).delete(oid)

    def write(self, oid: ObjectId, dim: str, value: DimValue) -> None:
        self._snapshot(oid.type_name).write(oid, dim, value)

    def read(self, oid: ObjectId, dim: str) -> DimValue:
        return self._snapshot(oid.type_name).read(oid, dim)

    def read_one(self, type_name: str, key) -> Optional[ObjectState]:
        snap = self._snapshot(type_name)
        oid = ObjectId(type_name, key)
        return snap.read_object(oid) if snap.is_visible(oid) else None

    def read_all(self, type_name: str) -> list[ObjectState]:
        return self._snapshot(type_name).read_all()

    # -- commit / checkout ------------------------------------------------------------

    def commit(self) -> CommitReport:
        """Move staged changes into the per-type graphs under fresh versions.

        Types with nothing staged are untouched.  If a remote push advanced a
        graph since the snapshot's version, the commit lands as a merge and
        the next checkout reconciles the snapshot.
        """
        versions: dict[str, str] = {}
        merged: list[str] = []
        keys = 0
        for type_name, snap in self.snapshots.items():
            delta = snap.staged_delta()
            if delta.is_empty():
                continue
            graph = self.graphs[type_name]
            new_version = self.id_factory()
            edge = Edge(snap.version, new_version, delta)
            outcome = graph.put(
                snap.version, new_version, [edge], resolver=self.resolver, pin=True
            )
            snap.absorb_commit(delta, new_version)
            versions[type_name] = new_version
            keys += delta.key_count()
            if outcome.merged:
                merged.append(type_name)
        return CommitReport(versions=versions, keys_committed=keys, merged_types=tuple(merged))

    def checkout(self) -> CheckoutReport:
        """Bring every snapshot up to its graph's head; staged writes survive."""
        applied = 0
        advanced: list[str] = []
        for type_name, snap in self.snapshots.items():
            graph = self.graphs[type_name]
            with graph._lock:
                edges, head = graph.get_with_head(snap.version)
                if edges:
                    advanced.append(type_name)
                applied += snap.apply_checkout(edges, head)
                graph.pin_local(head)
        return CheckoutReport(keys_applied=applied, types_advanced=tuple(advanced))

    # -- push ---------------------------------------------------------------------------

    def build_push(self, remote: str) -> Optional[Message]:
        """One squashed delta per type with changes; None when fully quiescent."""
        self._remote(remote)
        self._synced = True
        payloads = []
        for type_name, graph in self.graphs.items():
            start = graph.remote_refs.get(remote, ROOT)
            with graph._lock:
                if start == graph.head:
                    continue
                edges, head = graph.get_with_head(start)
            payloads.append(TypePayload(type_name, start, head, squash(edges)))
        if not payloads:
            return None
        return Message(kind=wire.PUSH_REQ, sender=self.name, payloads=tuple(payloads))

    def complete_push(self, remote: str, request: Message, response: Message) -> PushReport:
        if response.status != wire.STATUS_OK:
            raise PushRejected(f"{remote} rejected the push: {response.status}")
        remote_heads = {}
        keys = 0
        for payload in request.payloads:
            graph = self.graphs[payload.type_name]
            # the remote now holds everything up to what we sent; its merged
            # head (if any) is not in our graph, so the ledger records ours
            graph.record_remote(remote, payload.end_version)
            keys += payload.delta.key_count()
            resp_payload = response.payload_for(payload.type_name)
            if resp_payload is not None and resp_payload.end_version:
                remote_heads[payload.type_name] = resp_payload.end_version
        return PushReport(
            types_sent=tuple(p.type_name for p in request.payloads),
            bytes_sent=len(wire.encode(request)),
            keys_sent=keys,
            remote_heads=remote_heads,
        )

    def push(self, remote: str) -> PushReport:
        request = self.build_push(remote)
        if request is None:
            return PushReport()
        response = self._request(remote, request)
        if response.kind != wire.PUSH_RESP:
            raise MalformedFrame(f"expected PUSH_RESP, got {response.kind}")
        try:
            return self.complete_push(remote, request, response)
        except PushRejected:
            if not self.auto_resync:
                raise
            self._reset_ledger(remote)
            retry = self.build_push(remote)
            if retry is None:
                return PushReport()
            return self.complete_push(remote, retry, self._request(remote, retry))

    # -- fetch / pull ----------------------------------------------------------------------

    def build_fetch(self, remote: str) -> Message:
        """Per-type last-known versions; the first request starts at the root."""
        self._remote(remote)
        self._synced = True
        payloads = [
            TypePayload(type_name, graph.remote_refs.get(remote, ROOT))
            for type_name, graph in self.graphs.items()
        ]
        return Message(kind=wire.FETCH_REQ, sender=self.name, payloads=tuple(payloads))

    def complete_fetch(self, remote: str, response: Message) -> FetchReport:
        if response.status != wire.STATUS_OK:
            raise FetchRejected(f"{remote} rejected the fetch: {response.status}")
        received: list[str] = []
        merged: list[str] = []
        keys = 0
        merge_keys = 0
        for payload in response.payloads:
            graph = self.graphs.get(payload.type_name)
            if graph is None or payload.delta is None or payload.end_version is None:
                continue
            edge = Edge(payload.start_version, payload.end_version, payload.delta)
            try:
                outcome = graph.put(
                    payload.start_version,
                    payload.end_version,
                    [edge],
                    resolver=self.resolver,
                    remote=remote,
                )
            except UnknownVersion as exc:
                raise FetchRejected(f"response for {payload.type_name} starts at an unknown version") from exc
            received.append(payload.type_name)
            keys += payload.delta.key_count()
            if outcome.merged:
                merged.append(payload.type_name)
                merge_keys += outcome.merge_stats.total()
        return FetchReport(
            types_received=tuple(received),
            bytes_received=len(wire.encode(response)),
            keys_received=keys,
            merged_types=tuple(merged),
            merge_keys=merge_keys,
        )

    def fetch(self, remote: str) -> FetchReport:
        request = self.build_fetch(remote)
        response = self._request(remote, request)
        if response.kind != wire.FETCH_RESP:
            raise MalformedFrame(f"expected FETCH_RESP, got {response.kind}")
        try:
            return self.complete_fetch(remote, response)
        except FetchRejected:
            if not self.auto_resync:
                raise
            self._reset_ledger(remote)
            retry = self.build_fetch(remote)
            return self.complete_fetch(remote, self._request(remote, retry))

    def pull(self, remote: str) -> FetchReport:
        report = self.fetch(remote)
        self.checkout()
        return report

    def _request(self, remote: str, message: Message) -> Message:
        if self.transport is None:
            raise TransportError("no transport configured on this dataframe")
        handle = self._remote(remote)
        return wire.decode(self.transport(handle, wire.encode(message)), self.registry)

    def _reset_ledger(self, remote: str) -> None:
        for graph in self.graphs.values():
            graph.remote_refs.pop(remote, None)

    # -- server side ------------------------------------------------------------------------

    def handle_message(self, msg: Message) -> Message:
        """Answer one request against the local graphs (the endpoint path)."""
        self._synced = True
        if msg.kind == wire.FETCH_REQ:
            return self._handle_fetch(msg)
        if msg.kind == wire.PUSH_REQ:
            return self._handle_push(msg)
        raise MalformedFrame(f"a node cannot serve {msg.kind}")

    def _handle_fetch(self, msg: Message) -> Message:
        payloads = []
        status = wire.STATUS_OK
        for p in msg.payloads:
            graph = self.graphs.get(p.type_name)
            if graph is None:
                status = wire.STATUS_UNKNOWN_VERSION
                payloads.append(TypePayload(p.type_name, p.start_version))
                continue
            with graph._lock:
                try:
                    edges, head = graph.get_with_head(p.start_version)
                except UnknownVersion:
                    status = wire.STATUS_UNKNOWN_VERSION
                    payloads.append(TypePayload(p.type_name, p.start_version))
                    continue
                if not edges:
                    continue  # requester is current: nothing for this type
                delta = squash(edges)
                graph.record_remote(msg.sender, head)
            payloads.append(TypePayload(p.type_name, p.start_version, head, delta))
        return Message(
            kind=wire.FETCH_RESP, sender=self.name, payloads=tuple(payloads), status=status
        )

    def _handle_push(self, msg: Message) -> Message:
        for p in msg.payloads:
            if p.delta is None or p.end_version is None:
                raise MalformedFrame(f"push payload for {p.type_name} carries no delta")
        payloads = []
        status = wire.STATUS_OK
        for p in msg.payloads:
            graph = self.graphs.get(p.type_name)
            if graph is None:
                status = wire.STATUS_UNKNOWN_VERSION
                payloads.append(TypePayload(p.type_name, p.start_version))
                continue
            edge = Edge(p.start_version, p.end_version, p.delta)
            try:
                graph.put(
                    p.start_version,
                    p.end_version,
                    [edge],
                    resolver=self.resolver,
                    remote=msg.sender,
                )
            except UnknownVersion:
                status = wire.STATUS_UNKNOWN_VERSION
                payloads.append(TypePayload(p.type_name, p.start_version))
                continue
            payloads.append(TypePayload(p.type_name, p.start_version, graph.head))
        return Message(
            kind=wire.PUSH_RESP, sender=self.name, payloads=tuple(payloads), status=status
        )
