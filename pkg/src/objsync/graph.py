"""Per-type DAG of delta edges with a reference-counted garbage collector.

Vertices are opaque version ids; edges carry the delta that moves the state
from one version to the next.  Each graph keeps a ledger of the last version
every known peer has acknowledged; those versions, the root, the head, the
locally pinned snapshot version, and the fork/join vertices of live merge
branches are the GC roots.  Everything else is squashed away after every
mutation, which keeps the vertex count proportional to the number of peers.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .errors import UnknownVersion
from .model import (
    Delta,
    ObjectId,
    ObjectState,
    apply_delta,
    compose,
    compose_all,
)

ROOT = "0" * 32

IdFactory = Callable[[], str]


def random_version_id() -> str:
    return os.urandom(16).hex()


def seeded_id_factory(rng) -> IdFactory:
    """Deterministic version ids for simulation and golden-file tests."""

    def make() -> str:
        return f"{rng.getrandbits(128):032x}"

    return make


@dataclass(frozen=True)
class Edge:
    from_version: str
    to_version: str
    delta: Delta

    def __post_init__(self):
        if self.from_version == self.to_version:
            raise ValueError("edge endpoints must differ")


@dataclass(frozen=True)
class PutOutcome:
    """Result of receiving changes: a plain append or a resolved merge."""

    head: str
    merged: bool
    merge_stats: Optional["MergeStats"] = None

    @property
    def fast_forward(self) -> bool:
        return not self.merged


@dataclass(frozen=True)
class MergeStats:
    """Work counters from a conflict resolution, for metrics and cost models."""

    path_keys: int = 0
    incoming_keys: int = 0
    conflict_objects: int = 0
    resolution_keys: int = 0

    def total(self) -> int:
        return self.path_keys + self.incoming_keys + self.resolution_keys


@dataclass(frozen=True)
class GcReport:
    versions_deleted: int = 0
    edges_merged: int = 0


@dataclass
class _MergeRecord:
    fork: str
    branch: list[str]
    join: str


class VersionGraph:
    """Version history of one tracked type.

    Single-writer contract: mutating operations (put, record_remote,
    pin_local, collect) are serialized by an internal lock; readers see a
    consistent graph.
    """

    def __init__(
        self,
        type_name: str,
        *,
        id_factory: IdFactory = random_version_id,
        gc_enabled: bool = True,
        on_mutate: Optional[Callable[["VersionGraph"], None]] = None,
    ):
        self.type_name = type_name
        self.id_factory = id_factory
        self.gc_enabled = gc_enabled
        self.on_mutate = on_mutate
        self.head = ROOT
        self._vertices: dict[str, None] = {ROOT: None}  # insertion-ordered set
        self._edges: dict[tuple[str, str], Edge] = {}
        self._next: dict[str, str] = {}  # successor toward head, per vertex
        self._parent: dict[str, str] = {}  # primary parent, for state folds
        self._children: dict[str, set[str]] = {ROOT: set()}
        self._parents: dict[str, set[str]] = {ROOT: set()}
        self.remote_refs: dict[str, str] = {}
        self.local_pin: Optional[str] = None
        self._merge_records: list[_MergeRecord] = []
        self._head_state: dict[ObjectId, ObjectState] = {}
        self._state_cache: dict[str, dict[ObjectId, ObjectState]] = {}
        self._lock = threading.RLock()

    # -- bookkeeping helpers -------------------------------------------------

    def _add_vertex(self, v: str) -> None:
        if v not in self._vertices:
            self._vertices[v] = None
            self._children[v] = set()
            self._parents[v] = set()

    def _add_edge(self, edge: Edge) -> None:
        self._edges[(edge.from_version, edge.to_version)] = edge
        self._children[edge.from_version].add(edge.to_version)
        self._parents[edge.to_version].add(edge.from_version)

    def _remove_edge(self, frm: str, to: str) -> None:
        del self._edges[(frm, to)]
        self._children[frm].discard(to)
        self._parents[to].discard(frm)

    def _remove_vertex(self, v: str) -> None:
        del self._vertices[v]
        del self._children[v]
        del self._parents[v]
        self._next.pop(v, None)
        self._parent.pop(v, None)
        self._state_cache.pop(v, None)

    def _check_chain(self, from_version: str, to_version: str, edges: list[Edge]) -> None:
        if not edges:
            raise ValueError("put requires at least one edge")
        if edges[0].from_version != from_version or edges[-1].to_version != to_version:
            raise ValueError("edges do not span the declared versions")
        for a, b in zip(edges, edges[1:]):
            if a.to_version != b.from_version:
                raise ValueError("edges do not form a chain")

    def _append_chain(self, edges: list[Edge]) -> None:
        for edge in edges:
            self._add_vertex(edge.to_version)
            self._add_edge(edge)
            self._next[edge.from_version] = edge.to_version
            self._parent[edge.to_version] = edge.from_version

    def _mutated(self) -> None:
        if self.on_mutate is not None:
            self.on_mutate(self)

    # -- queries ---------------------------------------------------------------

    @property
    def vertices(self) -> set[str]:
        return set(self._vertices)

    def vertex_count(self) -> int:
        return len(self._vertices)

    def live_fork_count(self) -> int:
        return len(self._merge_records)

    def live_fork_vertices(self) -> int:
        """Fork/join vertices retained only because a merge branch is alive."""
        return len(
            {v for rec in self._merge_records for v in (rec.fork, rec.join)}
        )

    def edges(self) -> list[Edge]:
        return list(self._edges.values())

    def get(self, since: str) -> list[Edge]:
        """Ordered edges along the path from ``since`` to the head."""
        with self._lock:
            if since not in self._vertices:
                raise UnknownVersion(since)
            out: list[Edge] = []
            v = since
            while v != self.head:
                nxt = self._next[v]
                out.append(self._edges[(v, nxt)])
                v = nxt
            return out

    def get_with_head(self, since: str) -> tuple[list[Edge], str]:
        """Atomic (edges, head) pair for checkout under concurrent writers."""
        with self._lock:
            return self.get(since), self.head

    def state_at(self, version: str) -> dict[ObjectId, ObjectState]:
        """Materialize the object state at a version by folding edge deltas."""
        with self._lock:
            if version not in self._vertices:
                raise UnknownVersion(version)
            if version == self.head:
                return dict(self._head_state)
            # walk back to the nearest materialized ancestor
            chain: list[str] = []
            v = version
            while v != ROOT and v not in self._state_cache:
                chain.append(v)
                v = self._parent[v]
            state = dict(self._state_cache.get(v, {}))
            for u in reversed(chain):
                state = apply_delta(state, self._edges[(self._parent[u], u)].delta)
            self._cache_state(version, state)
            return dict(state)

    def _cache_state(self, version: str, state: dict[ObjectId, ObjectState]) -> None:
        self._state_cache[version] = dict(state)
        while len(self._state_cache) > 16:
            self._state_cache.pop(next(iter(self._state_cache)))

    # -- mutations ---------------------------------------------------------------

    def put(
        self,
        from_version: str,
        to_version: str,
        edges: Iterable[Edge],
        resolver=None,
        *,
        pin: bool = False,
        remote: Optional[str] = None,
    ) -> PutOutcome:
        """Receive a chain of changes; append on the fast path, merge otherwise.

        ``pin`` anchors the local snapshot at ``to_version`` and ``remote``
        records the sending peer there, both before the garbage collector
        runs, so a freshly merged branch cannot be collected out from under
        whoever needs to sync from it.
        """
        edges = list(edges)
        with self._lock:
            if from_version not in self._vertices:
                raise UnknownVersion(from_version)
            if to_version in self._vertices:
                # duplicate delivery of an already-known chain; only the
                # retention bookkeeping applies
                if pin:
                    self.local_pin = to_version
                if remote is not None:
                    self.remote_refs[remote] = to_version
                if self.gc_enabled:
                    self.collect()
                return PutOutcome(head=self.head, merged=False)
            self._check_chain(from_version, to_version, edges)
            if from_version == self.head:
                self._append_chain(edges)
                self.head = to_version
                for edge in edges:
                    self._head_state = apply_delta(self._head_state, edge.delta)
                outcome = PutOutcome(head=self.head, merged=False)
            else:
                from .merge import resolve  # deferred: merge builds on graph types

                result = resolve(self, from_version, to_version, edges, resolver)
                outcome = PutOutcome(
                    head=result.merged_version, merged=True, merge_stats=result.stats
                )
            if pin:
                self.local_pin = to_version
            if remote is not None:
                self.remote_refs[remote] = to_version
            if self.gc_enabled:
                self.collect()
            self._mutated()
            return outcome

    def _apply_merge(
        self,
        fork: str,
        incoming: list[Edge],
        edge_h_to_m: Edge,
        edge_b_to_m: Edge,
        merged_state: dict[ObjectId, ObjectState],
    ) -> None:
        """Install a resolved merge: the incoming branch plus both convergence edges."""
        fork_next = self._next.get(fork)  # keep the fork pointing down the main path
        self._append_chain(incoming)
        if fork_next is not None:
            self._next[fork] = fork_next
        merged = edge_h_to_m.to_version
        old_head = edge_h_to_m.from_version
        branch_end = edge_b_to_m.from_version
        self._add_vertex(merged)
        self._add_edge(edge_h_to_m)
        self._add_edge(edge_b_to_m)
        self._next[old_head] = merged
        self._next[branch_end] = merged
        self._parent[merged] = old_head
        branch_vertices = [e.to_version for e in incoming]
        self._merge_records.append(_MergeRecord(fork=fork, branch=branch_vertices, join=merged))
        self.head = merged
        self._head_state = dict(merged_state)

    def record_remote(self, remote: str, version: str) -> None:
        """Ledger update: ``remote`` is known to hold ``version``."""
        with self._lock:
            if version not in self._vertices:
                raise UnknownVersion(version)
            self.remote_refs[remote] = version
            if self.gc_enabled:
                self.collect()
            self._mutated()

    def pin_local(self, version: str) -> None:
        """Anchor the local snapshot's version so GC cannot strand it."""
        with self._lock:
            if version not in self._vertices:
                raise UnknownVersion(version)
            self.local_pin = version
            if self.gc_enabled:
                self.collect()
            self._mutated()

    # -- garbage collection -----------------------------------------------------

    def _roots(self) -> set[str]:
        roots = {ROOT, self.head}
        roots.update(self.remote_refs.values())
        if self.local_pin is not None:
            roots.add(self.local_pin)
        return roots

    def _retained(self, roots: set[str]) -> set[str]:
        retained = set(roots)
        changed = True
        while changed:
            changed = False
            for rec in self._merge_records:
                if rec.fork in retained and rec.join in retained:
                    continue
                if any(v in retained for v in rec.branch):
                    before = len(retained)
                    retained.add(rec.fork)
                    retained.add(rec.join)
                    if len(retained) != before:
                        changed = True
        return retained

    def collect(self) -> GcReport:
        """Drop every version no peer needs, splicing its edges into one.

        Unreferenced conflict branches are deleted outright; fork and join
        vertices survive until every branch hanging off them is gone.  The
        folded state from the root to the head (and to every retained
        version) is unchanged.
        """
        with self._lock:
            deleted = 0
            merged = 0
            progress = True
            while progress:
                progress = False
                roots = self._roots()
                retained = self._retained(roots)
                # delete one branch with no retained vertex left; a branch that
                # still anchors a nested fork is skipped until that one is gone
                for rec in list(self._merge_records):
                    if any(v in retained for v in rec.branch):
                        continue
                    chain = [rec.fork] + rec.branch + [rec.join]
                    chain_edges = set(zip(chain, chain[1:]))
                    incident = {
                        (a, b)
                        for v in rec.branch
                        for (a, b) in self._edges
                        if a == v or b == v
                    }
                    if incident - chain_edges:
                        continue
                    for a, b in chain_edges:
                        if (a, b) in self._edges:
                            self._remove_edge(a, b)
                    for v in rec.branch:
                        if v in self._vertices:
                            self._remove_vertex(v)
                            deleted += 1
                    self._merge_records.remove(rec)
                    progress = True
                    break
                if progress:
                    continue
                # splice unreferenced pass-through vertices
                for v in sorted(self._vertices):
                    if v in retained:
                        continue
                    parents = self._parents[v]
                    children = self._children[v]
                    if len(parents) != 1 or len(children) != 1:
                        continue
                    p = next(iter(parents))
                    c = next(iter(children))
                    if (p, c) in self._edges:
                        continue  # would create a parallel edge; leave as is
                    e_in = self._edges[(p, v)]
                    e_out = self._edges[(v, c)]
                    spliced = Edge(p, c, compose(e_in.delta, e_out.delta))
                    self._remove_edge(p, v)
                    self._remove_edge(v, c)
                    self._add_edge(spliced)
                    if self._next.get(p) == v:
                        self._next[p] = c
                    if self._parent.get(c) == v:
                        self._parent[c] = p
                    for rec in self._merge_records:
                        if v in rec.branch:
                            rec.branch.remove(v)
                    self._remove_vertex(v)
                    deleted += 1
                    merged += 1
                    progress = True
                    break
            self._state_cache = {
                k: s for k, s in self._state_cache.items() if k in self._vertices
            }
            return GcReport(versions_deleted=deleted, edges_merged=merged)

    # -- export -------------------------------------------------------------------

    def to_dot(self) -> str:
        """DOT rendering: root boxed, head bold, ledger entries labeled."""
        with self._lock:
            ref_labels: dict[str, list[str]] = {}
            for name, v in sorted(self.remote_refs.items()):
                ref_labels.setdefault(v, []).append(name)
            lines = [f'digraph "{self.type_name}" {{']
            for v in self._vertices:
                label = "ROOT" if v == ROOT else v[:8]
                attrs = []
                if v == ROOT:
                    attrs.append("shape=box")
                if v == self.head:
                    attrs.append("style=bold")
                if v in ref_labels:
                    label += "\\n" + ",".join(ref_labels[v])
                attrs.append(f'label="{label}"')
                lines.append(f'  "{v}" [{", ".join(attrs)}];')
            for (frm, to), edge in self._edges.items():
                lines.append(f'  "{frm}" -> "{to}" [label="{len(edge.delta)}"];')
            lines.append("}")
            return "\n".join(lines)


def squash(edges: list[Edge]) -> Delta:
    """Compose a chain of edges into the single equivalent delta."""
    return compose_all(e.delta for e in edges)
