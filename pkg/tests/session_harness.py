"""Randomized multi-node harness checking the four session guarantees.

Topology: one hub plus N spokes pushing/fetching it over an in-process
transport.  Each node writes only its own slice of the key space (its own
private objects plus its own dimension of shared "arena" objects), so a
read-your-writes violation can never be masked by another node legitimately
overwriting the same key.  Merges still occur constantly because the arena
objects are touched by every node.

Checks:
  read-your-writes   every read of a key a node wrote returns its last write
  monotonic reads    the birth order of observed snapshot versions never retreats
  writes-follow-reads each commit edge leaves from the version the committer observed
  monotonic writes   each commit chains at or after the previous commit's version
"""

from __future__ import annotations

import itertools
import random

from objsync.dataframe import Dataframe
from objsync.graph import seeded_id_factory
from objsync.model import ObjectId, ObjectState, TypeDescriptor, TypeRegistry
from objsync.transport import direct_transport

ARENA_KEYS = (100, 101)
NODE_DIMS = ("a", "b", "c")


class SessionViolation(AssertionError):
    pass


class SessionTrial:
    def __init__(self, seed: int, ops: int = 40):
        self.rng = random.Random(f"session/{seed}")
        self.ops = ops
        self.registry = TypeRegistry(
            [TypeDescriptor("Thing", ("oid", "a", "b", "c"), primary_key="oid")]
        )
        self.birth_counter = itertools.count()
        self.births: dict[tuple[str, str], dict[str, int]] = {}
        self.put_trace: dict[str, list[tuple[str, str]]] = {}
        self.nodes: dict[str, Dataframe] = {}
        self.dims: dict[str, str] = {}
        names = ["hub", "spoke1", "spoke2"]
        for i, name in enumerate(names):
            self.nodes[name] = self._make_node(name)
            self.dims[name] = NODE_DIMS[i]
        transport = direct_transport({"hub": self.nodes["hub"]})
        for name in names[1:]:
            self.nodes[name].transport = transport
            self.nodes[name].add_remote("hub", "hub")
        # mutable logs for the assertions
        self.writes: dict[str, dict[tuple[ObjectId, str], object]] = {n: {} for n in names}
        self.deleted: dict[str, set[ObjectId]] = {n: set() for n in names}
        self.observed: dict[str, list[int]] = {n: [] for n in names}
        self.last_commit_to: dict[str, str | None] = {n: None for n in names}
        self.private_seq = {n: itertools.count() for n in names}
        hub = self.nodes["hub"]
        for key in ARENA_KEYS:
            hub.create(ObjectState(ObjectId("Thing", key), {"oid": key, "a": 0, "b": 0, "c": 0}))
        hub.commit()

    def _make_node(self, name: str) -> Dataframe:
        rng = random.Random(f"{name}/{self.rng.random()}")
        df = Dataframe(
            name,
            self.registry,
            types=["Thing"],
            resolver="keep_mine",
            id_factory=seeded_id_factory(rng),
            key_factory=lambda: rng.getrandbits(40),
            gc_enabled=True,
            on_graph_mutate=lambda g, node=name: self._record_births(node, g),
        )
        graph = df.graphs["Thing"]
        original_put = graph.put
        trace = self.put_trace.setdefault(name, [])

        def traced_put(from_version, to_version, edges, *args, **kwargs):
            trace.append((from_version, to_version))
            return original_put(from_version, to_version, edges, *args, **kwargs)

        graph.put = traced_put
        return df

    def _record_births(self, node: str, graph) -> None:
        # graph._vertices preserves insertion order, a linear extension of the
        # DAG order (every vertex enters as a descendant of existing ones)
        table = self.births.setdefault((node, graph.type_name), {})
        for v in graph._vertices:
            if v not in table:
                table[v] = next(self.birth_counter)

    def _birth(self, node: str, version: str) -> int:
        return self.births.get((node, "Thing"), {}).get(version, -1)

    # -- op implementations -------------------------------------------------------

    def _do_write(self, name: str) -> None:
        df = self.nodes[name]
        if self.rng.random() < 0.3:
            key = 10 * (1 + list(self.nodes).index(name)) + next(self.private_seq[name])
            oid = ObjectId("Thing", key)
            value = self.rng.randint(0, 999)
            df.create(ObjectState(oid, {"oid": key, "a": value, "b": value, "c": value}))
            for d in NODE_DIMS:
                self.writes[name][(oid, d)] = value
            self.deleted[name].discard(oid)
            return
        candidates = [
            s.id
            for s in df.read_all("Thing")
            if s.id.key in ARENA_KEYS or (s.id, self.dims[name]) in self.writes[name]
        ]
        if not candidates:
            return
        oid = self.rng.choice(candidates)
        value = self.rng.randint(0, 999)
        df.write(oid, self.dims[name], value)
        self.writes[name][(oid, self.dims[name])] = value

    def _do_delete_private(self, name: str) -> None:
        df = self.nodes[name]
        own = [
            oid
            for (oid, _d) in self.writes[name]
            if oid.key not in ARENA_KEYS and df._snapshot("Thing").is_visible(oid)
        ]
        if not own:
            return
        oid = self.rng.choice(own)
        df.delete(oid)
        self.deleted[name].add(oid)
        self.writes[name] = {
            k: v for k, v in self.writes[name].items() if k[0] != oid
        }

    def _do_commit(self, name: str) -> None:
        df = self.nodes[name]
        snap = df._snapshot("Thing")
        observed_before = snap.version
        report = df.commit()
        if "Thing" not in report.versions:
            return
        new_version = report.versions["Thing"]
        # writes follow reads: the committed chain left from the observed version
        sent_from, sent_to = self.put_trace[name][-1]
        if sent_to != new_version or sent_from != observed_before:
            raise SessionViolation(
                f"{name} committed an edge not anchored at its observed version"
            )
        # monotonic writes: this commit chains at or after the previous one
        prev = self.last_commit_to[name]
        if prev is not None and self._birth(name, observed_before) < self._birth(name, prev):
            raise SessionViolation(f"{name} commit went backwards")
        self.last_commit_to[name] = new_version

    def _do_checkout(self, name: str) -> None:
        self.nodes[name].checkout()

    def _do_sync(self, name: str) -> None:
        if name == "hub":
            return
        df = self.nodes[name]
        if self.rng.random() < 0.5:
            df.push("hub")
        else:
            df.fetch("hub")

    # -- invariant checks ---------------------------------------------------------

    def _check_read_your_writes(self, name: str) -> None:
        df = self.nodes[name]
        snap = df._snapshot("Thing")
        for (oid, dim), value in self.writes[name].items():
            if not snap.is_visible(oid):
                raise SessionViolation(f"{name} lost its own object {oid.canonical()}")
            got = df.read(oid, dim)
            if got != value or type(got) is not type(value):
                raise SessionViolation(
                    f"{name} read {got!r} for {oid.canonical()}.{dim}, wrote {value!r}"
                )
        for oid in self.deleted[name]:
            if snap.is_visible(oid):
                raise SessionViolation(f"{name} sees its deleted object {oid.canonical()}")

    def _check_monotonic_reads(self, name: str) -> None:
        version = self.nodes[name]._snapshot("Thing").version
        idx = self._birth(name, version)
        seq = self.observed[name]
        if seq and idx < seq[-1]:
            raise SessionViolation(f"{name} observed an older state after a newer one")
        seq.append(idx)

    def run(self) -> None:
        names = list(self.nodes)
        ops = [self._do_write, self._do_commit, self._do_checkout, self._do_sync,
               self._do_delete_private]
        weights = [4, 3, 3, 3, 1]
        for _ in range(self.ops):
            name = self.rng.choice(names)
            op = self.rng.choices(ops, weights)[0]
            op(name)
            self._check_read_your_writes(name)
            self._check_monotonic_reads(name)


def run_session_trials(n_trials: int, ops: int = 40, seed: int = 0) -> int:
    """Run randomized interleavings; returns the number of violations (0 = pass)."""
    violations = 0
    for trial in range(n_trials):
        SessionTrial(seed * 100_003 + trial, ops=ops).run()
    return violations
