"""Benchmark workloads: a small multiplayer-race fixture driven on the simulator.

Three node roles mirror a typical deployment: a producer simulating the world
at a fast tick (authoritative), actors that pull, act, commit, and push on a
slower tick, and observers that only pull.  Operation latencies combine the
injected link latency with a deterministic work-based compute model, so runs
are reproducible bit-for-bit while still showing how costs scale with state
size, conflicts, and topology.
"""

from __future__ import annotations

import random
import statistics
from dataclasses import dataclass
from typing import Iterable, Optional

from .dataframe import Dataframe
from .errors import ConfigError
from .graph import seeded_id_factory
from .merge import Resolution, Resolver
from .model import ObjectState, TypeDescriptor, TypeRegistry, values_equal
from .sim import REQUEST, SLEEP, SimNet
from . import wire

WORLD_WIDTH = 1000.0
WORLD_HEIGHT = 800.0
MAX_SPEED = 100.0
SHIP_RUNNING = 1
SHIP_WAITING = 0

# deterministic compute model (ms); scales with the (object, dimension) keys
# an operation actually processes
BASE_OP_MS = 0.05
PER_KEY_MS = 0.002


def work_cost(keys: int) -> float:
    return BASE_OP_MS + PER_KEY_MS * keys


def game_registry() -> TypeRegistry:
    """The canonical three-type schema used by benchmarks and tests."""
    return TypeRegistry(
        [
            TypeDescriptor(
                "Player", ("oid", "player_id", "ready", "winner"), primary_key="oid"
            ),
            TypeDescriptor(
                "Ship",
                ("oid", "player_id", "x", "y", "trips", "velocity", "state"),
                primary_key="oid",
            ),
            TypeDescriptor("Asteroid", ("oid", "x", "y", "velocity"), primary_key="oid"),
        ]
    )


def producer_policy(max_speed: float = MAX_SPEED) -> Resolver:
    """The authoritative node's merge policy.

    On a conflicting ship, a velocity set by the other side is adopted when it
    honors the speed limit and discarded otherwise; every other dimension both
    sides wrote keeps this node's value.  Asteroids and players follow the
    keep-mine rule for contested dimensions.  Create/delete disagreements keep
    this node's verdict wholesale.
    """

    def changed(original: Optional[ObjectState], current: ObjectState, dim: str) -> bool:
        if original is None:
            return True
        return not values_equal(original.values.get(dim), current.values.get(dim))

    def resolver(conflicts, original_state, my_state, their_state):
        res = Resolution()
        for c in conflicts:
            if c.existence_contested:
                if c.mine is None:
                    res.delete_object(c.id)
                else:
                    res.keep_object(c.mine)
                continue
            decisions = {}
            for dim in c.mine.values:
                theirs_set = changed(c.original, c.theirs, dim)
                mine_set = changed(c.original, c.mine, dim)
                if c.id.type_name == "Ship" and dim == "velocity" and theirs_set:
                    candidate = c.theirs.values[dim]
                    if isinstance(candidate, (int, float)) and abs(candidate) <= max_speed:
                        decisions[dim] = candidate
                    else:
                        decisions[dim] = c.mine.values[dim]
                elif theirs_set and mine_set:
                    decisions[dim] = c.mine.values[dim]
            if decisions:
                res.set_fields(c.id, decisions)
        return res.delta()

    return resolver


@dataclass(frozen=True)
class OpSample:
    role: str
    node: str
    op: str
    at_ms: float
    elapsed_ms: float
    n_bytes: int = 0


@dataclass(frozen=True)
class CensusSample:
    at_ms: float
    type_name: str
    vertex_count: int
    fork_vertices: int


ROLES = ("producer", "actor", "observer")
OPERATIONS = ("push", "fetch", "pull", "receive_request", "commit", "checkout")


class MetricsLog:
    """Append-only log of operation latencies and version-graph census samples."""

    def __init__(self):
        self.ops: list[OpSample] = []
        self.census: list[CensusSample] = []

    def add_op(self, role, node, op, at_ms, elapsed_ms, n_bytes=0):
        self.ops.append(OpSample(role, node, op, at_ms, elapsed_ms, n_bytes))

    def samples(self, role: Optional[str] = None, op: Optional[str] = None) -> list[float]:
        return [
            s.elapsed_ms
            for s in self.ops
            if (role is None or s.role == role) and (op is None or s.op == op)
        ]

    def median(self, role: str, op: str) -> Optional[float]:
        xs = self.samples(role, op)
        return statistics.median(xs) if xs else None

    def payload_bytes(self, role: Optional[str] = None, op: Optional[str] = None) -> int:
        return sum(
            s.n_bytes
            for s in self.ops
            if (role is None or s.role == role) and (op is None or s.op == op)
        )

    def latency_rows(self, n_objects: int, conflicts: bool) -> list[tuple]:
        rows = []
        for role in ROLES:
            for op in OPERATIONS:
                xs = sorted(self.samples(role, op))
                if xs:
                    median = f"{statistics.median(xs):.6f}"
                    p95 = f"{xs[min(len(xs) - 1, int(round(0.95 * (len(xs) - 1))))]:.6f}"
                else:
                    median = ""
                    p95 = ""
                rows.append((role, op, n_objects, int(conflicts), median, p95, len(xs)))
        return rows

    def latency_csv(self, n_objects: int, conflicts: bool) -> str:
        lines = ["role,operation,n_objects,conflicts,median_ms,p95_ms,samples"]
        for row in self.latency_rows(n_objects, conflicts):
            lines.append(",".join(str(x) for x in row))
        return "\n".join(lines) + "\n"

    def census_csv(self) -> str:
        lines = ["virtual_time_ms,type_name,vertex_count"]
        for s in self.census:
            lines.append(f"{s.at_ms:.3f},{s.type_name},{s.vertex_count}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ScenarioConfig:
    asteroid_count: int = 20
    actors: int = 1
    observers: int = 1
    rtt_ms: float = 72.0
    duration_ms: float = 30_000.0
    conflicts: bool = False  # observers commit their predictions, forcing merges
    seed: int = 0
    gc_enabled: bool = True
    census: bool = False
    producer_period_ms: float = 50.0
    actor_period_ms: float = 300.0
    observer_period_ms: float = 300.0
    velocity_change_every: int = 3

    def validate(self) -> None:
        if self.asteroid_count < 0 or self.actors < 0 or self.observers < 0:
            raise ConfigError("counts must be non-negative")
        if self.rtt_ms < 0 or self.duration_ms <= 0:
            raise ConfigError("rtt must be >= 0 and duration positive")
        for period in (self.producer_period_ms, self.actor_period_ms, self.observer_period_ms):
            if period <= 0:
                raise ConfigError("loop periods must be positive")


class _Node:
    """Shared plumbing for one simulated node: dataframe, rng, metric hooks."""

    def __init__(self, scenario: "Scenario", name: str, role: str, df: Dataframe):
        self.scenario = scenario
        self.name = name
        self.role = role
        self.df = df
        self.rng = random.Random(f"{scenario.cfg.seed}/{name}")

    @property
    def net(self) -> SimNet:
        return self.scenario.net

    def record(self, op: str, elapsed_ms: float, n_bytes: int = 0):
        self.scenario.metrics.add_op(self.role, self.name, op, self.net.now, elapsed_ms, n_bytes)

    # -- instrumented operations; each yields SLEEP for its modeled cost --------

    def commit(self):
        report = self.df.commit()
        cost = work_cost(report.keys_committed)
        self.record("commit", cost)
        yield (SLEEP, cost)

    def checkout(self):
        report = self.df.checkout()
        cost = work_cost(report.keys_applied)
        self.record("checkout", cost)
        yield (SLEEP, cost)

    def push(self, remote: str):
        request = self.df.build_push(remote)
        if request is None:
            # quiescent: nothing staged or committed, no message at all
            self.record("push", BASE_OP_MS, 0)
            yield (SLEEP, BASE_OP_MS)
            return
        build_cost = work_cost(sum(p.delta.key_count() for p in request.payloads))
        yield (SLEEP, build_cost)
        started = self.net.now - build_cost
        address = self.df.remotes[remote].address
        frame = yield (REQUEST, address, wire.encode(request))
        response = wire.decode(frame, self.df.registry)
        report = self.df.complete_push(remote, request, response)
        self.record("push", self.net.now - started, report.bytes_sent)

    def fetch_and_merge(self, remote: str):
        """One pull's network + merge half; checkout is the caller's business."""
        request = self.df.build_fetch(remote)
        started = self.net.now
        address = self.df.remotes[remote].address
        frame = yield (REQUEST, address, wire.encode(request))
        fetch_elapsed = self.net.now - started
        response = wire.decode(frame, self.df.registry)
        report = self.df.complete_fetch(remote, response)
        attach_cost = work_cost(report.keys_received)
        merge_cost = work_cost(report.merge_keys) if report.merged_types else 0.0
        self.record("fetch", fetch_elapsed, report.bytes_received)
        self.record("pull", fetch_elapsed + attach_cost + merge_cost, report.bytes_received)
        yield (SLEEP, attach_cost + merge_cost)


class Scenario:
    """A wired-up topology: one producer, N actors, M observers on a SimNet."""

    def __init__(self, cfg: ScenarioConfig):
        cfg.validate()
        self.cfg = cfg
        self.registry = game_registry()
        self.metrics = MetricsLog()
        self.net = SimNet(seed=cfg.seed, default_one_way_ms=cfg.rtt_ms / 2.0)
        self.dataframes: dict[str, Dataframe] = {}
        self.producer = self._make_node("producer", "producer", census=cfg.census)
        self.net.add_node(
            "producer", server_fn=self._server_fn(self.producer), loop=self._producer_loop()
        )
        for i in range(cfg.actors):
            node = self._make_node(f"actor{i}", "actor")
            node.df.add_remote("origin", "producer")
            self.net.add_node(node.name, loop=self._actor_loop(node), start_at=17.0 + 19.0 * i)
        for i in range(cfg.observers):
            node = self._make_node(f"observer{i}", "observer", types=("Ship", "Asteroid"))
            node.df.add_remote("origin", "producer")
            self.net.add_node(node.name, loop=self._observer_loop(node), start_at=11.0 + 13.0 * i)

    def _make_node(self, name, role, types=("Player", "Ship", "Asteroid"), census=False):
        rng = random.Random(f"{self.cfg.seed}/{name}/ids")
        on_mutate = None
        if census:
            on_mutate = lambda graph: self.metrics.census.append(
                CensusSample(
                    self.net.now,
                    graph.type_name,
                    graph.vertex_count(),
                    graph.live_fork_vertices(),
                )
            )
        if role == "producer":
            resolver = producer_policy()
        else:
            resolver = "keep_theirs"  # the authoritative copy wins locally
        df = Dataframe(
            name,
            self.registry,
            types=types,
            resolver=resolver,
            id_factory=seeded_id_factory(rng),
            key_factory=lambda: rng.getrandbits(48),
            gc_enabled=self.cfg.gc_enabled,
            on_graph_mutate=on_mutate,
        )
        self.dataframes[name] = df
        return _Node(self, name, role, df)

    def _server_fn(self, node: _Node):
        def serve(frame: bytes) -> tuple[bytes, float]:
            message = wire.decode(frame, self.registry)
            response = node.df.handle_message(message)
            served_keys = sum(
                p.delta.key_count() for p in message.payloads if p.delta is not None
            ) + sum(p.delta.key_count() for p in response.payloads if p.delta is not None)
            cost = work_cost(served_keys)
            node.record("receive_request", cost)
            return wire.encode(response), cost

        return serve

    # -- node loops ------------------------------------------------------------

    def _producer_loop(self):
        cfg = self.cfg
        node = self.producer
        df = node.df
        dt = cfg.producer_period_ms / 1000.0

        def loop():
            for _ in range(cfg.asteroid_count):
                df.add(
                    "Asteroid",
                    {
                        "x": node.rng.uniform(0.0, WORLD_WIDTH),
                        "y": node.rng.uniform(0.0, WORLD_HEIGHT),
                        "velocity": node.rng.uniform(20.0, 60.0),
                    },
                )
            yield from node.commit()
            tick = 0
            while True:
                tick += 1
                target = tick * cfg.producer_period_ms
                if target > cfg.duration_ms:
                    return
                yield (SLEEP, target - self.net.now)
                yield from node.checkout()
                known = {s.values["player_id"] for s in df.read_all("Ship")}
                for p in df.read_all("Player"):
                    if p.values["player_id"] not in known:
                        df.add(
                            "Ship",
                            {
                                "player_id": p.values["player_id"],
                                "x": node.rng.uniform(0.0, WORLD_WIDTH),
                                "y": WORLD_HEIGHT,
                                "trips": 0,
                                "velocity": 0.0,
                                "state": SHIP_RUNNING,
                            },
                        )
                        df.write(p.id, "ready", True)
                for s in df.read_all("Ship"):
                    if s.values["state"] != SHIP_RUNNING:
                        continue
                    y = s.values["y"] + s.values["velocity"] * dt
                    if y <= 0.0:
                        df.write(s.id, "y", WORLD_HEIGHT)
                        df.write(s.id, "trips", s.values["trips"] + 1)
                    else:
                        df.write(s.id, "y", y)
                for a in df.read_all("Asteroid"):
                    x = a.values["x"] + a.values["velocity"] * dt
                    if x >= WORLD_WIDTH or x <= 0.0:
                        x = max(0.0, min(WORLD_WIDTH, WORLD_WIDTH - x))
                    df.write(a.id, "x", x)
                yield from node.commit()

        return loop()

    def _actor_loop(self, node: _Node):
        cfg = self.cfg
        df = node.df

        def loop():
            yield from node.fetch_and_merge("origin")
            yield from node.checkout()
            df.add("Player", {"player_id": node.name, "ready": False, "winner": False})
            yield from node.commit()
            yield from node.push("origin")
            tick = 0
            started = self.net.now
            while True:
                tick += 1
                target = started + tick * cfg.actor_period_ms
                if target > cfg.duration_ms:
                    return
                yield (SLEEP, target - self.net.now)
                yield from node.fetch_and_merge("origin")
                yield from node.checkout()
                if tick % cfg.velocity_change_every == 0:
                    mine = [
                        s
                        for s in df.read_all("Ship")
                        if s.values["player_id"] == node.name
                    ]
                    if mine:
                        speed = node.rng.choice([-90.0, -75.0, -60.0, -45.0])
                        df.write(mine[0].id, "velocity", speed)
                yield from node.commit()
                yield from node.push("origin")

        return loop()

    def _observer_loop(self, node: _Node):
        cfg = self.cfg
        df = node.df
        dt = cfg.observer_period_ms / 1000.0

        def loop():
            yield from node.fetch_and_merge("origin")
            yield from node.checkout()
            tick = 0
            started = self.net.now
            while True:
                tick += 1
                target = started + tick * cfg.observer_period_ms
                if target > cfg.duration_ms:
                    return
                yield (SLEEP, target - self.net.now)
                if cfg.conflicts:
                    # predict motion locally and commit, forcing merges on pull
                    for a in df.read_all("Asteroid"):
                        df.write(a.id, "x", a.values["x"] + a.values["velocity"] * dt)
                    yield from node.commit()
                yield from node.fetch_and_merge("origin")
                yield from node.checkout()

        return loop()

    def run(self) -> MetricsLog:
        self.net.run_until(self.cfg.duration_ms + 1.0)
        return self.metrics


def run_scenario(cfg: ScenarioConfig) -> MetricsLog:
    """Execute all node loops on the virtual clock and return the metrics."""
    return Scenario(cfg).run()


def run_version_census(
    n_actors: int = 1,
    producer_commits: int = 2000,
    *,
    gc_enabled: bool = True,
    observers: int = 1,
    asteroid_count: int = 20,
    seed: int = 0,
) -> MetricsLog:
    """Track the vertex count at the authoritative node after every graph operation."""
    cfg = ScenarioConfig(
        asteroid_count=asteroid_count,
        actors=n_actors,
        observers=observers,
        duration_ms=producer_commits * 50.0,
        gc_enabled=gc_enabled,
        census=True,
        seed=seed,
    )
    return run_scenario(cfg)


def latency_table(
    asteroid_counts: Iterable[int] = (20, 100, 200),
    *,
    rtt_ms: float = 72.0,
    conflicts: bool = False,
    duration_ms: float = 30_000.0,
    seed: int = 0,
) -> str:
    """CSV of median/p95 latencies per role and operation across state sizes."""
    lines = ["role,operation,n_objects,conflicts,median_ms,p95_ms,samples"]
    for count in asteroid_counts:
        cfg = ScenarioConfig(
            asteroid_count=count,
            rtt_ms=rtt_ms,
            conflicts=conflicts,
            duration_ms=duration_ms,
            seed=seed,
        )
        metrics = run_scenario(cfg)
        for row in metrics.latency_rows(count, conflicts):
            lines.append(",".join(str(x) for x in row))
    return "\n".join(lines) + "\n"
