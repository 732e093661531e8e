"""Deterministic in-process multi-node simulator.

Nodes are generator functions driven by a virtual clock: they yield commands
(send a request, sleep) and are resumed when the simulated network delivers
the response or the timer fires.  All latencies and compute costs are modeled
deterministically, so one seed always produces one event trace, one set of
final states, and byte-identical metric logs.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass
from typing import Callable, Generator, Optional

from .errors import ConfigError

# commands a node generator may yield
REQUEST = "request"
SLEEP = "sleep"

# server callable: raw frame in -> (raw frame out, modeled compute ms)
ServerFn = Callable[[bytes], tuple[bytes, float]]

NodeLoop = Generator[tuple, object, None]


@dataclass
class SimNode:
    name: str
    server_fn: Optional[ServerFn] = None
    loop: Optional[NodeLoop] = None


class SimNet:
    """Virtual-clock message fabric with per-link one-way latency."""

    def __init__(self, seed: int = 0, default_one_way_ms: float = 36.0):
        self.rng = random.Random(f"simnet/{seed}")
        self.default_one_way_ms = default_one_way_ms
        self.now = 0.0
        self._queue: list[tuple[float, int, Callable[[], None]]] = []
        self._seq = 0
        self._links: dict[tuple[str, str], float] = {}
        self.nodes: dict[str, SimNode] = {}

    def set_link(self, src: str, dst: str, one_way_ms: float) -> None:
        self._links[(src, dst)] = one_way_ms
        self._links[(dst, src)] = one_way_ms

    def latency(self, src: str, dst: str) -> float:
        return self._links.get((src, dst), self.default_one_way_ms)

    def add_node(
        self,
        name: str,
        server_fn: Optional[ServerFn] = None,
        loop: Optional[NodeLoop] = None,
        start_at: float = 0.0,
    ) -> SimNode:
        if name in self.nodes:
            raise ConfigError(f"duplicate node name: {name}")
        node = SimNode(name, server_fn=server_fn, loop=loop)
        self.nodes[name] = node
        if loop is not None:
            self.schedule(start_at, lambda: self._resume(node, None))
        return node

    def schedule(self, at: float, action: Callable[[], None]) -> None:
        self._seq += 1
        heapq.heappush(self._queue, (at, self._seq, action))

    def _resume(self, node: SimNode, value) -> None:
        try:
            command = node.loop.send(value)
        except StopIteration:
            return
        self._dispatch(node, command)

    def _dispatch(self, node: SimNode, command: tuple) -> None:
        kind = command[0]
        if kind == SLEEP:
            _, duration = command
            self.schedule(self.now + max(0.0, duration), lambda: self._resume(node, None))
        elif kind == REQUEST:
            _, dst, frame = command
            self._send_request(node, dst, frame)
        else:
            raise ConfigError(f"node {node.name} yielded unknown command {kind!r}")

    def _send_request(self, src: SimNode, dst: str, frame: bytes) -> None:
        target = self.nodes.get(dst)
        if target is None or target.server_fn is None:
            raise ConfigError(f"no server at node {dst!r}")
        deliver_at = self.now + self.latency(src.name, dst)

        def deliver():
            response, compute_ms = target.server_fn(frame)
            arrive_at = self.now + compute_ms + self.latency(dst, src.name)
            self.schedule(arrive_at, lambda: self._resume(src, response))

        self.schedule(deliver_at, deliver)

    def run_until(self, t_end: float) -> None:
        while self._queue and self._queue[0][0] <= t_end:
            at, _, action = heapq.heappop(self._queue)
            self.now = max(self.now, at)
            action()
        self.now = max(self.now, t_end)

    def run(self) -> None:
        while self._queue:
            at, _, action = heapq.heappop(self._queue)
            self.now = max(self.now, at)
            action()
