import random

import pytest

from objsync.errors import UnknownVersion
from objsync.graph import Edge, ROOT, VersionGraph, seeded_id_factory
from objsync.merge import default_resolver
from objsync.model import (
    Delta,
    MOD,
    NEW,
    ObjectDelta,
    apply_delta,
    compose,
    fold,
)

from conftest import sensible_delta, thing


def make_graph(seed=0, gc=True, **kwargs):
    rng = random.Random(seed)
    return VersionGraph("Thing", id_factory=seeded_id_factory(rng), gc_enabled=gc, **kwargs)


def grow(graph, delta, frm=None):
    """Fast-forward the graph by one edge carrying ``delta``; returns the new head."""
    frm = graph.head if frm is None else frm
    to = graph.id_factory()
    graph.put(frm, to, [Edge(frm, to, delta)])
    return to


def delta_mod(key, **dims):
    return Delta({thing(key): ObjectDelta(MOD, dims)})


def delta_new(key, **dims):
    values = {"oid": key, "a": None, "b": None, "c": None}
    values.update(dims)
    return Delta({thing(key): ObjectDelta(NEW, values)})


# -- get -------------------------------------------------------------------------


def test_get_head_is_empty():
    g = make_graph()
    assert g.get(g.head) == []


def test_get_returns_ordered_edges_and_fold_reaches_head():
    g = make_graph(gc=False)
    d1, d2 = delta_new(1, a=1), delta_mod(1, a=2)
    grow(g, d1)
    grow(g, d2)
    edges = g.get(ROOT)
    assert [e.delta for e in edges] == [d1, d2]
    assert fold({}, (e.delta for e in edges)) == g.state_at(g.head)


def test_get_unknown_version_fails():
    g = make_graph()
    with pytest.raises(UnknownVersion):
        g.get("f" * 32)


# -- put --------------------------------------------------------------------------


def test_put_fast_forward_advances_head():
    g = make_graph()
    to = grow(g, delta_new(1, a=1))
    assert g.head == to
    assert g.state_at(to)[thing(1)].values["a"] == 1


def test_put_from_unknown_version_rejected():
    g = make_graph()
    with pytest.raises(UnknownVersion):
        g.put("a" * 32, "b" * 32, [Edge("a" * 32, "b" * 32, Delta.empty())])


def test_put_from_non_head_merges():
    g = make_graph()
    grow(g, delta_new(1, a=1))
    fork = g.head
    g.record_remote("pusher", fork)  # the pusher synced here, so the ledger keeps it
    grow(g, delta_mod(1, a=2))
    incoming_head = "c" * 32
    outcome = g.put(
        fork,
        incoming_head,
        [Edge(fork, incoming_head, delta_mod(1, b=9))],
        resolver=default_resolver("keep_mine"),
    )
    assert outcome.merged
    assert g.head == outcome.head
    merged = g.state_at(g.head)[thing(1)]
    assert merged.values["a"] == 2  # mine kept
    assert merged.values["b"] == 9  # theirs flowed in


def test_put_duplicate_chain_is_noop():
    g = make_graph()
    to = grow(g, delta_new(1, a=1))
    before = g.vertices
    outcome = g.put(ROOT, to, [Edge(ROOT, to, delta_new(1, a=1))])
    assert outcome.fast_forward and g.vertices == before


def test_put_validates_chain_shape():
    g = make_graph()
    with pytest.raises(ValueError):
        g.put(ROOT, "b" * 32, [Edge(ROOT, "a" * 32, Delta.empty())])


# -- state_at ------------------------------------------------------------------------


def test_state_at_root_is_empty():
    assert make_graph().state_at(ROOT) == {}


def test_state_at_head_equals_fold_of_get_root():
    rng = random.Random(11)
    g = make_graph(gc=False)
    state = {}
    for _ in range(6):
        d = sensible_delta(rng, state)
        state = apply_delta(state, d)
        grow(g, d)
    assert g.state_at(g.head) == state
    assert fold({}, (e.delta for e in g.get(ROOT))) == g.state_at(g.head)


def test_state_at_intermediate_version():
    g = make_graph(gc=False)
    v1 = grow(g, delta_new(1, a=1))
    grow(g, delta_mod(1, a=2))
    assert g.state_at(v1)[thing(1)].values["a"] == 1


# -- record_remote / ledger ------------------------------------------------------------


def test_record_remote_updates_ledger_and_collects():
    g = make_graph()
    v1 = grow(g, delta_new(1, a=1))
    v2 = grow(g, delta_mod(1, a=2))
    g.record_remote("peer", v2)
    assert g.remote_refs["peer"] == v2
    assert v1 not in g.vertices  # nothing referenced it, so it was spliced


def test_record_remote_requires_live_vertex():
    g = make_graph()
    with pytest.raises(UnknownVersion):
        g.record_remote("peer", "d" * 32)


# -- collect: the two canonical optimizer scenarios --------------------------------------


def test_collect_splices_unreferenced_chain_vertex():
    # ROOT -> v1 -> v2 with one peer at v2 and another at ROOT: v1 goes away
    # and a single composed edge carries both deltas
    g = make_graph(gc=False)
    d1, d2 = delta_new(1, a=1), delta_mod(1, a=2)
    v1 = grow(g, d1)
    v2 = grow(g, d2)
    g.remote_refs["node1"] = v2
    g.remote_refs["node2"] = ROOT
    before = g.state_at(g.head)
    report = g.collect()
    assert report.versions_deleted == 1 and report.edges_merged == 1
    assert v1 not in g.vertices
    assert g.vertices == {ROOT, v2}
    [edge] = g.edges()
    assert edge.delta == compose(d1, d2)
    assert g.state_at(g.head) == before


def test_collect_deletes_stale_conflict_branch_and_join():
    # main: ROOT -> v1 -> (merge join) -> v4; branch: ROOT -> b -> join.
    # Once the branch peer has pulled past it, the branch dies and the join is
    # spliced into a single composed edge.
    g = make_graph(gc=False)
    d1 = delta_new(1, a=1)
    v1 = grow(g, d1)
    b = "b" * 32
    outcome = g.put(
        ROOT, b, [Edge(ROOT, b, delta_new(2, a=5))], resolver=default_resolver("keep_mine")
    )
    join = outcome.head
    join_edge_delta = g.get(v1)[0].delta
    d4 = delta_mod(1, a=4)
    v4 = grow(g, d4)
    g.remote_refs["node1"] = v1
    g.remote_refs["node2"] = b
    g.collect()
    assert b in g.vertices and join in g.vertices  # branch still referenced
    g.remote_refs["node2"] = v4  # node2 pulled up to the head
    before = g.state_at(g.head)
    g.collect()
    assert b not in g.vertices and join not in g.vertices
    assert g.vertices == {ROOT, v1, v4}
    spliced = g.get(v1)
    assert len(spliced) == 1
    assert spliced[0].delta == compose(join_edge_delta, d4)
    assert g.state_at(g.head) == before


def test_collect_nothing_collectible():
    g = make_graph(gc=False)
    v1 = grow(g, delta_new(1, a=1))
    g.remote_refs["p"] = v1
    v2 = grow(g, delta_mod(1, a=2))
    g.remote_refs["q"] = v2
    report = g.collect()
    assert report.versions_deleted == 0 and report.edges_merged == 0


def test_collect_preserves_states_on_random_graphs():
    rng = random.Random(12)
    for _ in range(100):
        g = make_graph(seed=rng.randint(0, 10**9), gc=False)
        state = {}
        peers = ["p1", "p2", "p3"]
        for step in range(rng.randint(2, 10)):
            if rng.random() < 0.75 or len(g.vertices) < 2:
                d = sensible_delta(rng, state)
                state = apply_delta(state, d)
                grow(g, d)
            else:
                fork = rng.choice(sorted(g.vertices))
                incoming = sensible_delta(rng, g.state_at(fork))
                to = g.id_factory()
                g.put(
                    fork,
                    to,
                    [Edge(fork, to, incoming)],
                    resolver=default_resolver(rng.choice(["keep_mine", "keep_theirs"])),
                )
                state = g.state_at(g.head)
            if rng.random() < 0.5:
                g.remote_refs[rng.choice(peers)] = rng.choice(sorted(g.vertices))
        retained = {v for v in g.remote_refs.values()}
        before = {v: g.state_at(v) for v in retained | {g.head}}
        g.collect()
        for v, snap in before.items():
            assert g.state_at(v) == snap, "GC changed a retained state"


def test_collect_bounds_vertex_count():
    rng = random.Random(13)
    g = make_graph(seed=99)
    state = {}
    for i in range(50):
        d = sensible_delta(rng, state)
        state = apply_delta(state, d)
        grow(g, d)
        if i % 7 == 0:
            g.record_remote("p1", g.head)
        if i % 11 == 0:
            g.record_remote("p2", g.head)
        bound = len(g.remote_refs) + g.live_fork_vertices() + 2 + (1 if g.local_pin else 0)
        assert g.vertex_count() <= bound


def test_head_never_rolls_back():
    rng = random.Random(14)
    g = make_graph(seed=3)
    birth = {g.head: 0}
    heads = [g.head]
    state = {}
    for i in range(30):
        if rng.random() < 0.7:
            d = sensible_delta(rng, state)
            state = apply_delta(state, d)
            grow(g, d)
        else:
            fork = rng.choice(sorted(g.vertices))
            to = g.id_factory()
            g.put(
                fork,
                to,
                [Edge(fork, to, sensible_delta(rng, g.state_at(fork)))],
                resolver=default_resolver("keep_mine"),
            )
            state = g.state_at(g.head)
        assert g.head not in birth, "a superseded version became head again"
        birth[g.head] = i + 1
        heads.append(g.head)
    assert len(set(heads)) == len(heads)


def test_put_get_round_trip():
    g = make_graph(gc=False)
    d1 = delta_new(1, a=1)
    v1 = grow(g, d1)
    d2, d3 = delta_mod(1, a=2), delta_mod(1, b=3)
    mid = "1" * 32
    to = "2" * 32
    g.put(v1, to, [Edge(v1, mid, d2), Edge(mid, to, d3)])
    replayed = fold(g.state_at(v1), (e.delta for e in g.get(v1)))
    assert replayed == g.state_at(g.head)


def test_local_pin_protects_snapshot_version():
    g = make_graph()
    v1 = grow(g, delta_new(1, a=1))
    g.pin_local(v1)
    grow(g, delta_mod(1, a=2))
    grow(g, delta_mod(1, a=3))
    assert v1 in g.vertices  # a remote-less graph still keeps the pinned version
    g.pin_local(g.head)
    assert v1 not in g.vertices


# -- dot export ----------------------------------------------------------------------------


def test_dot_export_marks_root_head_and_remotes():
    g = make_graph(gc=False)
    v1 = grow(g, delta_new(1, a=1))
    g.remote_refs["peer"] = v1
    dot = g.to_dot()
    assert "digraph" in dot and "shape=box" in dot and "style=bold" in dot
    assert "peer" in dot
    assert 'label="1"' in dot  # edge labeled with its object count
