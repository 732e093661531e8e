import random

import pytest

from objsync.model import (
    DEL,
    Delta,
    MOD,
    NEW,
    ObjectDelta,
    ObjectId,
    ObjectState,
    TypeDescriptor,
    TypeRegistry,
)

VALUE_POOL = [0, 1, -3, 42, 2.5, -1.25, 0.0, -0.0, True, False, "a", "bb", None]


@pytest.fixture
def registry():
    return TypeRegistry(
        [
            TypeDescriptor("Thing", ("oid", "a", "b", "c"), primary_key="oid"),
            TypeDescriptor("Pair", ("x", "y")),
        ]
    )


def thing(key) -> ObjectId:
    return ObjectId("Thing", key)


def thing_state(key, **dims) -> ObjectState:
    values = {"oid": key, "a": None, "b": None, "c": None}
    values.update(dims)
    return ObjectState(thing(key), values)


def random_value(rng: random.Random):
    return rng.choice(VALUE_POOL)


def random_state(rng: random.Random, n_objects=4) -> dict:
    state = {}
    for key in range(rng.randint(0, n_objects)):
        state[thing(key)] = thing_state(
            key, a=random_value(rng), b=random_value(rng), c=random_value(rng)
        )
    return state


def random_delta(rng: random.Random, n_objects=4) -> Delta:
    """Arbitrary delta, including tombstones for absent objects; apply is total."""
    entries = {}
    for key in range(n_objects):
        if rng.random() < 0.45:
            continue
        kind = rng.choice([NEW, MOD, DEL])
        if kind == NEW:
            entries[thing(key)] = ObjectDelta(
                NEW,
                {
                    "oid": key,
                    "a": random_value(rng),
                    "b": random_value(rng),
                    "c": random_value(rng),
                },
            )
        elif kind == MOD:
            dims = rng.sample(["a", "b", "c"], rng.randint(1, 3))
            entries[thing(key)] = ObjectDelta(MOD, {d: random_value(rng) for d in dims})
        else:
            entries[thing(key)] = ObjectDelta(DEL)
    return Delta(entries)


def sensible_delta(rng: random.Random, state: dict, n_objects=5) -> Delta:
    """Delta that makes sense against a given state: news create, mods/dels touch
    existing objects.  Used for history-style tests."""
    entries = {}
    for key in range(n_objects):
        oid = thing(key)
        present = oid in state
        roll = rng.random()
        if present and roll < 0.25:
            entries[oid] = ObjectDelta(DEL)
        elif present and roll < 0.75:
            dims = rng.sample(["a", "b", "c"], rng.randint(1, 3))
            entries[oid] = ObjectDelta(MOD, {d: random_value(rng) for d in dims})
        elif not present and roll < 0.5:
            entries[oid] = ObjectDelta(
                NEW,
                {
                    "oid": key,
                    "a": random_value(rng),
                    "b": random_value(rng),
                    "c": random_value(rng),
                },
            )
    return Delta(entries)


def states_equal(a: dict, b: dict) -> bool:
    return a == b
