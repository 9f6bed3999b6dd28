import pytest
from hypothesis import given, strategies as st

from ipcsim.errors import Exhausted
from ipcsim.identifiers import (Apn, ConnectionId, IdAllocator, QosCube, QosRequirements,
                                cube_satisfies, select_cube)

CUBES = [QosCube(1, reliable=False), QosCube(2, reliable=True, ordered=True)]


def test_smallest_free_policy():
    ids = IdAllocator()
    assert ids.allocate() == 1
    assert ids.allocate() == 2
    ids.release(1)
    assert ids.allocate() == 1
    assert ids.allocate() == 3


def test_release_then_reuse_after_full_deallocation():
    ids = IdAllocator()
    got = [ids.allocate() for _ in range(4)]
    for v in got:
        assert ids.release(v)
    assert len(ids) == 0
    assert ids.allocate() == 1
    assert ids.release(99) is False


def test_exhaustion():
    ids = IdAllocator(capacity=2)
    ids.allocate(), ids.allocate()
    with pytest.raises(Exhausted):
        ids.allocate()


@given(st.lists(st.tuples(st.booleans(), st.integers(1, 20)), max_size=80))
def test_allocator_matches_reference_model(ops):
    ids = IdAllocator(capacity=1000)
    used = set()
    for alloc, v in ops:
        if alloc:
            expected = min(set(range(1, 1001)) - used)
            assert ids.allocate() == expected
            used.add(expected)
        else:
            assert ids.release(v) == (v in used)
            used.discard(v)
    assert ids.in_use() == sorted(used)


def test_connection_ids_differ_for_two_flows_between_same_pair():
    ceps = IdAllocator()
    a, b = ceps.allocate(), ceps.allocate()
    assert a != b
    assert ConnectionId(a, 7, 1) != ConnectionId(b, 7, 1)
    assert str(ConnectionId(3, 4, 2)) == "3-4-2"


def test_select_cube_examples():
    assert select_cube(QosRequirements(reliable=True), CUBES) == 2
    assert select_cube(QosRequirements(), CUBES) == 1
    only = [QosCube(1, max_delay=10_000_000)]
    assert select_cube(QosRequirements(max_delay=5_000_000), only) is None
    with pytest.raises(ValueError):
        select_cube(QosRequirements(), [])


def test_management_cube_never_selected():
    assert select_cube(QosRequirements(), [QosCube(0), QosCube(3)]) == 3


@given(st.booleans(), st.booleans(), st.one_of(st.none(), st.integers(1, 50)),
       st.one_of(st.none(), st.integers(1, 10**7)))
def test_selected_cube_satisfies_and_is_lowest(rel, ordd, delay, bw):
    cubes = [QosCube(i, reliable=i % 2 == 0, ordered=i % 3 == 0, max_delay=i * 5,
                     avg_bandwidth=i * 10**6) for i in range(1, 9)]
    req = QosRequirements(rel or None, ordd or None, delay, bw)
    got = select_cube(req, cubes)
    ok = [c.id for c in cubes if cube_satisfies(c, req)]
    assert got == (min(ok) if ok else None)


def test_apn_parse():
    assert Apn.parse("B") == Apn("B")
    assert str(Apn.parse("B#2")) == "B#2"
    with pytest.raises(ValueError):
        Apn("")
