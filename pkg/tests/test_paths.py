import itertools
import math
import random
from collections import Counter

import pytest

from polymerlab.paths import (EnergyState, energy, energy_attraction, is_saw,
                              local_times, replay, strip_weight, WalkState)
from polymerlab.steps import make_distribution


def test_local_times_examples():
    assert local_times([0]) == {0: 1}
    assert local_times([0, 1, 0, 1]) == {0: 2, 1: 2}
    assert local_times([0, 1, 2, 3]) == {0: 1, 1: 1, 2: 1, 3: 1}
    with pytest.raises(ValueError):
        local_times([1, 2])


def test_energy_examples():
    assert energy([0, 1, 0, 1]).H == 4
    e = energy([0, 1, 0])
    assert (e.H, e.Hprime, e.G) == (2, 0, 6)
    e = energy([0, 1, 2, 3])
    assert (e.H, e.G) == (0, 2)


def test_neighbor_pairs_identity():
    for path in ([0, 1, 0], [0, 1, 2, 1], [0, -1, 0, 1, 0]):
        e = energy(path)
        counts = local_times(path)
        lo, hi = min(counts), max(counts)
        np_direct = 2 * sum(counts.get(x, 0) * counts.get(x + 1, 0)
                            for x in range(lo - 1, hi + 1))
        assert e.neighbor_pairs == np_direct


def test_is_saw():
    assert is_saw([0, 1, 2])
    assert not is_saw([0, 1, 0])
    assert is_saw([0, 2, 1, 3])


def test_attraction_examples():
    assert energy_attraction([0, 1, 0], 1.0, 0.5) == pytest.approx(2.5)
    # gamma = 0 reduces to pure repulsion
    assert energy_attraction([0, 1, 0, 1], 0.7, 0.0) == pytest.approx(0.7 * 4)
    # literal pair-count form equals canonical minus gamma (n+1)
    e = energy([0, 1, 0])
    literal = 1.0 * e.H - 0.25 * e.neighbor_pairs
    assert literal == pytest.approx(2.5 - 0.5 * 3)
    with pytest.raises(ValueError):
        energy_attraction([0, 1], 0.3, 0.3)
    with pytest.raises(ValueError):
        energy_attraction([0, 1], 0.3, -0.1)


def test_strip_weight_examples():
    assert strip_weight({0: 2, 1: 1}, 1) == pytest.approx(2.0 / 3.0)
    assert strip_weight({0: 1, 1: 1, 5: 1}, 3) == 1.0
    assert strip_weight({0: 2 * 2 + 2}, 2) == 0.0
    with pytest.raises(ValueError):
        strip_weight({0: 1}, 0)


def test_extend_examples():
    st = WalkState()
    st.extend(1)
    assert st.H == 0
    st.extend(-1)                      # back to the origin
    assert st.H == 2 and st.pos == 0
    assert st.G == 6
    assert st.energy_state() == energy([0, 1, 0])


def test_extend_undo_roundtrip():
    st = WalkState(strip_L=1)
    snap = (st.pos, dict(st.counts), st.H, st.G, st.neighbor_pairs, st.strip_w)
    for s in (1, 1, -1, -1, -1, 1):
        st.extend(s)
    for _ in range(6):
        st.undo()
    assert (st.pos, dict(st.counts), st.H, st.G, st.neighbor_pairs,
            st.strip_w) == snap


def _random_path(dist, n, rng):
    sup, pmfv = dist.as_lists()
    cum = [sum(pmfv[: i + 1]) for i in range(len(pmfv))]
    path = [0]
    for _ in range(n):
        u = rng.random()
        j = 0
        while cum[j] < u and j < len(sup) - 1:
            j += 1
        path.append(path[-1] + sup[j])
    return path


@pytest.mark.parametrize("family,L", [("simple", None), ("uniform_range", 2),
                                      ("geometric_tail", 3)])
def test_incremental_matches_batch_on_random_paths(family, L):
    dist = make_distribution(family, L)
    rng = random.Random(42)
    for _ in range(120):
        n = rng.randint(1, 160)
        path = _random_path(dist, n, rng)
        st = replay(path, strip_L=2)
        e = energy(path)
        assert st.energy_state() == e
        # H against the ordered double-sum definition
        H = sum(1 for i, j in itertools.product(range(n + 1), repeat=2)
                if i != j and path[i] == path[j]) if n <= 40 else e.H
        assert e.H == H
        # strip log-weight of the incremental state matches the batch product
        w = strip_weight(local_times(path), 2)
        if w > 0:
            assert math.log(w) == pytest.approx(st.log_strip_w, abs=1e-10)
        else:
            assert st.strip_w == 0.0


def test_strip_incremental_zero_signal():
    st = WalkState(strip_L=1)
    for s in (1, -1, 1, -1, 1, -1):   # origin visited 4 > 2L+1 = 3 times
        st.extend(s)
    assert st.strip_w == 0.0
    assert st.log_strip_w == -math.inf


def test_attraction_identity_grid_random_paths():
    dist = make_distribution("uniform_range", 2)
    rng = random.Random(7)
    for _ in range(200):
        path = _random_path(dist, rng.randint(1, 120), rng)
        e = energy(path)
        n1 = len(path)
        for beta, gamma in ((0.5, 0.0), (0.5, 0.2), (1.5, 1.4), (2.0, 0.3)):
            canonical = (beta - gamma) * e.H + 0.5 * gamma * e.G
            literal = beta * e.H - 0.5 * gamma * e.neighbor_pairs
            assert literal == pytest.approx(canonical - gamma * n1, abs=1e-10)


def test_strip_weight_vs_brute_force_small():
    # all simple paths of <= 4 steps against direct height enumeration
    for n in range(1, 5):
        for steps in itertools.product((-1, 1), repeat=n):
            path = [0]
            for s in steps:
                path.append(path[-1] + s)
            counts = local_times(path)
            for L in (1, 2):
                q = 2 * L + 1
                ok = sum(
                    1 for hs in itertools.product(range(q), repeat=n + 1)
                    if len({(site, h) for site, h in zip(path, hs)}) == n + 1)
                assert strip_weight(counts, L) == pytest.approx(
                    ok / q ** (n + 1), abs=1e-12)
