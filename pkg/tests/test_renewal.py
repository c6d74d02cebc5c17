import itertools
import math
from collections import Counter

import pytest

from polymerlab.exact import BudgetError
from polymerlab.renewal import (PieceModel, compute_sequences,
                                contraction_iteration, verify_pi_bound,
                                verify_renewal)
from polymerlab.steps import make_distribution

SIMPLE = make_distribution("simple")
U2 = make_distribution("uniform_range", 2)


def _naive_sequences(pm, N):
    """Definition-level c_N and pi_N by enumerating whole paths."""
    sup, pmfv = pm.dist.as_lists()
    T = pm.piece_len
    c = 0.0
    pi = 0.0
    for seq in itertools.product(range(len(sup)), repeat=N * T):
        pos = [0]
        p = 1.0
        for j in seq:
            pos.append(pos[-1] + sup[j])
            p *= pmfv[j]
        X = 1.0
        for i in range(N):
            piece = pos[i * T:(i + 1) * T + 1]
            rel = [y - piece[0] for y in piece]
            if pm.mode == "saw":
                x = 1.0 if len(set(rel)) == T + 1 else 0.0
            else:
                cnt = Counter(rel)
                h = sum(v * v for v in cnt.values()) - (T + 1)
                x = math.exp(-pm.beta * (h - 2 * (cnt[0] - 1)))
            if pm.mu:
                x *= math.exp(pm.mu * rel[-1])
            X *= x
        prod_c = 1.0
        prod_p = 1.0
        for i in range(N - 1):
            p1 = pos[i * T:(i + 1) * T + 1]
            p2 = pos[(i + 1) * T:(i + 2) * T + 1]
            if pm.mode == "saw":
                u = 0.0 if set(p1) & set(p2) == {pos[(i + 1) * T]} else 1.0
            else:
                l1 = Counter(p1[1:])
                l2 = Counter(p2[1:])
                cross = 2 * sum(cnt * l1.get(y, 0) for y, cnt in l2.items())
                u = -math.expm1(-pm.beta * cross)
            prod_c *= 1.0 - u
            prod_p *= u
        c += p * X * prod_c
        pi += p * X * prod_p
    return c, pi


def test_worked_values_two_step_saw():
    seq = compute_sequences(PieceModel(SIMPLE, 2, "saw"), 4)
    assert seq.c[0] == 1.0
    assert seq.c[1] == pytest.approx(0.5, abs=1e-15)
    assert seq.c[2] == pytest.approx(1 / 8, abs=1e-15)
    assert seq.c[3] == pytest.approx(1 / 32, abs=1e-15)
    assert seq.pi[1] == seq.c[1]
    assert seq.pi[2] == pytest.approx(1 / 8, abs=1e-15)
    assert seq.pi[3] == pytest.approx(1 / 32, abs=1e-15)
    assert seq.eps == pytest.approx(1 / math.sqrt(2), abs=1e-15)


def test_renewal_residual_worked_example():
    seq = compute_sequences(PieceModel(SIMPLE, 2, "saw"), 3)
    # c_2 = c_1^2 - pi_2 and c_3 = c_1 c_2 - pi_2 c_1 + pi_3, residual zero
    assert seq.c[2] == pytest.approx(seq.c[1] ** 2 - seq.pi[2], abs=1e-15)
    assert verify_renewal(seq)[0] <= 1e-15


@pytest.mark.parametrize("dist", [SIMPLE, U2])
@pytest.mark.parametrize("mode,beta,mu", [("saw", 0.0, 0.0),
                                          ("domb_joyce", 0.3, 0.0),
                                          ("domb_joyce", 0.05, 0.2)])
def test_sequences_match_naive_enumeration(dist, mode, beta, mu):
    pm = PieceModel(dist, 2, mode, beta=beta, mu=mu)
    seq = compute_sequences(pm, 3)
    for N in (2, 3):
        c_naive, pi_naive = _naive_sequences(pm, N)
        assert seq.c[N] == pytest.approx(c_naive, abs=1e-13)
        assert seq.pi[N] == pytest.approx(pi_naive, abs=1e-13)


def test_renewal_identity_on_grid():
    for dist in (SIMPLE, U2):
        for T in (2, 3):
            for mode, beta in (("saw", 0.0), ("domb_joyce", 0.05),
                               ("domb_joyce", 0.3)):
                for mu in (0.0, 0.2):
                    N = 5 if len(dist.support) == 2 or T == 2 else 4
                    seq = compute_sequences(
                        PieceModel(dist, T, mode, beta=beta, mu=mu), N)
                    assert verify_renewal(seq)[0] <= 1e-12
                    assert verify_pi_bound(seq)[1] == []


def test_pi_bound_rows():
    seq = compute_sequences(PieceModel(SIMPLE, 2, "saw"), 3)
    rows, violations = verify_pi_bound(seq)
    assert violations == []
    m2, pi2, bound2 = rows[0]
    assert m2 == 2 and pi2 == pytest.approx(bound2 * (1 / math.sqrt(2)))
    m3, pi3, bound3 = rows[1]
    assert pi3 <= bound3  # 1/32 <= 1/16


def test_window_and_confinement_filter_pieces():
    free = compute_sequences(PieceModel(SIMPLE, 2, "saw"), 2)
    windowed = compute_sequences(
        PieceModel(SIMPLE, 2, "saw", window=(1.0, 0.0)), 2)
    # an exact-speed window keeps only the rightward straight piece
    assert windowed.c[1] == pytest.approx(0.25)
    # zero-margin confinement keeps pieces inside [0, endpoint]: of the two
    # straight pieces only the rightward one; margin 2 admits both
    tight = compute_sequences(PieceModel(SIMPLE, 2, mode="saw", delta=0.0), 2)
    assert tight.c[1] == pytest.approx(0.25)
    loose = compute_sequences(PieceModel(SIMPLE, 2, mode="saw", delta=2.0), 2)
    assert loose.c[1] == pytest.approx(0.5)
    assert free.c[2] >= windowed.c[2] - 1e-15


def test_forced_independence():
    seq = compute_sequences(PieceModel(SIMPLE, 2, "saw", force_u_zero=True), 5)
    for N in range(1, 6):
        assert seq.c[N] == pytest.approx(seq.c[1] ** N, rel=1e-12)
        if N >= 2:
            assert seq.pi[N] == 0.0
    res = contraction_iteration(seq, 0.2)
    assert res.hypothesis_ok
    assert res.z == pytest.approx(1.0, abs=1e-10)
    assert all(abs(a - 1.0) < 1e-9 for a in res.A)


def test_contraction_hypothesis_failure_is_flagged():
    seq = compute_sequences(PieceModel(SIMPLE, 2, "saw"), 4)
    res = contraction_iteration(seq, 0.1)   # eps = 1/sqrt(2) is too large
    assert not res.hypothesis_ok
    assert res.z is None


def test_contraction_weak_coupling():
    pm = PieceModel(SIMPLE, 2, "domb_joyce", beta=0.05)
    seq = compute_sequences(pm, 6)
    assert seq.eps < 0.35
    res = contraction_iteration(seq, 0.35)
    assert res.hypothesis_ok
    assert res.z == pytest.approx(1.0, abs=0.15)
    assert res.z_inverse_ok
    assert res.decay_rate is not None and res.decay_rate < 1.0


def test_budget_guards():
    with pytest.raises(BudgetError):
        compute_sequences(PieceModel(U2, 3, "saw"), 5, budget=10**6)
    with pytest.raises(BudgetError):
        compute_sequences(PieceModel(U2, 8, "saw"), 1)  # shape table too big


def test_piece_model_validation():
    with pytest.raises(ValueError):
        PieceModel(SIMPLE, 0, "saw")
    with pytest.raises(ValueError):
        PieceModel(SIMPLE, 2, "nope")
