import itertools
from fractions import Fraction

import pytest

from lncapprox.gf import get_field
from lncapprox.metrics import apdd_overall, bounds
from lncapprox.oracle import EnvelopeError, min_apdd, min_apdd_receiver, min_completion
from lncapprox.schemes import ReplayScheme
from lncapprox.session import Session
from lncapprox.sfm import ChannelSpec, Sfm, gen_a1, gen_a2, gen_random, gen_theorem2, gen_theorem5


def replay(sfm, witness, q):
    f = get_field(q.bit_length() - 1)
    s = Session(sfm, ChannelSpec.uniform(sfm.n_receivers), f, ReplayScheme(witness))
    return s.run(len(witness))


def brute_completion(sfm, q, limit):
    """Try every schedule of every length up to ``limit``; independent of the oracle's pruning."""
    vecs = [v for v in itertools.product(range(q), repeat=sfm.k_packets) if any(v)]
    for length in range(1, limit + 1):
        for sched in itertools.combinations_with_replacement(vecs, length):
            if replay(sfm, list(sched), q).completed:
                return length
    return None


CASES = [
    (gen_theorem2(), 2, Fraction(3, 2)),
    (gen_a1(3), 2, Fraction(5, 3)),
    (gen_theorem5(2, 3), 2, Fraction(5, 4)),
    (Sfm.from_rows([[1, 1, 1]]), 3, Fraction(2)),
]


@pytest.mark.parametrize("sfm,u,d", CASES)
def test_known_optima_gf2(sfm, u, d):
    rc = min_completion(sfm)
    assert rc.value == u
    assert replay(sfm, rc.witness, 2).U == u
    rd = min_apdd(sfm)
    assert rd.value == d
    res = replay(sfm, rd.witness, 2)
    assert res.completed and apdd_overall(res, sfm) == d
    assert rd.value >= bounds(sfm).d_lower_all


@pytest.mark.parametrize("sfm", [gen_theorem2(), gen_a1(3), gen_theorem5(2, 2), Sfm.from_rows([[1, 0, 1], [0, 1, 1]])])
def test_completion_matches_brute_force(sfm):
    assert min_completion(sfm).value == brute_completion(sfm, 2, 4)


def test_gf2_gap_on_a1_4_closed_by_gf4():
    # only three nonzero vectors exist in GF(2)^2, so two slots cannot serve six pairs
    assert min_completion(gen_a1(4)).value == 3
    r4 = min_completion(gen_a1(4), get_field(2))
    assert r4.value == 2 == max(gen_a1(4).w)
    assert replay(gen_a1(4), r4.witness, 4).U == 2


def test_field_sweep_lower_bound():
    for seed in range(6):
        sfm = gen_random(4, 4, 0.5, seed)
        if not sfm.total_wants:
            continue
        r2 = min_completion(sfm)
        r4 = min_completion(sfm, get_field(2))
        assert r2.value >= r4.value >= max(sfm.w)
        assert r4.value == max(sfm.w)


def test_min_apdd_respects_lower_bound():
    for sfm in (gen_a2(3, 1), gen_a1(4)):
        r = min_apdd(sfm)
        assert r.value >= bounds(sfm).d_lower_all
        res = replay(sfm, r.witness, 2)
        assert apdd_overall(res, sfm) == r.value


def test_min_apdd_receiver():
    sfm = gen_theorem2()
    assert min_apdd_receiver(sfm, 2) == Fraction(3, 2)
    with pytest.raises(ValueError):
        min_apdd_receiver(Sfm.from_rows([[0, 0], [1, 1]]), 0)


def test_envelope_and_horizon():
    with pytest.raises(EnvelopeError):
        min_completion(gen_a1(7))
    with pytest.raises(EnvelopeError):
        min_apdd(Sfm.from_rows([[1, 0]] * 13))
    r = min_completion(Sfm.from_rows([[1, 1, 1]]), horizon=2)
    assert not r.feasible and r.value is None
    assert not min_apdd(Sfm.from_rows([[1, 1, 1]]), horizon=2).feasible
