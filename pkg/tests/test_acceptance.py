"""One check per acceptance criterion; each prints a PASS/FAIL line."""

import math
import random
import time
from fractions import Fraction
from pathlib import Path

import pytest

from lncapprox.cli import main as cli_main
from lncapprox.gf import EliminationState, get_field, peasant_mul, reduce_by_side_info
from lncapprox.metrics import (
    ApproxReport,
    apdd_overall,
    apdd_receiver,
    approximation_report,
    bounds,
    monte_carlo,
)
from lncapprox.oracle import min_apdd, min_apdd_receiver, min_completion
from lncapprox.schemes import ReplayScheme, cauchy_row, parse_scheme
from lncapprox.session import MemoryMode, Session
from lncapprox.sfm import ChannelSpec, Sfm, gen_a1, gen_random, gen_theorem2, gen_theorem5

from conftest import dense_rank, in_span

VERDICTS: list[str] = []
GF2, GF4, GF256 = get_field(1), get_field(2), get_field(8)


def verdict(n: int, ok: bool, detail: str):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    VERDICTS.append(line)
    print(line)
    assert ok, line


def session(sfm, spec, field, mode=MemoryMode.FULL, pe=0.0, seed=0):
    if isinstance(spec, str):
        spec = parse_scheme(spec).build(sfm, field)
    s = Session(sfm, ChannelSpec.uniform(sfm.n_receivers, pe), field, spec, mode, seed)
    return s, s.run()


@pytest.fixture(scope="module")
def mds_w4_run():
    sfm = Sfm.from_rows([[1, 1, 1, 1]])
    ch = ChannelSpec((0.5,))
    t0 = time.perf_counter()
    est = monte_carlo(sfm, ch, GF256, parse_scheme("mds"), trials=100_000, master_seed=2024, keep_trials=True)
    return sfm, ch, est, time.perf_counter() - t0


def test_criterion_1_throughput_mds(mds_w4_run):
    _, _, est, elapsed = mds_w4_run
    mean = float(est.mean_u_n[0])
    ok = abs(mean - 8.0) <= 0.06 and elapsed < 10.0 and est.truncated == 0
    verdict(1, ok, f"E[U_n]={mean:.4f} (target 8.0 +/- 0.06, se {est.se_u_n[0]:.4f}), {elapsed:.2f} s (< 10 s)")


def test_criterion_2_apdd_mds(mds_w4_run):
    sfm, ch, est, _ = mds_w4_run
    w = sfm.w[0]
    per_trial_equal = all(s == w * u for _, _, row in est.per_trial for _, u, s in row)
    rep = approximation_report(est, bounds(sfm, ch))
    ratio = rep.apdd[0]
    ok = per_trial_equal and est.mean_d_n == est.mean_u_n and abs(ratio - 1.6) <= 0.02 and ratio <= 2
    verdict(2, ok, f"D_n == U_n in all {len(est.per_trial)} trials: {per_trial_equal}; E[D_n]/D_lower = {ratio:.4f} (1.6 +/- 0.02, <= 2)")


def test_criterion_3_theorem2():
    t0 = time.perf_counter()
    sfm = gen_theorem2()
    _, res = session(sfm, "mds", GF256)
    d3 = apdd_receiver(res, sfm, 2)
    dmin = min_apdd_receiver(sfm, 2)
    elapsed = time.perf_counter() - t0
    ok = d3 == 2 and dmin == Fraction(3, 2) and d3 / dmin == Fraction(4, 3) and elapsed < 1
    verdict(3, ok, f"D_3={d3}, D_min,3={dmin}, ratio={d3 / dmin} ({elapsed:.3f} s)")


def test_criterion_4_oracle_limits():
    t0 = time.perf_counter()
    found = {}
    for name, sfm in (("theorem2", gen_theorem2()), ("A1(3)", gen_a1(3))):
        found[name] = (min_completion(sfm, GF2).value, max(sfm.w))
    # GF(2)^2 has only three nonzero columns, so two binary slots cannot serve all six pairs of A1(4)
    a1_4_gf2 = min_completion(gen_a1(4), GF2).value
    found["A1(4) over GF(4)"] = (min_completion(gen_a1(4), GF4).value, 2)
    apdd = min_apdd(gen_theorem2(), GF2).value
    elapsed = time.perf_counter() - t0
    ok = all(v == w for v, w in found.values()) and apdd == Fraction(3, 2) and a1_4_gf2 == 3 and elapsed < 30
    detail = ", ".join(f"{k}: {v}" for k, (v, _) in found.items())
    verdict(4, ok, f"min_completion {detail}; A1(4) over GF(2): {a1_4_gf2}; min_apdd(theorem2)={apdd} ({elapsed:.2f} s)")


def _halving_runs():
    out = {}
    for k in (2, 4, 8, 16):
        sfm = gen_a1(k)
        mem_s, mem = session(sfm, "halving", GF2, MemoryMode.MEMORYLESS)
        _, mds = session(sfm, "mds", GF256)
        out[k] = (sfm, mem, mds)
    return out


def test_criterion_5_halving_vs_mds():
    t0 = time.perf_counter()
    runs = _halving_runs()
    mem_u = [runs[k][1].U for k in runs]
    mds_u = [runs[k][2].U for k in runs]
    expect = [math.ceil(math.log2(k)) + 1 for k in runs]
    ratios = [Fraction(a, b) for a, b in zip(mem_u, mds_u)]
    elapsed = time.perf_counter() - t0
    ok = mem_u == expect == [2, 3, 4, 5] and mds_u == [2] * 4 and [float(r) for r in ratios] == [1, 1.5, 2, 2.5] and elapsed < 5
    verdict(5, ok, f"memoryless halving U={mem_u}, MDS U={mds_u}, ratios={[float(r) for r in ratios]} ({elapsed:.2f} s)")


def test_criterion_6_memoryless_apdd():
    sfm, mem, mds = _halving_runs()[16]
    last = [n for n in range(sfm.n_receivers) if mem.U_n[n] == mem.U]
    d_last = [apdd_receiver(mem, sfm, n) for n in last]
    d_mds = {apdd_receiver(mds, sfm, n) for n in range(sfm.n_receivers)}
    ok = bool(last) and all(d >= 3 for d in d_last) and d_mds == {2}
    verdict(6, ok, f"{len(last)} receivers finish last at slot {mem.U}; min D_n among them {min(d_last)} (>= 3); MDS D_n {sorted(str(d) for d in d_mds)}")


def test_criterion_7_partition_counterexample():
    t0 = time.perf_counter()
    sfm = gen_theorem5(5, 50)
    _, part = session(sfm, "partitioned:theorem5:mds", GF256)
    d_part = apdd_overall(part, sfm)
    k, w1 = sfm.k_packets, 5
    xor_p2 = tuple([0] * w1 + [1] * (k - w1))
    schedule = [xor_p2] + [tuple(cauchy_row(GF256, w1, t)) + (0,) * (k - w1) for t in range(1, w1 + 1)]
    _, alt = session(sfm, ReplayScheme(schedule), GF256)
    d_alt = apdd_overall(alt, sfm)
    elapsed = time.perf_counter() - t0
    ratio = d_part / d_alt
    ok = part.completed and alt.completed and d_part >= 5 and d_alt <= 2 and ratio >= Fraction(5, 2) and elapsed < 5
    verdict(7, ok, f"D(partitioned)={d_part}={float(d_part):.4f}, D(alternative)={d_alt}={float(d_alt):.4f}, ratio {float(ratio):.3f} (>= 2.5)")


def test_criterion_8_partition_bound():
    t0 = time.perf_counter()
    worst = 0.0
    checked = 0
    ok = True
    for seed in range(20):
        sfm = gen_random(10, 12, 0.5, seed)
        for m in (2, 3):
            _, res = session(sfm, f"partitioned:equal{m}:mds", GF256)
            limit = m * max(sfm.w)
            ok &= res.completed and res.U <= limit
            worst = max(worst, res.U / limit)
            checked += 1
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 30
    verdict(8, ok, f"{checked} instances, max U/(M max w_n) = {worst:.3f} (<= 1) ({elapsed:.2f} s)")


def test_criterion_9_property_suite():
    # field axioms, exhaustive for m <= 4
    axioms = True
    for m in range(1, 5):
        f = get_field(m)
        r = range(f.q)
        for a in r:
            if a and f.mul(a, f.inv(a)) != 1:
                axioms = False
            for b in r:
                if f.mul(a, b) != peasant_mul(a, b, f.poly) or f.mul(a, b) != f.mul(b, a):
                    axioms = False
                for c in r:
                    if f.mul(a, f.add(b, c)) != f.add(f.mul(a, b), f.mul(a, c)):
                        axioms = False
                    if f.mul(a, f.mul(b, c)) != f.mul(f.mul(a, b), c):
                        axioms = False

    # absorb against an independent dense solver
    rng = random.Random(9)
    absorb_ok = True
    for case in range(1000):
        f = (GF2, GF4, get_field(4), GF256)[case % 4]
        k = rng.randint(1, 8)
        side = {i for i in range(k) if rng.random() < 0.3}
        st = EliminationState(f, k, side)
        sent = []
        for _ in range(rng.randint(1, k + 1)):
            v = tuple(rng.randrange(f.q) if rng.random() < 0.5 else 0 for _ in range(k))
            st.absorb(v)
            sent.append(reduce_by_side_info(v, side))
        units = [tuple(int(i == p) for i in range(k)) for p in range(k)]
        want = {p for p in range(k) if p in side or in_span(f, sent, units[p], k)}
        absorb_ok &= st.decoded == want and st.rank == dense_rank(f, sent, k)[0]

    # weighted-mean identity and D <= U on every simulated session
    sessions = 0
    identity_ok = True

    def check(t, sess, res):
        nonlocal sessions, identity_ok
        sessions += 1
        if not res.completed:
            return
        sfm = sess.sfm
        act = sfm.active_receivers()
        d = {n: apdd_receiver(res, sfm, n) for n in act}
        identity_ok &= apdd_overall(res, sfm) == sum(sfm.w[n] * d[n] for n in act) / sfm.total_wants
        identity_ok &= all(d[n] <= res.U_n[n] for n in act)

    for seed in range(5):
        sfm = gen_random(6, 8, 0.5, seed)
        for spec, f, mode in (
            ("rlnc", GF256, MemoryMode.FULL),
            ("mds", GF256, MemoryMode.FULL),
            ("uncoded", GF256, MemoryMode.MEMORYLESS),
            ("idnc-greedy", GF2, MemoryMode.MEMORYLESS),
            ("partitioned:equal2:rlnc", GF2, MemoryMode.FULL),
        ):
            monte_carlo(sfm, ChannelSpec.uniform(6, 0.25), f, parse_scheme(spec), mode, trials=40, master_seed=seed, callback=check)

    # bit-identical replay from fixed seeds
    sfm = gen_random(6, 8, 0.5, 3)
    logs = []
    for _ in range(2):
        s, _ = session(sfm, "rlnc", GF256, pe=0.3, seed=77)
        logs.append(s.event_log)
    replay_ok = logs[0] == logs[1]
    e1 = monte_carlo(sfm, ChannelSpec.uniform(6, 0.3), GF256, parse_scheme("rlnc"), trials=200, master_seed=5, keep_trials=True)
    e2 = monte_carlo(sfm, ChannelSpec.uniform(6, 0.3), GF256, parse_scheme("rlnc"), trials=200, master_seed=5, keep_trials=True)
    replay_ok &= e1 == e2

    ok = axioms and absorb_ok and identity_ok and replay_ok
    verdict(
        9,
        ok,
        f"axioms m<=4: {axioms}; absorb vs dense solver (1000 cases): {absorb_ok}; "
        f"APDD identity and D<=U over {sessions} sessions: {identity_ok}; replay: {replay_ok}",
    )


def test_criterion_10_universal_caveat(tmp_path):
    rc = cli_main(["ratio-report", "--sfm", "gen:theorem2", "--trials", "1", "--out", str(tmp_path)])
    summary = (tmp_path / "summary.txt").read_text()
    readme = Path(__file__).resolve().parent.parent / "README.md"
    readme_text = readme.read_text() if readme.exists() else ""
    in_summary = "every want matrix" in summary and "never establish" in summary
    in_doc = "every want matrix" in (ApproxReport.__doc__ or "")
    in_readme = "every want matrix" in readme_text
    ok = rc == 0 and in_summary and in_doc and in_readme
    verdict(10, ok, f"caveat in ratio-report summary: {in_summary}; in ApproxReport docs: {in_doc}; in README: {in_readme}")
