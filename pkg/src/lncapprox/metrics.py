"""Decoding-delay and completion metrics, lower bounds, Monte Carlo and ratio reports.

Per-session quantities are exact: slot indices are integers, so per-receiver
and overall APDD are returned as ``Fraction``.  Monte Carlo means are exact
rationals too (integer sums over trials); only standard errors are floats.
"""

from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .gf import GaloisField
from .session import MemoryMode, Session, SessionResult, default_max_slots
from .sfm import ChannelSpec, Sfm

TRUNCATION_WARN_FRACTION = 0.01


class MetricError(ValueError):
    """Metric undefined: receiver unfinished or wanted nothing."""


def apdd_receiver(result: SessionResult, sfm: Sfm, n: int) -> Fraction:
    """Mean decode slot over the packets receiver ``n`` wanted."""
    wants = sfm.want_set(n)
    if not wants:
        raise MetricError(f"receiver {n} wants nothing; its APDD is undefined")
    if result.U_n[n] is None:
        raise MetricError(f"receiver {n} did not finish")
    return Fraction(sum(result.u[(n, k)] for k in wants), len(wants))


def apdd_overall(result: SessionResult, sfm: Sfm) -> Fraction:
    if not result.completed:
        raise MetricError("session truncated before every receiver finished")
    total = sum(result.u[(n, k)] for n in range(sfm.n_receivers) for k in sfm.want_set(n))
    return Fraction(total, sfm.total_wants)


def completion_stats(result: SessionResult) -> tuple[tuple[int, ...], int]:
    if not result.completed:
        raise MetricError("session truncated before every receiver finished")
    return tuple(result.U_n), max(result.U_n)


@dataclass(frozen=True)
class Bounds:
    """Lower bounds; ``None`` entries belong to receivers that want nothing.

    The aggregate APDD bound is the want-weighted mean of per-receiver
    bounds.  It is a lower bound on the optimum, not the optimum itself.
    """

    u_lower: tuple
    d_lower: tuple
    u_lower_all: Fraction
    d_lower_all: Fraction
    erasure_free: bool


def bounds(sfm: Sfm, channel: ChannelSpec | None = None) -> Bounds:
    u_lower, d_lower = [], []
    for n, w in enumerate(sfm.w):
        if not w:
            u_lower.append(None)
            d_lower.append(None)
            continue
        success = Fraction(1) if channel is None else 1 - Fraction(str(channel.erasure_probs[n]))
        u_lower.append(Fraction(w) / success)
        d_lower.append(Fraction(w + 1, 2) / success)
    weighted = sum(w * d for w, d in zip(sfm.w, d_lower) if w)
    return Bounds(
        u_lower=tuple(u_lower),
        d_lower=tuple(d_lower),
        u_lower_all=max(u for u in u_lower if u is not None),
        d_lower_all=weighted / sfm.total_wants,
        erasure_free=channel is None,
    )


def trial_seed(master_seed: int, trial: int) -> int:
    """Per-trial seed; independent of how trials are scheduled."""
    return (master_seed << 32) + trial


@dataclass
class _Sums:
    """Integer accumulators; merging is addition, so order never matters."""

    n_receivers: int
    trials: int = 0
    truncated: int = 0
    u_n: list = None
    u_n2: list = None
    s_n: list = None  # sum of decode slots per receiver
    s_n2: list = None
    u: int = 0
    u2: int = 0
    s: int = 0
    s2: int = 0

    def __post_init__(self):
        z = [0] * self.n_receivers
        self.u_n, self.u_n2, self.s_n, self.s_n2 = z[:], z[:], z[:], z[:]

    def add(self, other: "_Sums"):
        self.trials += other.trials
        self.truncated += other.truncated
        for name in ("u_n", "u_n2", "s_n", "s_n2"):
            mine, theirs = getattr(self, name), getattr(other, name)
            for i, x in enumerate(theirs):
                mine[i] += x
        self.u += other.u
        self.u2 += other.u2
        self.s += other.s
        self.s2 += other.s2


def _mean_se(total, total_sq, count: int, scale: int = 1) -> tuple[Fraction | None, float]:
    """Exact mean of ``x/scale`` and its standard error from raw sums."""
    if count == 0:
        return None, math.nan
    mean = Fraction(total, count * scale)
    if count < 2:
        return mean, 0.0
    var = (Fraction(total_sq) - Fraction(total * total, count)) / (count - 1) / (scale * scale)
    return mean, math.sqrt(max(float(var), 0.0) / count)


@dataclass
class Estimates:
    """Sample means over completed trials; ``None`` for receivers wanting nothing."""

    w: tuple
    mean_u_n: tuple
    se_u_n: tuple
    mean_d_n: tuple
    se_d_n: tuple
    mean_u: Fraction | None
    se_u: float
    mean_d: Fraction | None
    se_d: float
    trials: int
    completed: int
    truncated: int
    per_trial: list = field(default_factory=list, repr=False)

    @property
    def warning(self) -> bool:
        return self.trials > 0 and self.truncated / self.trials > TRUNCATION_WARN_FRACTION


@dataclass(frozen=True)
class _TrialJob:
    sfm: Sfm
    channel: ChannelSpec
    field: GaloisField
    scheme: object  # SchemeSpec
    memory_mode: MemoryMode
    master_seed: int
    max_slots: int
    keep: bool


def _run_trials(job: _TrialJob, trials: range, callback=None):
    sfm = job.sfm
    active = sfm.active_receivers()
    wants = [sorted(sfm.want_set(n)) for n in range(sfm.n_receivers)]
    sums = _Sums(sfm.n_receivers)
    kept = []
    rng = random.Random()
    for t in trials:
        scheme = job.scheme.build(sfm, job.field)
        sess = Session(
            sfm,
            job.channel,
            job.field,
            scheme,
            job.memory_mode,
            seed=trial_seed(job.master_seed, t),
            rng=rng,
            keep_log=callback is not None,
        )
        res = sess.run(job.max_slots)
        sums.trials += 1
        if callback is not None:
            callback(t, sess, res)
        if not res.completed:
            sums.truncated += 1
            continue
        u = res.u
        s_tot = 0
        row = []
        for n in active:
            un = res.U_n[n]
            sn = sum(u[(n, k)] for k in wants[n])
            sums.u_n[n] += un
            sums.u_n2[n] += un * un
            sums.s_n[n] += sn
            sums.s_n2[n] += sn * sn
            s_tot += sn
            row.append((n, un, sn))
        sums.u += res.U
        sums.u2 += res.U * res.U
        sums.s += s_tot
        sums.s2 += s_tot * s_tot
        if job.keep:
            kept.append((t, res.U, tuple(row)))
    return sums, kept


def _run_chunk(args):
    job, lo, hi = args
    return _run_trials(job, range(lo, hi))


def monte_carlo(
    sfm: Sfm,
    channel: ChannelSpec,
    field: GaloisField,
    scheme,
    memory_mode: MemoryMode = MemoryMode.FULL,
    trials: int = 1000,
    master_seed: int = 0,
    max_slots: int | None = None,
    workers: int = 1,
    keep_trials: bool = False,
    callback: Callable | None = None,
) -> Estimates:
    """Estimate E[U_n], E[U], E[D_n], E[D] for ``scheme`` (a SchemeSpec).

    ``keep_trials`` stores ``(trial, U, ((n, U_n, sum of decode slots), ...))``
    per completed trial.  ``callback(t, session, result)`` sees every session
    and forces single-process execution.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    if max_slots is None:
        max_slots = default_max_slots(sfm.k_packets, channel)
    job = _TrialJob(sfm, channel, field, scheme, MemoryMode(memory_mode), master_seed, max_slots, keep_trials)
    if workers > 1 and callback is None:
        step = math.ceil(trials / workers)
        chunks = [(job, lo, min(lo + step, trials)) for lo in range(0, trials, step)]
        sums = _Sums(sfm.n_receivers)
        kept = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part, part_kept in pool.map(_run_chunk, chunks):
                sums.add(part)
                kept.extend(part_kept)
        kept.sort()
    else:
        sums, kept = _run_trials(job, range(trials), callback)

    done = sums.trials - sums.truncated
    mean_u_n, se_u_n, mean_d_n, se_d_n = [], [], [], []
    for n, w in enumerate(sfm.w):
        if not w:
            for lst in (mean_u_n, mean_d_n):
                lst.append(None)
            for lst in (se_u_n, se_d_n):
                lst.append(math.nan)
            continue
        m, se = _mean_se(sums.u_n[n], sums.u_n2[n], done)
        mean_u_n.append(m)
        se_u_n.append(se)
        m, se = _mean_se(sums.s_n[n], sums.s_n2[n], done, w)
        mean_d_n.append(m)
        se_d_n.append(se)
    mean_u, se_u = _mean_se(sums.u, sums.u2, done)
    mean_d, se_d = _mean_se(sums.s, sums.s2, done, sfm.total_wants)
    return Estimates(
        w=sfm.w,
        mean_u_n=tuple(mean_u_n),
        se_u_n=tuple(se_u_n),
        mean_d_n=tuple(mean_d_n),
        se_d_n=tuple(se_d_n),
        mean_u=mean_u,
        se_u=se_u,
        mean_d=mean_d,
        se_d=se_d,
        trials=sums.trials,
        completed=done,
        truncated=sums.truncated,
        per_trial=kept,
    )


@dataclass
class ApproxReport:
    """Measured metric over lower bound, per receiver and in aggregate.

    Strong ratios take the worst receiver; weak ratios compare aggregate
    completion and aggregate APDD.  These certify one tested instance only:
    an approximation guarantee quantifies over every want matrix and every
    erasure vector, which no finite set of simulations can establish.
    """

    receivers: tuple
    throughput: tuple  # E[U_n] / U_lower_n
    throughput_se: tuple
    apdd: tuple  # E[D_n] / D_lower_n
    apdd_se: tuple
    strong_throughput: float
    strong_apdd: float
    weak_throughput: float
    weak_throughput_se: float
    weak_apdd: float
    weak_apdd_se: float
    trials: int


def _ratio(x, bound) -> float:
    return float(Fraction(x) / bound) if isinstance(x, (int, Fraction)) else float(x) / float(bound)


def approximation_report(est: Estimates, bnd: Bounds) -> ApproxReport:
    if len(est.w) != len(bnd.u_lower):
        raise ValueError("estimates and bounds describe different instances")
    if est.completed == 0:
        raise MetricError("no completed trials")
    receivers = tuple(n for n, w in enumerate(est.w) if w)
    tp = tuple(_ratio(est.mean_u_n[n], bnd.u_lower[n]) for n in receivers)
    tp_se = tuple(est.se_u_n[n] / float(bnd.u_lower[n]) for n in receivers)
    ap = tuple(_ratio(est.mean_d_n[n], bnd.d_lower[n]) for n in receivers)
    ap_se = tuple(est.se_d_n[n] / float(bnd.d_lower[n]) for n in receivers)
    return ApproxReport(
        receivers=receivers,
        throughput=tp,
        throughput_se=tp_se,
        apdd=ap,
        apdd_se=ap_se,
        strong_throughput=max(tp),
        strong_apdd=max(ap),
        weak_throughput=_ratio(est.mean_u, bnd.u_lower_all),
        weak_throughput_se=est.se_u / float(bnd.u_lower_all),
        weak_apdd=_ratio(est.mean_d, bnd.d_lower_all),
        weak_apdd_se=est.se_d / float(bnd.d_lower_all),
        trials=est.completed,
    )
