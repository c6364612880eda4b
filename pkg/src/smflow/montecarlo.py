"""Replicated estimates of the analytic quantities, with z-score comparisons.

Replica ``k`` of an experiment with master seed ``seed`` is driven by
``substream(SeededStream(seed, C), k)``.  Per-replica results are integers
(indicators, transition counts), so every reduction is an exact integer sum
and the result does not depend on how replicas are split across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from statistics import NormalDist

import numpy as np

from . import flow
from .analytics import MeetScenario, MergeScenario
from .flow import ChainState
from .prm import SeededStream, substream
from .rates import RateMatrix

MIN_REPLICAS = 100


@dataclass
class Estimate:
    mean: float
    std_error: float
    n_replicas: int
    ci: tuple
    level: float = 0.95
    censored: int = 0

    def to_dict(self):
        return asdict(self)


@dataclass
class ComparisonVerdict:
    analytic: float
    estimate: Estimate
    z: float
    passed: bool
    threshold: float
    note: str | None = None

    def to_dict(self):
        return asdict(self)


def summarize(total: int, total_sq: int, n: int, level: float = 0.95, censored: int = 0) -> Estimate:
    """Estimate from exact integer sums of a per-replica quantity and its square."""
    if n < 1:
        raise ValueError("no replicas to summarise")
    mean = total / n
    if n > 1:
        var = max((total_sq - total * total / n) / (n - 1), 0.0)
    else:
        var = 0.0
    se = math.sqrt(var / n)
    zq = NormalDist().inv_cdf(0.5 + level / 2)
    return Estimate(mean, se, n, (mean - zq * se, mean + zq * se), level, censored)


def _check_n(n):
    if n < MIN_REPLICAS:
        raise ValueError(f"need at least {MIN_REPLICAS} replicas, got {n}")


def _chunks(n, jobs):
    jobs = max(1, min(jobs, n))
    step = -(-n // jobs)
    return [(a, min(a + step, n)) for a in range(0, n, step)]


def _map(fn, args_list, jobs):
    if jobs <= 1 or len(args_list) == 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, *zip(*args_list)))


# -- per-chunk workers (module level so they pickle) ---------------------------


def _meet_next_chunk(m, sc, seed, lo, hi):
    root = SeededStream(seed, m.C)
    a, b = ChainState(sc.i, sc.y1), ChainState(sc.j, sc.y2)
    hits = 0
    for k in range(lo, hi):
        out = flow.run_first_transition(m, a, b, substream(root, k))
        hits += out.met
    return hits


def _merge_chunk(m, sc, seed, lo, hi):
    root = SeededStream(seed, m.C)
    a, b = ChainState(sc.k, 0.0), ChainState(sc.k, sc.y)
    hits = 0
    for k in range(lo, hi):
        out = flow.run_first_transition(m, a, b, substream(root, k))
        hits += out.merged
    return hits


def _n_chunk(m, sc, seed, lo, hi, cap):
    root = SeededStream(seed, m.C)
    a, b = ChainState(sc.i, sc.y1), ChainState(sc.j, sc.y2)
    ns = []
    for k in range(lo, hi):
        out = flow.run_until_meeting(m, a, b, substream(root, k), cap)
        ns.append(-1 if out.censored else out.N)
    return ns


def _eventual_merge_chunk(m, sc, seed, lo, hi, cap):
    root = SeededStream(seed, m.C)
    a, b = ChainState(sc.i, sc.y1), ChainState(sc.j, sc.y2)
    hits = 0
    for k in range(lo, hi):
        out = flow.run_until_merge(m, a, b, substream(root, k), cap)
        hits += out.merged
    return hits


# -- estimators -------------------------------------------------------------------


def estimate_meet_next(m: RateMatrix, sc: MeetScenario, n: int, seed: int, *, jobs: int = 1,
                       level: float = 0.95) -> Estimate:
    """Fraction of replicas whose first collective transition is a meeting."""
    _check_n(n)
    hits = sum(_map(_meet_next_chunk, [(m, sc, seed, lo, hi) for lo, hi in _chunks(n, jobs)], jobs))
    return summarize(hits, hits, n, level)


def estimate_merge_at_meeting(m: RateMatrix, sc: MergeScenario, n: int, seed: int, *, jobs: int = 1,
                              level: float = 0.95) -> Estimate:
    """Start both chains in ``k`` with ages ``0`` and ``y``; count joint departures."""
    _check_n(n)
    hits = sum(_map(_merge_chunk, [(m, sc, seed, lo, hi) for lo, hi in _chunks(n, jobs)], jobs))
    return summarize(hits, hits, n, level)


@dataclass
class MomentEstimates:
    moments: dict  # r -> Estimate of E[N**r] over uncensored replicas
    histogram: dict  # N -> count
    censored: int
    n_replicas: int
    tail: dict = field(default_factory=dict)  # n -> Estimate of P(N > n), censored counted as > n

    def to_dict(self):
        return {
            "moments": {str(r): e.to_dict() for r, e in self.moments.items()},
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "censored": self.censored,
            "n_replicas": self.n_replicas,
            "tail": {str(k): e.to_dict() for k, e in self.tail.items()},
        }

    def histogram_csv(self) -> str:
        lines = ["N,count"]
        lines += [f"{k},{v}" for k, v in sorted(self.histogram.items())]
        if self.censored:
            lines.append(f"censored,{self.censored}")
        return "\n".join(lines) + "\n"


def estimate_N_moments(m: RateMatrix, sc: MeetScenario, n: int, seed: int, r_max: int = 2, *,
                       max_transitions: int = flow.DEFAULT_MAX_TRANSITIONS, tail_n: int = 5, jobs: int = 1,
                       level: float = 0.95) -> MomentEstimates:
    """Raw moments of the number of collective transitions until the first meeting.

    Censored replicas are excluded from the moments (counted in ``censored``)
    and counted as not having met in the tail probabilities.
    """
    _check_n(n)
    parts = _map(_n_chunk, [(m, sc, seed, lo, hi, max_transitions) for lo, hi in _chunks(n, jobs)], jobs)
    ns = [v for p in parts for v in p]
    done = [v for v in ns if v >= 0]
    censored = len(ns) - len(done)
    hist = {}
    for v in done:
        hist[v] = hist.get(v, 0) + 1
    moments = {}
    for r in range(1, r_max + 1):
        if done:
            s1 = sum(v**r for v in done)
            s2 = sum(v ** (2 * r) for v in done)
            moments[r] = summarize(s1, s2, len(done), level, censored)
    tail = {}
    for k in range(1, tail_n + 1):
        c = sum(1 for v in ns if v < 0 or v > k)
        tail[k] = summarize(c, c, len(ns), level, censored)
    return MomentEstimates(moments, hist, censored, n, tail)


def estimate_eventual_merge(m: RateMatrix, sc: MeetScenario, n: int, seed: int, *,
                            max_transitions: int = 10_000, jobs: int = 1, level: float = 0.95) -> Estimate:
    """Fraction of replicas with a certified merge within ``max_transitions`` collective transitions."""
    _check_n(n)
    hits = sum(
        _map(_eventual_merge_chunk, [(m, sc, seed, lo, hi, max_transitions) for lo, hi in _chunks(n, jobs)], jobs)
    )
    est = summarize(hits, hits, n, level)
    est.censored = n - hits
    return est


def compare(analytic: float, estimate: Estimate, sigma_threshold: float = 3.0, exact_tol: float = 1e-8
            ) -> ComparisonVerdict:
    """z-score of the estimate against an analytic value.

    With zero sample variance, the verdict passes only when the estimate
    equals the analytic value to within ``exact_tol`` (which absorbs
    quadrature truncation).
    """
    if estimate.std_error == 0:
        ok = abs(estimate.mean - analytic) <= exact_tol
        note = None if ok else "zero sample variance and estimate differs from analytic value"
        z = 0.0 if ok else math.copysign(math.inf, estimate.mean - analytic)
        return ComparisonVerdict(analytic, estimate, z, ok, sigma_threshold, note)
    z = (estimate.mean - analytic) / estimate.std_error
    return ComparisonVerdict(analytic, estimate, z, abs(z) <= sigma_threshold, sigma_threshold)


def calibration(m: RateMatrix, sc: MeetScenario, analytic: float, seeds, n: int, sigma: float = 3.0
                ) -> tuple[float, list]:
    """Pass rate of :func:`compare` over independent master seeds."""
    verdicts = [compare(analytic, estimate_meet_next(m, sc, n, s), sigma) for s in seeds]
    return sum(v.passed for v in verdicts) / len(verdicts), verdicts


def holding_times(m: RateMatrix, x, y0: float, n: int, seed: int) -> np.ndarray:
    """Sojourn durations of a single chain started at ``(x, y0)``, one per replica."""
    root = SeededStream(seed, m.C)
    out = np.empty(n)
    for k in range(n):
        s = substream(root, k)
        while True:
            t, v = s.next_raw()
            if m.locate(x, y0 + t, v) is not None:
                out[k] = t
                break
    return out
