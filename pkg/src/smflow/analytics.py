"""Meeting and merging probabilities of the coupled pair, and the bounds built on them.

All infinite integrals are truncated at the age where the exact survival
factor falls below ``tail_eps``; the neglected tail mass is at most that
survival value and is added to the reported error.  Cumulative hazards are
always evaluated in closed form, so the only numerical step is the outer
one-dimensional quadrature (``scipy.integrate.quad``), split at every point
where a piecewise-constant rate jumps.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .rates import RateMatrix


class QuadratureError(RuntimeError):
    def __init__(self, message, partial=None, error=None):
        super().__init__(message)
        self.partial = partial
        self.error = error


class UnsupportedMatrix(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-10
    tail_eps: float = 1e-12
    max_subdivisions: int = 200

    def __post_init__(self):
        if min(self.rel_tol, self.abs_tol, self.tail_eps) <= 0 or self.max_subdivisions < 1:
            raise ValueError("quadrature tolerances and subdivision limit must be positive")


@dataclass(frozen=True)
class MeetScenario:
    i: float
    j: float
    y1: float = 0.0
    y2: float = 0.0

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("a meeting scenario needs two distinct states")
        if self.y1 < 0 or self.y2 < 0:
            raise ValueError("ages must be nonnegative")


@dataclass(frozen=True)
class MergeScenario:
    k: float
    y: float

    def __post_init__(self):
        if self.y < 0:
            raise ValueError("age must be nonnegative")


@dataclass
class QuadResult:
    value: float
    error: float
    truncation: float
    tail_mass: float
    n_segments: int

    def to_dict(self):
        return asdict(self)


@dataclass
class AnalyticReport:
    quantity: str
    scenario: dict
    value: float | None
    error: float | None = None
    truncation: float | None = None
    grid: dict | None = None
    caveat: str | None = None
    extra: dict = field(default_factory=dict)
    failure: str | None = None

    def to_dict(self):
        return asdict(self)


# -- quadrature plumbing -------------------------------------------------------


def truncation_point(exponent: Callable[[float], float], tail_eps: float, y_cap: float = 1e12) -> float:
    """Smallest-ish ``Y`` with ``exp(-exponent(Y)) < tail_eps`` (``exponent`` nondecreasing)."""
    target = -math.log(tail_eps)
    if exponent(0.0) >= target:
        return 0.0
    hi = 1.0
    while exponent(hi) < target:
        hi *= 2.0
        if hi > y_cap:
            raise QuadratureError(
                "survival factor does not vanish: cumulative hazard stays bounded", partial=None
            )
    lo = hi / 2.0 if hi > 1.0 else 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if exponent(mid) < target:
            lo = mid
        else:
            hi = mid
    return hi


def integrate_segments(f, cuts: Sequence[float], q: QuadratureConfig) -> tuple[float, float]:
    total = 0.0
    err = 0.0
    for a, b in zip(cuts, cuts[1:]):
        if b <= a:
            continue
        res = integrate.quad(
            f, a, b, epsabs=q.abs_tol / max(len(cuts) - 1, 1), epsrel=q.rel_tol,
            limit=q.max_subdivisions, full_output=1,
        )
        val, e = res[0], res[1]
        total += val
        err += e
        if len(res) > 3:
            raise QuadratureError(f"quadrature did not converge on [{a}, {b}]: {res[3]}", total, err)
    return total, err


def _cuts(upper: float, pts) -> list[float]:
    # breakpoints closer than rounding noise would leave slivers QUADPACK rejects
    out = [0.0]
    for p in sorted({p for p in pts if 0.0 < p < upper}) + [upper]:
        if p - out[-1] > 1e-12 * max(1.0, abs(p)):
            out.append(p)
        elif p == upper:
            out[-1] = upper
    if len(out) == 1:
        out.append(upper)
    return out


# -- meeting in the next transition -------------------------------------------


def _meet_parts(m: RateMatrix, sc: MeetScenario):
    i, j, y1, y2 = sc.i, sc.j, sc.y1, sc.y2
    m.targets(i)
    m.targets(j)
    ri = [m.rates[(i, k)] for k in m.states if k != i]
    rj = [m.rates[(j, k)] for k in m.states if k != j]
    fij, fji = m.rates[(i, j)], m.rates[(j, i)]

    def exponent(y):
        return sum(f.increment(y1, y1 + y) for f in ri) + sum(f.increment(y2, y2 + y) for f in rj)

    def survival(y):
        return math.exp(-exponent(y))

    def hazards(y):
        return sum(f.value(y1 + y) for f in ri), sum(f.value(y2 + y) for f in rj)

    pts = [b - y1 for b in m.row_breakpoints(i)] + [b - y2 for b in m.row_breakpoints(j)]
    return exponent, survival, hazards, fij, fji, pts


def meet_next_prob(m: RateMatrix, sc: MeetScenario, q: QuadratureConfig = QuadratureConfig()) -> QuadResult:
    """Probability that the next collective transition from ``(i, y1), (j, y2)`` is a meeting."""
    exponent, survival, _, fij, fji, pts = _meet_parts(m, sc)
    upper = truncation_point(exponent, q.tail_eps)
    cuts = _cuts(upper, pts)

    def f(y):
        return survival(y) * (fij.value(sc.y1 + y) + fji.value(sc.y2 + y))

    val, err = integrate_segments(f, cuts, q)
    tail = survival(upper)
    return QuadResult(min(max(val, 0.0), 1.0), err + tail, upper, tail, len(cuts) - 1)


def not_meet_prob(
    m: RateMatrix, sc: MeetScenario, q: QuadratureConfig = QuadratureConfig(), route: str = "direct"
) -> QuadResult:
    """Probability that the next collective transition is not a meeting.

    ``route="direct"`` integrates the two ways of not meeting (one chain
    leaves for a third state before the other moves); ``route="complement"``
    returns one minus :func:`meet_next_prob`.
    """
    if route == "complement":
        r = meet_next_prob(m, sc, q)
        return QuadResult(1.0 - r.value, r.error, r.truncation, r.tail_mass, r.n_segments)
    if route != "direct":
        raise ValueError(f"unknown route {route!r}")
    exponent, survival, hazards, fij, fji, pts = _meet_parts(m, sc)
    upper = truncation_point(exponent, q.tail_eps)
    cuts = _cuts(upper, pts)

    def f(y):
        hi, hj = hazards(y)
        away = (hi - fij.value(sc.y1 + y)) + (hj - fji.value(sc.y2 + y))
        return survival(y) * max(away, 0.0)

    val, err = integrate_segments(f, cuts, q)
    tail = survival(upper)
    return QuadResult(min(max(val, 0.0), 1.0), err + tail, upper, tail, len(cuts) - 1)


def markov_meet_prob(m: RateMatrix, i, j) -> float:
    """Closed form for constant rates: ``(r_ij + r_ji) / (hazard_i + hazard_j)``."""
    if not m.is_markov:
        raise UnsupportedMatrix("closed form needs every rate to be constant")
    if i == j:
        raise ValueError("states must differ")
    num = m.rate(i, j, 0.0) + m.rate(j, i, 0.0)
    den = m.hazard(i, 0.0) + m.hazard(j, 0.0)
    if den == 0:
        raise ValueError(f"states {i} and {j} are both absorbing")
    return num / den


# -- merging at a meeting -----------------------------------------------------


def merge_prob(m: RateMatrix, sc: MergeScenario, q: QuadratureConfig = QuadratureConfig()) -> QuadResult:
    """Probability that a meeting in state ``k`` with age gap ``y`` is a merging.

    Both chains sit in ``k`` with ages ``0`` and ``y``.  The point that ends
    the common sojourn merges them iff it lands in both chains' intervals,
    whose lengths are the pointwise minimum of the two rates; the union has
    length given by the maximum.
    """
    k, y = sc.k, sc.y
    fs = [m.rates[(k, kk)] for kk in m.targets(k)]

    def exponent(s):
        return sum(f.shifted_max_integral(y, s) for f in fs)

    def f(s):
        return math.exp(-exponent(s)) * sum(g.shifted_min(y, s) for g in fs)

    upper = truncation_point(exponent, q.tail_eps)
    pts = set()
    for g in fs:
        pts.update(g.shifted_breakpoints(y))
    cuts = _cuts(upper, pts)
    val, err = integrate_segments(f, cuts, q)
    tail = math.exp(-exponent(upper))
    return QuadResult(min(max(val, 0.0), 1.0), err + tail, upper, tail, len(cuts) - 1)


@dataclass
class LimitReport:
    ys: list
    values: list
    monotone: bool
    gap: float

    def to_dict(self):
        return asdict(self)


def merge_prob_limit_y0(
    m: RateMatrix, k, q: QuadratureConfig = QuadratureConfig(), ys: Sequence[float] = (1e-1, 1e-2, 1e-3)
) -> LimitReport:
    """Merge probability along a shrinking age gap; ``monotone`` means nondecreasing as ``y`` shrinks."""
    ys = sorted(ys, reverse=True)
    res = [merge_prob(m, MergeScenario(k, y), q) for y in ys]
    vals = [r.value for r in res]
    slack = [r.error for r in res]
    monotone = all(b >= a - (ea + eb) for a, b, ea, eb in zip(vals, vals[1:], slack, slack[1:]))
    return LimitReport(list(ys), vals, monotone, 1.0 - vals[-1])


# -- bounds ---------------------------------------------------------------------


@dataclass(frozen=True)
class AgeGrid:
    """Initial ages ``y1, y2`` on a square grid in ``[0, y_max]`` for sup/inf of the not-meet probability."""

    n: int = 9
    y_max: float = 20.0

    def ages(self):
        return np.linspace(0.0, self.y_max, self.n).tolist()


GRID_CAVEAT = (
    "supremum/infimum taken over a finite age grid; a true bound only if the grid "
    "captures the extremes"
)


@dataclass
class NotMeetRange:
    sup: float
    inf: float
    argsup: tuple
    arginf: tuple
    grid: dict
    max_error: float


def not_meet_range(m: RateMatrix, q: QuadratureConfig = QuadratureConfig(), grid: AgeGrid = AgeGrid()) -> NotMeetRange:
    """Grid supremum and infimum of the not-meet probability over all ordered pairs and ages."""
    ages = [0.0] if m.is_markov else grid.ages()
    best, worst = -1.0, 2.0
    argsup = arginf = None
    max_err = 0.0
    for i in m.states:
        for j in m.states:
            if i == j:
                continue
            for y1 in ages:
                for y2 in ages:
                    r = not_meet_prob(m, MeetScenario(i, j, y1, y2), q)
                    max_err = max(max_err, r.error)
                    if r.value > best:
                        best, argsup = r.value, (i, j, y1, y2)
                    if r.value < worst:
                        worst, arginf = r.value, (i, j, y1, y2)
    g = asdict(grid)
    g["constant_rates"] = m.is_markov
    return NotMeetRange(best, worst, argsup, arginf, g, max_err)


@dataclass
class BoundReport:
    value: float
    vacuous: bool
    sup_not_meet: float
    inf_not_meet: float
    grid: dict
    caveat: str = GRID_CAVEAT
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def never_meet_bound(
    m: RateMatrix,
    q: QuadratureConfig = QuadratureConfig(),
    n: int = 1,
    grid: AgeGrid = AgeGrid(),
    rng: NotMeetRange | None = None,
) -> BoundReport:
    """Upper bound ``(sup a')**n`` on not having met within ``n`` collective transitions."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    rng = rng or not_meet_range(m, q, grid)
    vacuous = rng.sup >= 1.0
    return BoundReport(1.0 if vacuous else rng.sup**n, vacuous, rng.sup, rng.inf, rng.grid, extra={"n": n})


def eulerian_row(r: int) -> list[int]:
    """Eulerian numbers ``A(r, 0..r-1)``."""
    row = [1]
    for n in range(2, r + 1):
        new = [0] * n
        for k in range(n):
            left = row[k - 1] if k >= 1 else 0
            here = row[k] if k < len(row) else 0
            new[k] = (k + 1) * here + (n - k) * left
        row = new
    return row


def polylog_neg_over_z(r: int, z: float) -> float:
    """``Li_{-r}(z) / z`` for integer ``r >= 1``, finite at ``z = 0``."""
    if r < 1 or int(r) != r:
        raise ValueError("order must be a positive integer")
    if not z < 1:
        return math.inf
    coeffs = eulerian_row(int(r))
    poly = 0.0
    for c in reversed(coeffs):
        poly = poly * z + c
    return poly / (1.0 - z) ** (r + 1)


def polylog_neg(r: int, z: float) -> float:
    """``Li_{-r}(z) = sum_{n>=1} n**r z**n`` via the Eulerian-number rational form."""
    return z * polylog_neg_over_z(r, z)


def polylog_series(r: int, z: float, terms: int = 10_000) -> float:
    return math.fsum(n**r * z**n for n in range(1, terms + 1))


def moment_bound(
    m: RateMatrix,
    q: QuadratureConfig = QuadratureConfig(),
    r: int = 1,
    grid: AgeGrid = AgeGrid(),
    rng: NotMeetRange | None = None,
) -> BoundReport:
    """Upper bound ``(1 - inf a') / sup a' * Li_{-r}(sup a')`` on ``E[N**r]``."""
    rng = rng or not_meet_range(m, q, grid)
    s, i = rng.sup, rng.inf
    if s >= 1.0:
        return BoundReport(math.inf, True, s, i, rng.grid, extra={"r": r})
    value = (1.0 - i) * polylog_neg_over_z(r, max(s, 0.0))
    return BoundReport(value, False, s, i, rng.grid, extra={"r": r})


def merge_inf_bound(m: RateMatrix) -> BoundReport:
    """Lower bound ``min_k sum_k' inf rate_kk' / C`` on the merge probability over all meetings."""
    rows = {k: sum(m.rates[(k, kk)].infimum for kk in m.states if kk != k) for k in m.states}
    worst = min(rows.values())
    value = worst / m.C if m.C > 0 else 0.0
    return BoundReport(
        min(value, 1.0),
        value <= 0.0,
        math.nan,
        math.nan,
        {},
        caveat="exact: per-family infima are closed form",
        extra={"row_infimum_sums": {str(k): v for k, v in rows.items()}, "C": m.C},
    )


def analyze(m: RateMatrix, meet: Sequence[MeetScenario], merge: Sequence[MergeScenario], q: QuadratureConfig,
            grid: AgeGrid = AgeGrid(), r_max: int = 2, n_max: int = 5) -> list[AnalyticReport]:
    """Evaluate every scenario plus the matrix-wide bounds; failures are reported, not raised."""
    out = []
    for sc in meet:
        scd = asdict(sc)
        try:
            r = meet_next_prob(m, sc, q)
            extra = {}
            d = not_meet_prob(m, sc, q)
            extra["not_meet_direct"] = d.value
            extra["complement_gap"] = abs(1.0 - r.value - d.value)
            if m.is_markov:
                extra["closed_form"] = markov_meet_prob(m, sc.i, sc.j)
            out.append(AnalyticReport("meet_next_prob", scd, r.value, r.error, r.truncation, extra=extra))
        except QuadratureError as exc:
            out.append(AnalyticReport("meet_next_prob", scd, exc.partial, exc.error, failure=str(exc)))
    for sc in merge:
        scd = asdict(sc)
        try:
            r = merge_prob(m, sc, q)
            out.append(AnalyticReport("merge_prob", scd, r.value, r.error, r.truncation))
        except QuadratureError as exc:
            out.append(AnalyticReport("merge_prob", scd, exc.partial, exc.error, failure=str(exc)))
    if len(m.states) >= 2:
        try:
            rng = not_meet_range(m, q, grid)
            for n in range(1, n_max + 1):
                b = never_meet_bound(m, q, n, grid, rng)
                out.append(AnalyticReport("never_meet_bound", {"n": n}, b.value, grid=b.grid, caveat=b.caveat,
                                          extra={"vacuous": b.vacuous, "sup_not_meet": b.sup_not_meet}))
            for r in range(1, r_max + 1):
                b = moment_bound(m, q, r, grid, rng)
                out.append(AnalyticReport("moment_bound", {"r": r}, b.value, grid=b.grid, caveat=b.caveat,
                                          extra={"vacuous": b.vacuous, "sup_not_meet": b.sup_not_meet,
                                                 "inf_not_meet": b.inf_not_meet}))
        except QuadratureError as exc:
            out.append(AnalyticReport("not_meet_range", {}, None, failure=str(exc)))
        b = merge_inf_bound(m)
        out.append(AnalyticReport("merge_inf_bound", {}, b.value, caveat=b.caveat,
                                  extra={**b.extra, "vacuous": b.vacuous}))
    return out
