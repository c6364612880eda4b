"""Age-dependent transition rates and the mark-axis interval layout.

A rate matrix assigns every ordered pair of distinct states a bounded,
nonnegative rate function of the age variable.  Each pair owns a strip of
the mark axis starting at the cumulative sup-norm of all pairs preceding it,
so the interval of ``(i, j)`` at age ``y`` is ``[offset_ij, offset_ij +
rate_ij(y))``.  Because the left ends do not move with ``y``, intervals
belonging to different pairs never overlap, whatever ages are involved.
"""

from __future__ import annotations

import bisect
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np


class DomainError(ValueError):
    """Unknown state, diagonal pair, or negative age."""


class RateFunction:
    """Base class for the three supported rate families."""

    family: str = ""
    #: ages where the function may jump; empty for smooth families
    breakpoints: tuple[float, ...] = ()

    def value(self, y: float) -> float:
        raise NotImplementedError

    def values(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def integral(self, y: float) -> float:
        """Exact ``int_0^y rate(s) ds``."""
        raise NotImplementedError

    def increment(self, a: float, b: float) -> float:
        """Exact ``int_a^b rate(s) ds``."""
        return self.integral(b) - self.integral(a)

    @property
    def sup_norm(self) -> float:
        raise NotImplementedError

    @property
    def infimum(self) -> float:
        raise NotImplementedError

    @property
    def diverges(self) -> bool:
        """Whether ``integral(y) -> inf`` as ``y -> inf``."""
        raise NotImplementedError

    @property
    def positive(self) -> bool:
        """Strictly positive almost everywhere."""
        raise NotImplementedError

    def shifted_max_integral(self, shift: float, upto: float) -> float:
        """Exact ``int_0^upto max(rate(t), rate(shift + t)) dt``."""
        raise NotImplementedError

    def shifted_min(self, shift: float, t: float) -> float:
        return min(self.value(t), self.value(shift + t))

    def shifted_breakpoints(self, shift: float) -> tuple[float, ...]:
        """Points in ``t > 0`` where ``rate(t)`` or ``rate(shift + t)`` jumps."""
        pts = set(self.breakpoints)
        pts.update(b - shift for b in self.breakpoints if b > shift)
        return tuple(sorted(pts))

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(RateFunction):
    c: float
    family = "constant"

    def __post_init__(self):
        if not (self.c >= 0 and math.isfinite(self.c)):
            raise ValueError(f"constant rate must be finite and >= 0, got {self.c}")

    def value(self, y):
        return self.c

    def values(self, y):
        return np.full(np.shape(y), float(self.c))

    def integral(self, y):
        return self.c * y

    def increment(self, a, b):
        return self.c * (b - a)

    @property
    def sup_norm(self):
        return float(self.c)

    @property
    def infimum(self):
        return float(self.c)

    @property
    def diverges(self):
        return self.c > 0

    @property
    def positive(self):
        return self.c > 0

    def shifted_max_integral(self, shift, upto):
        return self.c * upto

    def shifted_min(self, shift, t):
        return self.c

    def to_dict(self):
        return {"family": "constant", "params": {"c": self.c}}


@dataclass(frozen=True)
class Saturating(RateFunction):
    """``y -> c * y / (1 + y)``; increasing from 0 towards ``c``."""

    c: float
    family = "saturating"

    def __post_init__(self):
        if not (self.c >= 0 and math.isfinite(self.c)):
            raise ValueError(f"saturating rate must be finite and >= 0, got {self.c}")

    def value(self, y):
        return self.c * y / (1.0 + y)

    def values(self, y):
        y = np.asarray(y, dtype=float)
        return self.c * y / (1.0 + y)

    def integral(self, y):
        return self.c * (y - math.log1p(y))

    def increment(self, a, b):
        # avoids cancellation between two large cumulative values
        return self.c * ((b - a) - math.log1p((b - a) / (1.0 + a)))

    @property
    def sup_norm(self):
        return float(self.c)

    @property
    def infimum(self):
        return 0.0

    @property
    def diverges(self):
        return self.c > 0

    @property
    def positive(self):
        return self.c > 0

    def shifted_max_integral(self, shift, upto):
        # monotone: the shifted copy dominates
        return self.increment(shift, shift + upto)

    def shifted_min(self, shift, t):
        return self.value(t)

    def to_dict(self):
        return {"family": "saturating", "params": {"c": self.c}}


@dataclass(frozen=True, init=False)
class PiecewiseConstant(RateFunction):
    """``values[k]`` on ``[breakpoints[k-1], breakpoints[k])`` and ``tail`` beyond.

    The first piece starts at age 0.
    """

    breakpoints: tuple[float, ...]
    levels: tuple[float, ...]
    tail: float
    _areas: tuple[float, ...] = field(init=False, repr=False, compare=False)
    family = "piecewise"

    def __init__(self, breakpoints: Sequence[float], values: Sequence[float], tail: float):
        bps = tuple(float(b) for b in breakpoints)
        vals = tuple(float(v) for v in values)
        if len(bps) != len(vals):
            raise ValueError("piecewise rate needs one value per breakpoint")
        if any(b <= 0 for b in bps) or any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise ValueError("breakpoints must be positive and strictly ascending")
        if any(not (v >= 0 and math.isfinite(v)) for v in vals + (tail,)):
            raise ValueError("piecewise values must be finite and >= 0")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "levels", vals)
        object.__setattr__(self, "tail", float(tail))
        areas = [0.0]
        prev = 0.0
        for b, v in zip(bps, vals):
            areas.append(areas[-1] + v * (b - prev))
            prev = b
        object.__setattr__(self, "_areas", tuple(areas))

    def value(self, y):
        k = bisect.bisect_right(self.breakpoints, y)
        return self.tail if k == len(self.breakpoints) else self.levels[k]

    def values(self, y):
        table = np.array(self.levels + (self.tail,))
        return table[np.searchsorted(self.breakpoints, np.asarray(y, dtype=float), side="right")]

    def integral(self, y):
        k = bisect.bisect_right(self.breakpoints, y)
        start = self.breakpoints[k - 1] if k else 0.0
        level = self.tail if k == len(self.breakpoints) else self.levels[k]
        return self._areas[k] + level * (y - start)

    @property
    def sup_norm(self):
        return max(self.levels + (self.tail,))

    @property
    def infimum(self):
        return min(self.levels + (self.tail,))

    @property
    def diverges(self):
        return self.tail > 0

    @property
    def positive(self):
        return self.infimum > 0

    def shifted_max_integral(self, shift, upto):
        if upto <= 0:
            return 0.0
        cuts = [0.0]
        cuts.extend(p for p in self.shifted_breakpoints(shift) if p < upto)
        cuts.append(upto)
        total = 0.0
        for a, b in zip(cuts, cuts[1:]):
            mid = 0.5 * (a + b)
            total += max(self.value(mid), self.value(shift + mid)) * (b - a)
        return total

    def to_dict(self):
        return {
            "family": "piecewise",
            "params": {"breakpoints": list(self.breakpoints), "values": list(self.levels), "tail": self.tail},
        }


def rate_from_dict(doc: Mapping) -> RateFunction:
    family = doc.get("family")
    params = doc.get("params", {})
    if family == "constant":
        return Constant(float(params["c"]))
    if family == "saturating":
        return Saturating(float(params["c"]))
    if family == "piecewise":
        return PiecewiseConstant(params["breakpoints"], params["values"], float(params["tail"]))
    raise ValueError(f"unknown rate family {family!r}")


class RateMatrix:
    """Finite state set plus one rate function per ordered pair of distinct states.

    ``order`` fixes the layout of the mark axis.  By default pairs are laid
    out lexicographically by state index; any permutation of the pairs can be
    supplied instead (the single-chain law does not depend on it, the joint
    law of a coupled pair does).
    """

    def __init__(
        self,
        states: Sequence[float],
        rates: Mapping[tuple, RateFunction],
        order: Sequence[tuple] | None = None,
    ):
        states = list(states)
        if not states:
            raise ValueError("state set is empty")
        if len(set(states)) != len(states):
            raise ValueError(f"state labels are not distinct: {states}")
        self.states = tuple(states)
        self._index = {s: n for n, s in enumerate(states)}

        pairs = [(i, j) for i in states for j in states if i != j]
        missing = [p for p in pairs if p not in rates]
        if missing:
            raise ValueError(f"missing rate entries for pairs {missing}")
        extra = [p for p in rates if p not in set(pairs)]
        if extra:
            raise DomainError(f"rate entries for invalid pairs {extra}")
        if order is None:
            order = pairs
        else:
            order = [tuple(p) for p in order]
            if sorted(order, key=self._pair_key) != sorted(pairs, key=self._pair_key) or len(order) != len(pairs):
                raise ValueError("order must be a permutation of all off-diagonal pairs")
        self.order = tuple(order)
        self.rates = {p: rates[p] for p in self.order}

        self.offsets = {}
        acc = 0.0
        for p in self.order:
            self.offsets[p] = acc
            acc += self.rates[p].sup_norm
        self.C = acc

        # per-row lookup tables for ``locate``: (lo, rate.value, target)
        self._rows = {}
        for i in states:
            row = [(self.offsets[(i, j)], self.rates[(i, j)].value, j) for j in states if j != i]
            row.sort(key=lambda r: r[0])
            lo = min(r[0] for r in row) if row else 0.0
            hi = max(self.offsets[(i, j)] + self.rates[(i, j)].sup_norm for j in states if j != i) if row else 0.0
            self._rows[i] = (lo, hi, tuple(row))

    def _pair_key(self, p):
        return (self._index.get(p[0], -1), self._index.get(p[1], -1))

    def __repr__(self):
        return f"RateMatrix(states={list(self.states)}, C={self.C})"

    # -- basic queries ------------------------------------------------------

    def _check_state(self, i):
        if i not in self._index:
            raise DomainError(f"unknown state {i!r}")

    def _check_pair(self, i, j):
        self._check_state(i)
        self._check_state(j)
        if i == j:
            raise DomainError(f"diagonal pair ({i!r}, {j!r}) has no rate function")

    @staticmethod
    def _check_age(y):
        if not y >= 0:
            raise DomainError(f"age must be >= 0, got {y}")

    def targets(self, i) -> list:
        self._check_state(i)
        return [j for j in self.states if j != i]

    def rate(self, i, j, y: float) -> float:
        self._check_pair(i, j)
        self._check_age(y)
        return self.rates[(i, j)].value(y)

    def hazard(self, i, y: float) -> float:
        self._check_state(i)
        self._check_age(y)
        return sum(self.rates[(i, j)].value(y) for j in self.states if j != i)

    def cumulative_hazard(self, i, y: float) -> float:
        self._check_state(i)
        self._check_age(y)
        return sum(self.rates[(i, j)].integral(y) for j in self.states if j != i)

    def hazard_increment(self, i, a: float, b: float) -> float:
        """``cumulative_hazard(i, b) - cumulative_hazard(i, a)`` without cancellation."""
        row = self.rates
        return sum(row[(i, j)].increment(a, b) for j in self.states if j != i)

    def row_breakpoints(self, i) -> tuple[float, ...]:
        pts = set()
        for j in self.states:
            if j != i:
                pts.update(self.rates[(i, j)].breakpoints)
        return tuple(sorted(pts))

    def interval(self, i, j, y: float) -> tuple[float, float]:
        self._check_pair(i, j)
        self._check_age(y)
        lo = self.offsets[(i, j)]
        return lo, lo + self.rates[(i, j)].value(y)

    def locate(self, i, y: float, v: float):
        """Target state whose interval at age ``y`` holds mark ``v``, else None."""
        lo, hi, row = self._rows[i]
        if v < lo or v >= hi:
            return None
        for start, value, j in row:
            if v < start:
                return None
            if v < start + value(y):
                return j
        return None

    @property
    def is_markov(self) -> bool:
        return all(isinstance(f, Constant) for f in self.rates.values())

    # -- serialisation ------------------------------------------------------

    def to_dict(self) -> dict:
        doc = {
            "states": list(self.states),
            "rates": {f"{i}->{j}": self.rates[(i, j)].to_dict() for (i, j) in self.order},
        }
        if self.order != tuple((i, j) for i in self.states for j in self.states if i != j):
            doc["order"] = [f"{i}->{j}" for (i, j) in self.order]
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "RateMatrix":
        states = list(doc["states"])
        labels = {str(s): s for s in states}
        if len(labels) != len(states):
            raise ValueError(f"state labels are not distinct: {states}")

        def parse_pair(key):
            parts = key.split("->")
            if len(parts) != 2:
                raise ValueError(f"rate key {key!r} is not of the form 'i->j'")
            a, b = (p.strip() for p in parts)
            if a not in labels or b not in labels:
                raise DomainError(f"rate key {key!r} names an unknown state")
            if a == b:
                raise DomainError(f"rate key {key!r} is a diagonal entry")
            return labels[a], labels[b]

        rates = {parse_pair(k): rate_from_dict(v) for k, v in doc["rates"].items()}
        order = [parse_pair(k) for k in doc["order"]] if "order" in doc else None
        return cls(states, rates, order)

    @classmethod
    def load(cls, path) -> "RateMatrix":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class A4Grid:
    """Grid over initial ages ``(y1, y2)`` and elapsed time ``y``, all in ``[0, y_max]``."""

    n_y1: int = 64
    n_y2: int = 64
    n_y: int = 256
    y_max: float = 20.0

    def axes(self):
        return (
            np.linspace(0.0, self.y_max, self.n_y1),
            np.linspace(0.0, self.y_max, self.n_y2),
            np.linspace(0.0, self.y_max, self.n_y),
        )


@dataclass
class ValidationReport:
    a1_ok: bool
    C: float
    a2_ok: dict
    a3_ok: bool
    a4_margin: float
    a4_ok: bool
    a4_grid: dict
    positivity_ok: bool
    min_ratio: float | None
    warnings: list

    def to_dict(self) -> dict:
        d = asdict(self)
        d["a2_ok"] = {str(k): v for k, v in self.a2_ok.items()}
        return d


def meet_ratio_margin(m: RateMatrix, i, j, u: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``1 - (rate_ij(u) + rate_ji(w)) / (hazard_i(u) + hazard_j(w))``; NaN where the hazards vanish."""
    num = m.rates[(i, j)].values(u) + m.rates[(j, i)].values(w)
    den = np.zeros(np.broadcast(u, w).shape)
    for k in m.states:
        if k != i:
            den = den + m.rates[(i, k)].values(u)
        if k != j:
            den = den + m.rates[(j, k)].values(w)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = 1.0 - num / den
    return np.where(den > 0, out, np.nan)


def a4_margin(m: RateMatrix, grid: A4Grid = A4Grid()) -> float:
    """Maximum of the not-meeting ratio over all pairs and the grid.

    Points where both hazards vanish are skipped.
    """
    y1, y2, y = grid.axes()
    u = (y1[:, None] + y[None, :])[:, None, :]
    w = (y2[:, None] + y[None, :])[None, :, :]
    best = 0.0
    for i in m.states:
        for j in m.states:
            if i == j:
                continue
            r = meet_ratio_margin(m, i, j, u, w)
            if np.all(np.isnan(r)):
                continue
            best = max(best, float(np.nanmax(r)))
    return min(max(best, 0.0), 1.0)


def validate(m: RateMatrix, grid: A4Grid = A4Grid()) -> ValidationReport:
    notes = []
    a1 = math.isfinite(m.C)
    a2 = {}
    for i in m.states:
        a2[i] = any(m.rates[(i, j)].diverges for j in m.states if j != i)
        if not a2[i]:
            notes.append(f"cumulative hazard of state {i} stays bounded")
    positive = all(f.positive for f in m.rates.values())
    if not positive:
        zero = [f"{i}->{j}" for (i, j), f in m.rates.items() if not f.positive]
        notes.append(f"rate functions not strictly positive: {', '.join(zero)}")
        warnings.warn(notes[-1], stacklevel=2)

    if len(m.states) < 2:
        margin = 0.0
        ratio = None
    else:
        margin = a4_margin(m, grid)
        zero = np.zeros(1)
        ratios = []
        for i in m.states:
            for j in m.states:
                if i != j:
                    r = meet_ratio_margin(m, i, j, zero, zero)[0]
                    if not np.isnan(r):
                        ratios.append(1.0 - float(r))
        ratio = min(ratios) if ratios else None
    return ValidationReport(
        a1_ok=a1,
        C=m.C,
        a2_ok=a2,
        a3_ok=True,
        a4_margin=margin,
        a4_ok=margin < 1.0,
        a4_grid=asdict(grid),
        positivity_ok=positive,
        min_ratio=ratio,
        warnings=notes,
    )


def constant_matrix(states: Iterable, rates: Mapping[tuple, float]) -> RateMatrix:
    return RateMatrix(list(states), {p: Constant(float(c)) for p, c in rates.items()})
