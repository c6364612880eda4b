"""Event streams for the Poisson random measure driving the flow.

A seeded stream realises a homogeneous Poisson random measure on the strip
``[0, inf) x [0, C)`` with Lebesgue intensity: arrival gaps are exponential
with mean ``1/C`` and marks are uniform on ``[0, C)``.

Bit-exact generator contract
----------------------------
* The generator is numpy's ``Philox`` (Philox4x64-10, counter-based) keyed by
  a 64-bit integer and wrapped in ``numpy.random.Generator``.
* A root stream built from ``seed`` uses key ``splitmix64(seed)``.
* ``substream(s, k)`` uses key ``splitmix64(s.key ^ splitmix64(k + 1))``,
  all arithmetic modulo 2**64 with the standard SplitMix64 finaliser
  (increment 0x9E3779B97F4A7C15, multipliers 0xBF58476D1CE4E5B9 and
  0x94D049BB133111EB, shifts 30/27/31).
* Events are drawn in blocks of ``BLOCK`` points: within a block the
  generator first produces ``BLOCK`` standard exponentials (gaps, divided by
  ``C``), then ``BLOCK`` uniforms on ``[0, 1)`` (marks, multiplied by ``C``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

MASK64 = (1 << 64) - 1
BLOCK = 64


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class PointEvent:
    t: float
    v: float

    def to_dict(self):
        return {"t": self.t, "v": self.v}


class PrmStream:
    """Common interface: ``next_event()`` returns a PointEvent or None when exhausted."""

    def next_event(self) -> PointEvent | None:
        raise NotImplementedError

    def __iter__(self) -> Iterator[PointEvent]:
        while True:
            ev = self.next_event()
            if ev is None:
                return
            yield ev


class SeededStream(PrmStream):
    def __init__(self, seed: int, C: float, *, _key: int | None = None):
        if not (C > 0 and math.isfinite(C)):
            raise ValueError(f"strip height C must be positive and finite, got {C}")
        self.seed = int(seed) & MASK64
        self.C = float(C)
        self.key = splitmix64(self.seed) if _key is None else _key
        self._rng = np.random.Generator(np.random.Philox(key=self.key))
        self._t = 0.0
        self._times: list[float] = []
        self._marks: list[float] = []
        self._pos = 0
        self._below_C = math.nextafter(self.C, 0.0)

    def _refill(self):
        gaps = self._rng.standard_exponential(BLOCK) / self.C
        marks = self._rng.random(BLOCK) * self.C
        times = self._t + np.cumsum(gaps)
        self._t = float(times[-1])
        self._times = times.tolist()
        self._marks = np.minimum(marks, self._below_C).tolist()
        self._pos = 0

    def next_event(self):
        if self._pos == len(self._times):
            self._refill()
        k = self._pos
        self._pos = k + 1
        return PointEvent(self._times[k], self._marks[k])

    def next_raw(self) -> tuple[float, float]:
        """Same as ``next_event`` without building a PointEvent."""
        if self._pos == len(self._times):
            self._refill()
        k = self._pos
        self._pos = k + 1
        return self._times[k], self._marks[k]

    def __repr__(self):
        return f"SeededStream(seed={self.seed}, C={self.C}, key={self.key:#x})"


class ScriptedStream(PrmStream):
    """Deterministic finite list of points; marks outside ``[0, C)`` are allowed."""

    def __init__(self, points: Iterable[PointEvent | tuple | dict]):
        pts = []
        for p in points:
            if isinstance(p, PointEvent):
                pts.append(p)
            elif isinstance(p, dict):
                pts.append(PointEvent(float(p["t"]), float(p["v"])))
            else:
                t, v = p
                pts.append(PointEvent(float(t), float(v)))
        for a, b in zip([None] + pts, pts):
            if b.t <= 0 or (a is not None and b.t <= a.t):
                raise ValueError("scripted event times must be positive and strictly increasing")
        self.points: tuple[PointEvent, ...] = tuple(pts)
        self._pos = 0

    def next_event(self):
        if self._pos >= len(self.points):
            return None
        ev = self.points[self._pos]
        self._pos += 1
        return ev

    def next_raw(self):
        ev = self.next_event()
        return None if ev is None else (ev.t, ev.v)

    def to_json(self) -> str:
        return json.dumps([p.to_dict() for p in self.points])

    @classmethod
    def from_json(cls, text: str) -> "ScriptedStream":
        return cls(json.loads(text))

    @classmethod
    def load(cls, path) -> "ScriptedStream":
        with open(path) as fh:
            return cls(json.load(fh))


def substream(s: PrmStream, replica_index: int) -> SeededStream:
    """Independent stream for replica ``replica_index``, derived from ``s``'s key."""
    if not isinstance(s, SeededStream):
        raise TypeError("substreams are only defined for seeded streams")
    if replica_index < 0:
        raise ValueError("replica index must be nonnegative")
    key = splitmix64(s.key ^ splitmix64(int(replica_index) + 1))
    return SeededStream(s.seed, s.C, _key=key)


def take(s: PrmStream, n: int) -> list[PointEvent]:
    out = []
    for _ in range(n):
        ev = s.next_event()
        if ev is None:
            break
        out.append(ev)
    return out
