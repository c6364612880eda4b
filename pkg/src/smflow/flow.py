"""Path-wise solution of the semi-Markov flow driven by a shared point stream.

Each chain holds a state ``x`` and an age ``y``.  Between events the age grows
at unit rate.  At an event ``(t, v)`` a chain in state ``x`` with
pre-event age ``y`` jumps to ``j`` when ``v`` lies in the interval of
``(x, j)`` at age ``y``, and its age resets to 0.

Two chains fed the same events form the coupled pair.  A *meeting* is a
transition instant after which both chains occupy the same state (one of
them has age 0).  Merging is certified when both chains jump on the same
event out of a common state: they land on the same target with age 0 and
are identical from then on.  The merge time reported is the start of that
co-location episode, i.e. the meeting at which the pair came together.

Ages are tracked as ``t - origin`` where ``origin`` is the time of the last
transition (``-y0`` initially), so no time discretisation is involved.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

from .prm import PointEvent, PrmStream, ScriptedStream
from .rates import RateMatrix

DEFAULT_MAX_TRANSITIONS = 1_000_000


@dataclass(frozen=True)
class ChainState:
    x: float
    y: float = 0.0

    def __post_init__(self):
        if not self.y >= 0:
            raise ValueError(f"age must be >= 0, got {self.y}")


@dataclass(frozen=True)
class CoupledState:
    t: float
    a: ChainState
    b: ChainState


@dataclass(frozen=True)
class TransitionRecord:
    t: float
    who: str  # "chain1" | "chain2" | "both"
    from1: float | None
    to1: float | None
    from2: float | None
    to2: float | None
    age1: float  # pre-transition ages
    age2: float | None
    v: float

    def to_dict(self):
        return asdict(self)


@dataclass
class SimOutcome:
    met: bool = False
    first_meeting: float | None = None
    N: int | None = None
    merged: bool = False
    merge_certified_at: float | None = None
    certified_by: float | None = None  # time of the joint jump that certified the merge
    n_transitions: int = 0
    censored: bool = False
    censored_at: float | None = None
    censor_reason: str | None = None
    meetings: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


@dataclass
class PathLog:
    """Everything needed to audit and replay one simulated path."""

    init1: ChainState
    init2: ChainState | None
    horizon: float
    records: list = field(default_factory=list)
    events: list = field(default_factory=list)  # every consumed event, transitions or not
    meetings: list = field(default_factory=list)
    exhausted: bool = False

    def state_at(self, t: float) -> CoupledState | ChainState:
        """State of the pair (or single chain) at time ``t`` (right-continuous)."""
        x1, o1 = self.init1.x, -self.init1.y
        if self.init2 is not None:
            x2, o2 = self.init2.x, -self.init2.y
        for r in self.records:
            if r.t > t:
                break
            if r.to1 is not None:
                x1, o1 = r.to1, r.t
            if r.to2 is not None:
                x2, o2 = r.to2, r.t
        if self.init2 is None:
            return ChainState(x1, t - o1)
        return CoupledState(t, ChainState(x1, t - o1), ChainState(x2, t - o2))

    @property
    def final(self):
        return self.state_at(self.horizon)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict()) + "\n" for r in self.records)

    def to_csv(self) -> str:
        """``t, X1, Y1, X2, Y2`` at time 0 and at every transition instant (post-jump)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "X1", "Y1", "X2", "Y2"])
        times = [0.0] + sorted({r.t for r in self.records})
        for t in times:
            s = self.state_at(t)
            if isinstance(s, ChainState):
                w.writerow([t, s.x, s.y, "", ""])
            else:
                w.writerow([t, s.a.x, s.a.y, s.b.x, s.b.y])
        return buf.getvalue()

    def replay_stream(self) -> ScriptedStream:
        return ScriptedStream(self.events)


def _next(stream):
    nxt = getattr(stream, "next_raw", None)
    if nxt is not None:
        return nxt()
    ev = stream.next_event()
    return None if ev is None else (ev.t, ev.v)


def simulate_single(m: RateMatrix, init: ChainState, horizon: float, s: PrmStream) -> PathLog:
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    m.targets(init.x)
    log = PathLog(init, None, horizon)
    x, origin = init.x, -init.y
    locate = m.locate
    while True:
        ev = _next(s)
        if ev is None:
            log.exhausted = True
            break
        t, v = ev
        if t > horizon:
            break
        log.events.append(PointEvent(t, v))
        y = t - origin
        j = locate(x, y, v)
        if j is not None:
            log.records.append(TransitionRecord(t, "chain1", x, j, None, None, y, None, v))
            x, origin = j, t
    return log


class _Stop:
    NONE = 0
    FIRST = 1  # first collective transition
    MEET = 2
    MERGE = 3


def _couple(
    m: RateMatrix,
    init1: ChainState,
    init2: ChainState,
    s: PrmStream,
    *,
    horizon: float = math.inf,
    max_transitions: int = DEFAULT_MAX_TRANSITIONS,
    stop: int = _Stop.NONE,
    log: PathLog | None = None,
) -> SimOutcome:
    m.targets(init1.x)
    m.targets(init2.x)
    out = SimOutcome()
    x1, o1 = init1.x, -init1.y
    x2, o2 = init2.x, -init2.y
    merged = False
    episode = None  # start time of the current co-location, if any
    if x1 == x2:
        if o1 == o2:
            merged = True
            out.met = out.merged = True
            out.first_meeting = out.merge_certified_at = out.certified_by = 0.0
            out.N = 0
            out.meetings.append(0.0)
            if log is not None:
                log.meetings.append(0.0)
        else:
            episode = 0.0

    locate = m.locate
    records = log.records if log is not None else None
    events = log.events if log is not None else None
    last_t = 0.0
    n = 0
    while True:
        if stop == _Stop.MEET and out.met or stop == _Stop.MERGE and merged:
            break
        if stop == _Stop.FIRST and (n >= 1 or merged):
            break
        if n >= max_transitions:
            out.censored, out.censored_at, out.censor_reason = True, last_t, "max_transitions"
            break
        ev = _next(s)
        if ev is None:
            if log is not None:
                log.exhausted = True
            out.censored, out.censored_at, out.censor_reason = True, last_t, "stream exhausted"
            break
        t, v = ev
        if t > horizon:
            out.censored, out.censored_at, out.censor_reason = True, horizon, "horizon"
            break
        last_t = t
        if events is not None:
            events.append(PointEvent(t, v))
        y1 = t - o1
        if merged:
            j = locate(x1, y1, v)
            if j is not None:
                n += 1
                if records is not None:
                    records.append(TransitionRecord(t, "both", x1, j, x1, j, y1, y1, v))
                x1 = x2 = j
                o1 = o2 = t
            continue
        y2 = t - o2
        j1 = locate(x1, y1, v)
        j2 = locate(x2, y2, v)
        if j1 is None and j2 is None:
            continue
        n += 1
        if j1 is not None and j2 is not None:
            # only reachable from a common state; both then take the same target
            if x1 != x2 or j1 != j2:
                raise AssertionError(f"joint jump to different states at t={t}")
            if records is not None:
                records.append(TransitionRecord(t, "both", x1, j1, x2, j2, y1, y2, v))
            x1 = x2 = j1
            o1 = o2 = t
            merged = True
            out.merged = True
            out.merge_certified_at = episode
            out.certified_by = t
            out.meetings.append(t)
            if not out.met:
                out.met, out.first_meeting, out.N = True, t, n
            if records is not None:
                log.meetings.append(t)
            episode = None
            continue
        if j1 is not None:
            if records is not None:
                records.append(TransitionRecord(t, "chain1", x1, j1, None, None, y1, y2, v))
            x1, o1 = j1, t
        else:
            if records is not None:
                records.append(TransitionRecord(t, "chain2", None, None, x2, j2, y1, y2, v))
            x2, o2 = j2, t
        if x1 == x2:
            episode = t
            out.meetings.append(t)
            if records is not None:
                log.meetings.append(t)
            if not out.met:
                out.met, out.first_meeting, out.N = True, t, n
        else:
            episode = None
    out.n_transitions = n
    if stop == _Stop.NONE and merged:
        out.censored = False
        out.censor_reason = None
        out.censored_at = None
    return out


def simulate_pair(
    m: RateMatrix, init1: ChainState, init2: ChainState, horizon: float, s: PrmStream
) -> tuple[PathLog, SimOutcome]:
    """Run both chains on the same events up to ``horizon``.

    The outcome is censored at the horizon unless the stream ran dry first
    (scripted streams), in which case it is censored at the last event.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    log = PathLog(init1, init2, horizon)
    out = _couple(m, init1, init2, s, horizon=horizon, log=log)
    return log, out


def run_until_meeting(
    m, init1, init2, s, max_transitions=DEFAULT_MAX_TRANSITIONS, *, horizon=math.inf, log=None
) -> SimOutcome:
    if max_transitions < 1:
        raise ValueError("max_transitions must be >= 1")
    return _couple(m, init1, init2, s, horizon=horizon, max_transitions=max_transitions, stop=_Stop.MEET, log=log)


def run_until_merge(
    m, init1, init2, s, max_transitions=DEFAULT_MAX_TRANSITIONS, *, horizon=math.inf, log=None
) -> SimOutcome:
    if max_transitions < 1:
        raise ValueError("max_transitions must be >= 1")
    return _couple(m, init1, init2, s, horizon=horizon, max_transitions=max_transitions, stop=_Stop.MERGE, log=log)


def run_first_transition(m, init1, init2, s, *, log=None) -> SimOutcome:
    """Stop after the first collective transition."""
    return _couple(m, init1, init2, s, max_transitions=1, stop=_Stop.FIRST, log=log)


def summary(log: PathLog, out: SimOutcome) -> dict:
    final = log.final
    d = {
        "horizon": log.horizon,
        "n_records": len(log.records),
        "n_events": len(log.events),
        "stream_exhausted": log.exhausted,
        **out.to_dict(),
    }
    if isinstance(final, CoupledState):
        d["final"] = {"t": final.t, "x1": final.a.x, "y1": final.a.y, "x2": final.b.x, "y2": final.b.y}
    else:
        d["final"] = {"t": log.horizon, "x": final.x, "y": final.y}
    return d
