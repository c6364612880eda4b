import math

import numpy as np
import pytest
from scipy import stats

from smflow.prm import (
    PointEvent,
    ScriptedStream,
    SeededStream,
    splitmix64,
    substream,
    take,
)


def test_scripted_stream_yields_then_exhausts():
    s = ScriptedStream([(1, 1.5), (1.5, 0.5)])
    assert s.next_event() == PointEvent(1.0, 1.5)
    assert s.next_event() == PointEvent(1.5, 0.5)
    assert s.next_event() is None
    assert s.next_event() is None


def test_scripted_stream_json():
    s = ScriptedStream.from_json('[{"t": 1.0, "v": 1.5}, {"t": 1.5, "v": 0.5}]')
    assert list(s) == [PointEvent(1.0, 1.5), PointEvent(1.5, 0.5)]
    assert ScriptedStream.from_json(s.to_json()).points == s.points


def test_scripted_stream_rejects_unordered_times():
    with pytest.raises(ValueError):
        ScriptedStream([(1.0, 0.1), (1.0, 0.2)])
    with pytest.raises(ValueError):
        ScriptedStream([(0.0, 0.1)])


def test_splitmix64_reference_values():
    # first outputs of the reference SplitMix64 generator seeded with 0
    state = 0
    outs = []
    for _ in range(3):
        outs.append(splitmix64(state))
        state = (state + 0x9E3779B97F4A7C15) & ((1 << 64) - 1)
    assert outs == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_seeded_mean_gap():
    s = SeededStream(7, 2.0)
    ts = np.array([e.t for e in take(s, 100_000)])
    gaps = np.diff(np.concatenate([[0.0], ts]))
    se = gaps.std(ddof=1) / math.sqrt(len(gaps))
    assert abs(gaps.mean() - 0.5) < 3 * se


def test_seeded_determinism_and_strict_order():
    a = take(SeededStream(42, 3.5), 1000)
    b = take(SeededStream(42, 3.5), 1000)
    assert a == b
    assert all(e2.t > e1.t for e1, e2 in zip(a, a[1:]))
    assert all(0.0 <= e.v < 3.5 for e in a)
    assert take(SeededStream(43, 3.5), 10) != a[:10]


def test_substreams_distinct_and_reproducible():
    root = SeededStream(11, 1.0)
    s0 = take(substream(root, 0), 50)
    s1 = take(substream(root, 1), 50)
    assert s0 != s1
    assert take(substream(SeededStream(11, 1.0), 0), 50) == s0
    assert take(root, 50) != s0
    with pytest.raises(TypeError):
        substream(ScriptedStream([]), 0)


def test_pooled_marks_uniform_chi_square():
    root = SeededStream(2024, 4.0)
    marks = np.concatenate([[e.v for e in take(substream(root, k), 1000)] for k in range(100)])
    counts, _ = np.histogram(marks, bins=20, range=(0.0, 4.0))
    assert stats.chisquare(counts).pvalue > 0.01


def test_counting_property_poisson():
    T, a, b = 3.0, 0.5, 1.25
    mean = T * (b - a)
    root = SeededStream(99, 2.0)
    counts = []
    for k in range(3000):
        s = substream(root, k)
        c = 0
        while True:
            e = s.next_event()
            if e.t > T:
                break
            c += a <= e.v < b
        counts.append(c)
    counts = np.array(counts)
    kmax = 6
    observed = np.array([np.sum(counts == k) for k in range(kmax)] + [np.sum(counts >= kmax)])
    pmf = stats.poisson.pmf(np.arange(kmax), mean)
    expected = len(counts) * np.append(pmf, 1 - pmf.sum())
    assert stats.chisquare(observed, expected).pvalue > 0.01


def test_marks_independent_of_gaps():
    ev = take(SeededStream(5, 1.7), 20_000)
    ts = np.array([e.t for e in ev])
    gaps = np.diff(np.concatenate([[0.0], ts]))
    marks = np.array([e.v for e in ev])
    assert stats.spearmanr(gaps, marks).pvalue > 0.01


def test_invalid_strip_height():
    with pytest.raises(ValueError):
        SeededStream(1, 0.0)
