"""Built-in rate matrices and scripted scenarios used by tests, scripts and the CLI."""

from __future__ import annotations

from .flow import ChainState
from .prm import ScriptedStream
from .rates import Constant, PiecewiseConstant, RateMatrix, Saturating, constant_matrix


def saturating_two_state() -> RateMatrix:
    """Two states, both rates ``y/(1+y)``, pair (1,2) laid out before (2,1)."""
    return RateMatrix([1, 2], {(1, 2): Saturating(1.0), (2, 1): Saturating(1.0)})


def counterexample_script() -> ScriptedStream:
    """Two points: chain 2 jumps onto chain 1 at t=1, chain 1 alone leaves at t=3/2."""
    return ScriptedStream([(1.0, 1.5), (1.5, 0.5)])


def counterexample_inits() -> tuple[ChainState, ChainState]:
    return ChainState(1, 0.0), ChainState(2, 1.0)


def three_state_constant() -> RateMatrix:
    return constant_matrix(
        [1, 2, 3],
        {(1, 2): 1, (1, 3): 2, (2, 1): 3, (2, 3): 1, (3, 1): 1, (3, 2): 1},
    )


def three_state_mixed() -> RateMatrix:
    """Each row has one constant entry; the rest are age dependent."""
    return RateMatrix(
        [1, 2, 3],
        {
            (1, 2): Constant(0.5),
            (1, 3): Saturating(2.0),
            (2, 1): Saturating(1.5),
            (2, 3): Constant(0.4),
            (3, 1): PiecewiseConstant([0.5, 2.0], [0.2, 1.0], 0.6),
            (3, 2): Constant(0.7),
        },
    )


def three_state_saturating() -> RateMatrix:
    return RateMatrix(
        [1, 2, 3],
        {
            (1, 2): Saturating(1.0),
            (1, 3): Saturating(2.0),
            (2, 1): Saturating(3.0),
            (2, 3): Saturating(1.0),
            (3, 1): Saturating(1.0),
            (3, 2): Saturating(1.0),
        },
    )


MATRICES = {
    "saturating-two-state": saturating_two_state,
    "three-state-constant": three_state_constant,
    "three-state-mixed": three_state_mixed,
    "three-state-saturating": three_state_saturating,
}
