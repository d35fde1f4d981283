"""Sound under- and over-approximations of POMDP values."""

from fractions import Fraction

from ._pomdpv import (
    Model,
    ModelError,
    ParseError,
    generate,
    heuristic_presets,
    load_model,
    parse_model,
    run,
    running_example,
)
from . import _pomdpv

__all__ = [
    "Model",
    "ModelError",
    "ParseError",
    "belief_successors",
    "generate",
    "heuristic_presets",
    "load_model",
    "next_belief",
    "parse_model",
    "run",
    "running_example",
]


def _out(belief):
    return {s: Fraction(p) for s, p in belief.items()}


def _in(belief):
    return {int(s): str(Fraction(p)) for s, p in belief.items()}


def next_belief(model, belief, action, observation):
    """Bayesian update of ``belief`` ({state: probability}) after ``action`` and ``observation``."""
    return _out(_pomdpv.next_belief(model, _in(belief), action, observation))


def belief_successors(model, belief, action):
    """List of (probability, successor belief), one per reachable observation."""
    return [(Fraction(p), _out(b)) for p, b in _pomdpv.belief_successors(model, _in(belief), action)]
