"""Two-step hard thresholding for multi-task coefficient stacks.

The element step zeroes every coefficient with magnitude strictly below the
level; the group step then zeroes, jointly across datasets, every position
whose surviving squared coefficients sum to strictly less than s0 * level^2.
Both comparisons keep boundary values.
"""

import numpy as np

from .errors import InvalidSpec
from .model import CoefficientStack


def _element(values, level):
    return np.where(np.abs(values) >= level, values, 0.0)


def _group(values, level, s0):
    energy = np.einsum("ki,ki->i", values, values)
    mask = energy >= s0 * level * level
    return np.where(mask[None, :], values, 0.0)


def _two_step(values, level, s0):
    return _group(_element(values, level), level, s0)


def _check(level, s0=1.0):
    if level < 0:
        raise InvalidSpec("threshold level must be non-negative")
    if s0 <= 0:
        raise InvalidSpec("s0 must be positive")


def element_threshold(stack, level):
    """Zero entries with |value| < level; boundary values are kept."""
    _check(level)
    return CoefficientStack(_element(stack.values, level), stack.node)


def group_threshold(stack, level, s0):
    """Zero positions whose across-dataset energy is below s0 * level^2.

    Position i survives iff sum_k stack[k, i]^2 >= s0 * level^2; survivors
    keep their values in every dataset, including exact boundary cases.
    """
    _check(level, s0)
    return CoefficientStack(_group(stack.values, level, s0), stack.node)


def two_step_threshold(stack, level, s0):
    """Element threshold followed by the group threshold at the same level."""
    _check(level, s0)
    return CoefficientStack(_two_step(stack.values, level, s0), stack.node)
