"""Shared test fixtures: the standard function battery on [0, 1].

Each battery member carries exact-extremum hints (its interior turning
points), the closed-form integral over [0, 1], a Lipschitz constant
where one exists, and its supremum.  The staircase is the only member
not expressible as a formula, so integrands are exercised both as
expression trees and as plain vectorized callables.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import pytest

from quadratura import expr
from quadratura.expr import Expr


def _staircase(x):
    return np.where(np.asarray(x, dtype=float) < 0.5, 0.0, 1.0)


@dataclass(frozen=True)
class BatteryFn:
    name: str
    fn: Union[Expr, Callable]
    hints: tuple[float, ...]
    integral_01: float
    lipschitz: Optional[float]
    continuous: bool
    sup_01: float


BATTERY = (
    BatteryFn("one", expr.parse("1"), (), 1.0, 0.0, True, 1.0),
    BatteryFn("x", expr.parse("x"), (), 0.5, 1.0, True, 1.0),
    BatteryFn("x_squared", expr.parse("x^2"), (), 1.0 / 3.0, 2.0, True, 1.0),
    BatteryFn("vee", expr.parse("abs(x-1/2)"), (0.5,), 0.25, 1.0, True, 0.5),
    BatteryFn("staircase", _staircase, (0.5,), 0.5, None, False, 1.0),
)


@pytest.fixture
def battery():
    return BATTERY
