"""Grid representation of gain-sharing functions and function-space membership.

A gain-sharing function ``f`` is stored by its values on the uniform grid
``{0, 1/n, ..., 1}`` plus a constant tail used for every ``z >= 1``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

ONE_MINUS_INV_E = 1.0 - math.exp(-1.0)
DEFAULT_TOL = 1e-9


class FunctionSpace(str, Enum):
    F0 = "F0"
    F1 = "F1"
    F3 = "F3"
    F4 = "F4"

    @classmethod
    def parse(cls, value: "str | FunctionSpace") -> "FunctionSpace":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown function space {value!r}") from None


@dataclass(frozen=True)
class GridFunction:
    """Values ``x_t = f(t/n)`` for ``t = 0..n`` and the tail value for ``z >= 1``."""

    n: int
    values: tuple[float, ...]
    tail: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"grid resolution must be a positive integer, got {self.n}")
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "tail", float(self.tail))
        if len(values) != self.n + 1:
            raise ValueError(f"expected {self.n + 1} values, got {len(values)}")
        bad = [v for v in values if not (0.0 <= v <= 1.0)]
        if bad:
            raise ValueError(f"grid values must lie in [0, 1], got {bad[0]}")
        if not (0.0 <= self.tail <= 1.0):
            raise ValueError(f"tail must lie in [0, 1], got {self.tail}")

    @classmethod
    def from_values(cls, values: Sequence[float], tail: float | None = None) -> "GridFunction":
        """Build from ``n+1`` grid values; the tail defaults to the last value."""
        values = [float(v) for v in values]
        return cls(len(values) - 1, tuple(values), values[-1] if tail is None else tail)

    @property
    def x(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def index_at(self, z: float) -> int:
        """Right-endpoint grid index for load ``z``; ``n + 1`` means the tail."""
        if z < 0:
            raise ValueError(f"load must be nonnegative, got {z}")
        t = math.ceil(z * self.n - 1e-9)
        return max(0, min(t, self.n + 1)) if z <= 1.0 + 1e-12 else self.n + 1

    def at(self, z: float) -> float:
        """Piecewise-constant evaluation, snapping ``z`` up to the next grid point."""
        t = self.index_at(z)
        return self.tail if t > self.n else self.values[t]

    def extended(self, length: int) -> np.ndarray:
        """Values ``x_0..x_{length-1}`` with the tail filled in past index ``n``."""
        out = np.full(length, self.tail, dtype=float)
        k = min(length, self.n + 1)
        out[:k] = self.values[:k]
        return out

    def to_dict(self) -> dict:
        return {"n": self.n, "values": list(self.values), "tail": self.tail}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "GridFunction":
        return cls(int(data["n"]), tuple(data["values"]), float(data["tail"]))

    @classmethod
    def from_json(cls, text: str) -> "GridFunction":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "z", "x_t"])
        for t, v in enumerate(self.values):
            writer.writerow([t, repr(t / self.n), repr(v)])
        return buf.getvalue()


def analytic_f4_value(z: float) -> float:
    """Closed-form optimum over F4: ``1 - (e^-z + e^(z-2))/2`` on [0, 1], then ``1 - 1/e``."""
    if z < 0:
        raise ValueError(f"z must be nonnegative, got {z}")
    if z >= 1.0:
        return ONE_MINUS_INV_E
    return 1.0 - (math.exp(-z) + math.exp(z - 2.0)) / 2.0


def sample_analytic_f4(n: int) -> GridFunction:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return GridFunction(n, tuple(analytic_f4_value(t / n) for t in range(n + 1)), ONE_MINUS_INV_E)


def envelope_function(n: int) -> GridFunction:
    """The pointwise lower envelope ``x_t = 1 - e^(-t/n)``, the smallest F3 member."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    values = [1.0 - math.exp(-t / n) for t in range(n + 1)]
    values[-1] = ONE_MINUS_INV_E
    return GridFunction(n, tuple(values), ONE_MINUS_INV_E)


def lower_envelope_value(space: FunctionSpace | str, t: int, n: int) -> float:
    space = FunctionSpace.parse(space)
    if n < 1 or not (0 <= t <= n):
        raise ValueError(f"grid index t={t} out of range for n={n}")
    if space in (FunctionSpace.F3, FunctionSpace.F4):
        return 1.0 - math.exp(-t / n)
    return 0.0


@dataclass(frozen=True)
class Violation:
    constraint: str
    t: int | None
    residual: float


def check_space(f: GridFunction, space: FunctionSpace | str, tol: float = DEFAULT_TOL) -> list[Violation]:
    """Return every membership violation larger than ``tol``; empty means ``f`` is a member."""
    space = FunctionSpace.parse(space)
    n, x = f.n, f.x
    out: list[Violation] = []

    def flag(name: str, t: int | None, residual: float):
        if residual > tol:
            out.append(Violation(name, t, float(residual)))

    for t in range(n):
        flag("monotone", t, x[t] - x[t + 1])
    flag("tail-monotone", n, x[n] - f.tail)

    if space is FunctionSpace.F0:
        return out
    flag("f(1) <= 1-1/e", n, x[n] - ONE_MINUS_INV_E)
    if space is FunctionSpace.F1:
        return out

    flag("f(1) = 1-1/e", n, abs(x[n] - ONE_MINUS_INV_E))
    flag("tail = 1-1/e", None, abs(f.tail - ONE_MINUS_INV_E))
    for t in range(n + 1):
        flag("envelope", t, (1.0 - math.exp(-t / n)) - x[t])
    if space is FunctionSpace.F3:
        return out

    for t in range(n):
        slope = n * (x[t + 1] - x[t])
        flag("slope >= 0", t, -slope)
        flag("slope <= e^-z - (1 - f)", t, slope - (math.exp(-t / n) - (1.0 - x[t])))
    return out
