"""Manufactured solutions usable as source presets (``source = mms:<id>``)."""

from __future__ import annotations

from dataclasses import dataclass

from .expr import parse_expression


@dataclass(frozen=True)
class Manufactured:
    preset: str
    p: float
    lam: float
    dim: int
    solution: str
    source: str

    def exact(self):
        return parse_expression(self.solution)

    def f(self):
        return parse_expression(self.source)


# -(|u'|^{p-2} u')' + lam u = f with u = x(1-x), p = 3: (|u'| u')' = -4|1-2x|.
MANUFACTURED = {
    "p3_1d": Manufactured("resolvent", 3.0, 1.0, 1, "x*(1-x)", "4*|1-2*x| + x*(1-x)"),
    "p2_square": Manufactured(
        "linear", 2.0, 1.0, 2, "sin(pi*x)*sin(pi*y)",
        "(2*pi^2 + 1)*sin(pi*x)*sin(pi*y)",
    ),
}


def get_manufactured(name: str) -> Manufactured:
    try:
        return MANUFACTURED[name]
    except KeyError:
        raise ValueError(f"unknown manufactured solution {name!r}; known: {sorted(MANUFACTURED)}") from None
