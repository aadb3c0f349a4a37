"""Shipped model manifolds."""

from __future__ import annotations

import math

from .manifold import CoframeModel

TWO_PI = 2.0 * math.pi


def torus(n: int, coords=None) -> CoframeModel:
    """Flat torus T^n with coordinates th1..thn of period 2*pi and e^i = d(th_i)."""
    coords = list(coords) if coords is not None else [f"th{i + 1}" for i in range(n)]
    return CoframeModel(f"T{n}", coords, [TWO_PI] * n)


def heisenberg_circle() -> CoframeModel:
    """Nil^3 x S^1 with e^1 = dx, e^2 = dy, e^3 = dz - x dy, e^4 = dw.

    de^3 = -e^1 ^ e^2. The lattice is generated by y -> y + 2pi,
    z -> z + 4pi^2, w -> w + 2pi and x -> x + 2pi combined with
    z -> z + 2pi*y, so the fiber T^2 in (y, z) has monodromy ((1,1),(0,1))
    in the normalised coordinates (z/4pi^2, y/2pi).
    """
    return CoframeModel(
        "Nil3xS1",
        ["x", "y", "z", "w"],
        [TWO_PI, TWO_PI, TWO_PI * TWO_PI, TWO_PI],
        structure_constants={(2, 0, 1): -1.0},
        frame_fields=[
            ["1", "0", "0", "0"],
            ["0", "1", "0", "0"],
            ["0", "x", "1", "0"],
            ["0", "0", "0", "1"],
        ],
        coframe=[
            ["1", "0", "0", "0"],
            ["0", "1", "0", "0"],
            ["0", "-x", "1", "0"],
            ["0", "0", "0", "1"],
        ],
        shears=[(0, 2, 1, TWO_PI)],
    )


def shipped_models() -> dict:
    return {
        "T3": torus(3),
        "T4": torus(4),
        "T5": torus(5),
        "T6": torus(6),
        "Nil3xS1": heisenberg_circle(),
    }
