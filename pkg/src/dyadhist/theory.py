"""Sample-size planning formulas and structural histogram conversions.

The budgets turn the learners' statistical guarantees into concrete sample
counts (existential constants default to C=1, so these are planning aids,
not certificates).  Grid logs are base 2; the confidence term uses ln(1/delta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import (
    DyadicRect,
    GridSpec,
    HistHypothesis,
    HistKind,
    Piece,
    Rect,
)
from .errors import ConfigurationError, StructureError


class BudgetFormula(Enum):
    FIXED_GRID_L1 = "fixed_grid_l1"
    ADAPTIVE_L1 = "adaptive_l1"
    L2 = "l2"


@dataclass(frozen=True)
class SampleBudget:
    n: int
    formula: BudgetFormula
    inputs: tuple  # (k, d, m, eps, delta, xi, C) echo


def sample_budget(
    formula: BudgetFormula,
    k: int,
    d: int,
    eps: float,
    delta: float,
    xi: float = 1.0,
    m: int | None = None,
    C: float = 1.0,
) -> SampleBudget:
    """Sample count for the requested guarantee.

    * FIXED_GRID_L1: ceil(C * ((1+xi) 2^d k log2(m)^(d+1) + ln(1/delta)) / eps^2)
    * ADAPTIVE_L1:   ceil(C * ((1+xi) d 2^d k log2(k/eps)^(d+2) + ln(1/delta)) / eps^2)
    * L2:            ceil(C * ln(1/delta) / eps)
    """
    if not (0 < eps < 1):
        raise ValueError(f"eps must be in (0,1), got {eps}")
    if not (0 < delta < 1):
        raise ValueError(f"delta must be in (0,1), got {delta}")
    if k < 1 or d < 1:
        raise ValueError("k and d must be >= 1")
    if xi <= 0 or C <= 0:
        raise ValueError("xi and C must be positive")
    log_conf = math.log(1.0 / delta)
    if formula is BudgetFormula.FIXED_GRID_L1:
        if m is None or m < 2:
            raise ValueError("fixed-grid budget needs discrete side m >= 2")
        main = (1.0 + xi) * (1 << d) * k * math.log2(m) ** (d + 1)
        n = math.ceil(C * (main + log_conf) / eps**2)
    elif formula is BudgetFormula.ADAPTIVE_L1:
        main = (1.0 + xi) * d * (1 << d) * k * math.log2(k / eps) ** (d + 2)
        n = math.ceil(C * (main + log_conf) / eps**2)
    elif formula is BudgetFormula.L2:
        n = math.ceil(C * log_conf / eps)
    else:
        raise ValueError(f"unknown formula {formula}")
    return SampleBudget(n=max(1, n), formula=formula, inputs=(k, d, m, eps, delta, xi, C))


def dyadic_intervals(lo: int, hi: int) -> list:
    """Canonical decomposition of rank interval [lo, hi) into maximal dyadic blocks.

    Each returned (start, length-exponent) block [s, s + 2^t) has s divisible
    by 2^t; the greedy choice takes the largest aligned block at every step,
    which yields at most 2*log2(span) blocks.
    """
    out = []
    while lo < hi:
        t = (lo & -lo).bit_length() - 1 if lo else (hi - lo).bit_length() - 1
        t = min(t, (hi - lo).bit_length() - 1)
        out.append((lo, t))
        lo += 1 << t
    return out


def to_hierarchical(h: HistHypothesis, grid: GridSpec) -> HistHypothesis:
    """Refine a histogram with on-grid vertices into per-axis dyadic products.

    Every piece interval is decomposed into maximal dyadic rank intervals and
    replaced by the cross product, so the output is value-identical to the
    input (zero L1 distance) with at most (2*log2 M)^d sub-pieces per piece.
    The sub-pieces are products of per-axis dyadic intervals of possibly
    different levels, so the result is returned as an ARBITRARY hypothesis
    carrying the grid, not as a single-level dyadic partition.
    """
    if h.domain != grid.domain:
        raise ConfigurationError("histogram and grid disagree on the domain")
    pieces = []
    for p in h.pieces:
        rank_lo, rank_hi = [], []
        for a in range(grid.dim):
            axis = grid.axes[a]
            i0 = int(np.searchsorted(axis, p.rect.lo[a], side="left"))
            i1 = int(np.searchsorted(axis, p.rect.hi[a], side="left"))
            if i0 >= len(axis) or axis[i0] != p.rect.lo[a]:
                raise StructureError(f"piece vertex {p.rect.lo[a]} not on grid axis {a}")
            if i1 >= len(axis) or axis[i1] != p.rect.hi[a]:
                raise StructureError(f"piece vertex {p.rect.hi[a]} not on grid axis {a}")
            rank_lo.append(i0)
            rank_hi.append(i1)
        blocks = [dyadic_intervals(l, r) for l, r in zip(rank_lo, rank_hi)]

        def emit(axis, lo_acc, hi_acc):
            if axis == grid.dim:
                pieces.append(Piece(Rect(tuple(lo_acc), tuple(hi_acc)), p.value))
                return
            for s, t in blocks[axis]:
                emit(
                    axis + 1,
                    lo_acc + [grid.coord(axis, s)],
                    hi_acc + [grid.coord(axis, s + (1 << t))],
                )

        emit(0, [], [])
    return HistHypothesis(domain=h.domain, pieces=tuple(pieces), kind=h.kind, grid=grid)


def strictly_greater_region(h: HistHypothesis, g: HistHypothesis) -> list:
    """The set {x : h(x) > g(x)} as disjoint dyadic rectangles.

    ``h`` is a partial (or total) hierarchical histogram, ``g`` a total
    hierarchical histogram on the same grid; values are nonnegative, so the
    region lies inside h's support and consists of at most
    (pieces of h) + (pieces of g) rectangles.
    """
    if h.grid is None or g.grid is None or h.dyadic is None or g.dyadic is None:
        raise ConfigurationError("both histograms must carry grid and dyadic ids")
    if not h.grid.same_as(g.grid):
        raise ConfigurationError("histograms live on different grids")
    if g.kind is not HistKind.HIERARCHICAL:
        raise ConfigurationError("g must be a total hierarchical histogram")
    region = []
    for hr, hp in zip(h.dyadic, h.pieces):
        container = None
        for gr, gp in zip(g.dyadic, g.pieces):
            if gr.contains(hr):
                container = gp
                break
        if container is not None:
            if hp.value > container.value:
                region.append(hr)
            continue
        for gr, gp in zip(g.dyadic, g.pieces):
            if hr.contains(gr) and hp.value > gp.value:
                region.append(gr)
    return sorted(region)


__all__ = [
    "BudgetFormula",
    "SampleBudget",
    "sample_budget",
    "dyadic_intervals",
    "to_hierarchical",
    "strictly_greater_region",
]
