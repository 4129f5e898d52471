"""Greedy dyadic splitting learners.

Three variants share one loop: starting from the root of a grid's dyadic
decomposition, repeat ``levels`` times: score every leaf, pick the
``ceil((1+xi)*k)`` worst ones, and split each chosen leaf that still can be
split and has positive score into its 2^d children.

* ``greedy_split``      scores a leaf by the best-constant max dyadic
                        discrepancy (fit_d1 / compute_d1) and outputs the
                        fitted constants.
* ``greedy_split_l2``   scores by the exact squared error of the flattening
                        (discrete domains) and outputs flattenings.
* ``adaptive_greedy_split`` first builds the data-dependent grid whose axis
                        boundaries are the distinct sample coordinates,
                        removing any dependence on the ambient domain size.

Leaf scores are cached across iterations; an unsplit leaf's score cannot
change, so results are identical to rescoring every round.  Everything is
deterministic: ties in "largest e_R" break by (e desc, level desc, index asc).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Domain,
    DyadicRect,
    EmpiricalDist,
    GridSpec,
    HistHypothesis,
    HistKind,
    Piece,
    next_pow2,
)
from .ddist import DFitResult, build_tree, fit_d1
from .errors import DegenerateRegionError, UnsupportedDomainError


@dataclass(frozen=True)
class SplitParams:
    """Knobs of the greedy splitters.

    ``xi`` is the overshoot factor: each round splits up to ceil((1+xi)*k)
    leaves.  ``gamma`` is the constant-fit tolerance handed to fit_d1; when
    None it defaults to eps/(16*k*(1+xi)*2^d*log2(M)) with eps=0.1, the same
    formula the CLI uses with its --eps flag.  ``max_levels`` caps the number
    of splitting rounds (default: the full grid depth).
    """

    k: int
    xi: float = 1.0
    gamma: float | None = None
    max_levels: int | None = None
    normalize_output: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.xi > 0:
            raise ValueError(f"xi must be positive, got {self.xi}")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.max_levels is not None and self.max_levels < 0:
            raise ValueError("max_levels must be nonnegative")


def default_gamma(k: int, xi: float, dim: int, levels: int, eps: float = 0.1) -> float:
    """Fit tolerance keeping the total fit slack across leaves well under eps."""
    return eps / (16.0 * k * (1.0 + xi) * (1 << dim) * max(1, levels))


def piece_bound(k: int, xi: float, dim: int, levels: int) -> int:
    """Hard cap on the leaf count: ceil(1+xi) * 2^d * k * levels (>= 1)."""
    return max(1, math.ceil(1.0 + xi) * (1 << dim) * k * levels)


@dataclass
class IterationRecord:
    iteration: int
    leaves: list
    values: list
    errors: list
    chosen: list
    split: list


@dataclass
class SplitTrace:
    """Per-iteration record of leaves, scores, the chosen set and actual splits."""

    iterations: list = field(default_factory=list)

    def to_text(self) -> str:
        """Canonical serialization; byte-equal traces mean identical runs."""
        out = []
        for rec in self.iterations:
            out.append(f"iteration {rec.iteration}")
            for r, a, e in zip(rec.leaves, rec.values, rec.errors):
                out.append(f"  leaf {r.level}:{','.join(map(str, r.index))} a={a!r} e={e!r}")
            out.append("  chosen " + " ".join(f"{r.level}:{','.join(map(str, r.index))}" for r in rec.chosen))
            out.append("  split " + " ".join(f"{r.level}:{','.join(map(str, r.index))}" for r in rec.split))
        return "\n".join(out) + "\n"


@dataclass
class _Leaf:
    sel: np.ndarray
    a: float = 0.0
    err: float = 0.0
    fitted: bool = False


def _split_leaf(rect: DyadicRect, leaf: _Leaf, cells: np.ndarray, dim: int):
    """Partition a leaf's point selector among its 2^d children."""
    children = rect.children()
    sel = leaf.sel
    if len(sel):
        child_of = np.zeros(len(sel), dtype=np.int64)
        for a in range(dim):
            bit = (cells[sel, a] >> (rect.level - 1)) & 1
            child_of = (child_of << 1) | bit
        return [(ch, _Leaf(sel=sel[child_of == i])) for i, ch in enumerate(children)]
    return [(ch, _Leaf(sel=sel)) for ch in children]


def _run_split_loop(fhat, grid, params, score_leaf):
    """Shared loop; ``score_leaf(rect, leaf, cells)`` fills leaf.a / leaf.err."""
    dim = grid.dim
    levels = grid.levels
    iters = levels if params.max_levels is None else min(params.max_levels, levels)
    n_split = math.ceil((1.0 + params.xi) * params.k)

    cells = (
        grid.cell_index(fhat.points)
        if fhat.support_size
        else np.zeros((0, dim), dtype=np.int64)
    )
    root = grid.root()
    leaves: dict = {root: _Leaf(sel=np.arange(fhat.support_size, dtype=np.int64))}
    internal: list = []
    trace = SplitTrace()

    for it in range(1, iters + 1):
        for rect, leaf in leaves.items():
            if not leaf.fitted:
                score_leaf(rect, leaf, cells)
                leaf.fitted = True
        order = sorted(
            leaves, key=lambda r: (-leaves[r].err, -r.level, r.index)
        )
        chosen = order[:n_split]
        to_split = [r for r in chosen if r.level > 0 and leaves[r].err > 0.0]
        snapshot = sorted(leaves)
        trace.iterations.append(
            IterationRecord(
                iteration=it,
                leaves=snapshot,
                values=[leaves[r].a for r in snapshot],
                errors=[leaves[r].err for r in snapshot],
                chosen=list(chosen),
                split=list(to_split),
            )
        )
        for rect in to_split:
            leaf = leaves.pop(rect)
            internal.append(rect)
            for ch, child_leaf in _split_leaf(rect, leaf, cells, dim):
                leaves[ch] = child_leaf

    for rect, leaf in leaves.items():
        if not leaf.fitted:
            score_leaf(rect, leaf, cells)
            leaf.fitted = True

    bound = piece_bound(params.k, params.xi, dim, iters)
    assert len(leaves) <= bound, f"{len(leaves)} leaves exceed bound {bound}"
    return leaves, internal, trace, cells


def _build_hypothesis(grid, leaves, internal, normalize):
    order = sorted(leaves)
    pieces = tuple(Piece(grid.rect_of(r), leaves[r].a) for r in order)
    tree = {r: -1 for r in internal}
    tree.update({r: i for i, r in enumerate(order)})
    hyp = HistHypothesis(
        domain=grid.domain,
        pieces=pieces,
        kind=HistKind.HIERARCHICAL,
        grid=grid,
        dyadic=tuple(order),
        tree=tree,
    )
    if normalize:
        hyp = renormalize(hyp)
    return hyp


def greedy_split(fhat: EmpiricalDist, grid: GridSpec, params: SplitParams):
    """Learn a hierarchical histogram minimizing max dyadic discrepancy.

    Returns ``(hypothesis, trace)``.  Leaf count obeys
    ``piece_bound(k, xi, d, log2 M)`` (hard assertion); the achieved
    discrepancy against ``fhat`` is within a constant factor (3 + 6/xi^2)
    of the best partial hierarchical k-histogram, plus fit slack bounded by
    leaves * gamma.
    """
    if fhat.domain != grid.domain:
        raise ValueError("empirical distribution and grid disagree on the domain")
    gamma = (
        params.gamma
        if params.gamma is not None
        else default_gamma(params.k, params.xi, grid.dim, grid.levels)
    )

    def score(rect, leaf, cells):
        tree = build_tree(fhat, grid, rect, cells=cells, sel=leaf.sel)
        fit = fit_d1(fhat, grid, rect, gamma, tree=tree)
        leaf.a, leaf.err = fit.a, fit.err

    leaves, internal, trace, _ = _run_split_loop(fhat, grid, params, score)
    hyp = _build_hypothesis(grid, leaves, internal, params.normalize_output)
    return hyp, trace


def greedy_split_l2(g: EmpiricalDist, grid: GridSpec, params: SplitParams):
    """Learn a hierarchical histogram minimizing squared error, discrete only.

    The per-leaf constant is the exact flattening and the score is the exact
    squared error, computed over support points plus one closed-form term
    for the empty remainder: sum_supp (g(x)-a)^2 + (vol - s) * a^2.
    """
    if not g.domain.is_discrete:
        raise UnsupportedDomainError("the squared-error learner needs a discrete cube")
    if g.domain != grid.domain:
        raise ValueError("empirical distribution and grid disagree on the domain")
    n = g.n if g.support_size else 1

    def score(rect, leaf, cells):
        vol = grid.volume_of(rect)
        masses = g.counts[leaf.sel] / n
        total = float(masses.sum())
        if vol <= 0:
            leaf.a, leaf.err = 0.0, 0.0
            return
        a = total / vol
        err = float(np.sum((masses - a) ** 2)) + (vol - len(masses)) * a * a
        leaf.a, leaf.err = a, max(0.0, err)

    leaves, internal, trace, _ = _run_split_loop(g, grid, params, score)
    hyp = _build_hypothesis(grid, leaves, internal, params.normalize_output)
    return hyp, trace


def build_adaptive_grid(samples: EmpiricalDist) -> GridSpec:
    """Grid whose interior boundaries are the distinct sample coordinates.

    Per axis the sorted distinct coordinates become interior boundaries,
    padded by repeating the maximal coordinate until every axis has M cells,
    where M is the least power of 2 >= (largest distinct count + 1); domain
    bounds are then prepended/appended.  Padded cells have zero width and
    zero sample mass.
    """
    if samples.support_size == 0:
        raise ValueError("cannot build an adaptive grid from an empty sample set")
    domain = samples.domain
    uniques = [np.unique(samples.points[:, a]) for a in range(domain.dim)]
    m_cells = max(next_pow2(len(u) + 1) for u in uniques)
    axes = []
    for u in uniques:
        interior = np.concatenate([u, np.full(m_cells - 1 - len(u), u[-1])])
        axes.append(
            np.concatenate([[domain.lower], interior, [domain.upper]]).astype(np.float64)
        )
    return GridSpec(domain, tuple(axes))


def adaptive_greedy_split(samples: EmpiricalDist, params: SplitParams):
    """Data-adaptive variant: grid over the sample coordinates, then split.

    Works on discrete and unit-cube domains alike; the grid side is at most
    2n, so runtime has no dependence on the ambient domain size.
    """
    grid = build_adaptive_grid(samples)
    return greedy_split(samples, grid, params)


def renormalize(h: HistHypothesis) -> HistHypothesis:
    """Scale all values so the hypothesis integrates to 1."""
    total = h.total_mass()
    if total <= 0:
        raise DegenerateRegionError("cannot renormalize a zero-mass hypothesis")
    scale = 1.0 / total
    pieces = tuple(Piece(p.rect, p.value * scale) for p in h.pieces)
    return HistHypothesis(
        domain=h.domain,
        pieces=pieces,
        kind=h.kind,
        grid=h.grid,
        dyadic=h.dyadic,
        tree=h.tree,
    )


__all__ = [
    "SplitParams",
    "SplitTrace",
    "IterationRecord",
    "default_gamma",
    "piece_bound",
    "greedy_split",
    "greedy_split_l2",
    "build_adaptive_grid",
    "adaptive_greedy_split",
    "renormalize",
]
