"""Max dyadic-rectangle discrepancy against a constant, and the best constant fit.

The workhorse is a sparse tree over exactly the dyadic rectangles (below a
query rectangle R) that contain support points.  The discrepancy
``max over dyadic R' <= R of |mass(R') - a * vol(R')|`` splits into

* a scan over tree nodes (rectangles holding mass), and
* ``a * V`` where V is the largest volume of a dyadic rectangle below R that
  holds no mass; every such rectangle is R itself (empty tree) or a missing
  child of some tree node, so V is found during construction.

All node masses are integer counts divided by n exactly once, so results are
bit-identical to a dense enumeration that aggregates the same integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

from .core import DyadicRect, EmpiricalDist, GridSpec
from .errors import OracleGuardError, StructureError


def check_dyadic(grid: GridSpec, rect: DyadicRect) -> None:
    if rect.dim != grid.dim:
        raise StructureError(f"rect dim {rect.dim} != grid dim {grid.dim}")
    if not (0 <= rect.level <= grid.levels):
        raise StructureError(f"level {rect.level} outside [0, {grid.levels}]")
    side = grid.M >> rect.level
    if any(not (0 <= j < side) for j in rect.index):
        raise StructureError(f"index {rect.index} outside grid at level {rect.level}")


def _group_rows(rows: np.ndarray, weights: np.ndarray):
    """Group identical int rows, summing weights; rows returned in lex order."""
    n, d = rows.shape
    if n == 0:
        return rows.copy(), np.zeros(0)
    bases = rows.max(axis=0).astype(np.int64) + 1
    if int(sum(int(b).bit_length() for b in bases)) <= 62:
        comp = np.zeros(n, dtype=np.int64)
        for a in range(d):
            comp = comp * bases[a] + rows[:, a]
        uniq, inv = np.unique(comp, return_inverse=True)
        w = np.bincount(inv.ravel(), weights=weights)
        out = np.empty((len(uniq), d), dtype=np.int64)
        rem = uniq.copy()
        for a in range(d - 1, -1, -1):
            out[:, a] = rem % bases[a]
            rem //= bases[a]
        return out, w
    uniq, inv = np.unique(rows, axis=0, return_inverse=True)
    return uniq, np.bincount(inv.ravel(), weights=weights)


def _composite(rows: np.ndarray, base: int) -> np.ndarray:
    """Lex-order-preserving key per row; structured view when int64 would overflow."""
    d = rows.shape[1]
    if d * int(base - 1).bit_length() <= 62:
        comp = np.zeros(len(rows), dtype=np.int64)
        for a in range(d):
            comp = comp * base + rows[:, a]
        return comp
    flat = np.ascontiguousarray(rows, dtype=np.int64)
    return flat.view([("", np.int64)] * d).ravel()


@dataclass(eq=False)
class SparseDyadicTree:
    """Sparse dyadic tree restricted below ``rect``; see module docstring.

    Node arrays are sorted by (level ascending, index lexicographic), which
    makes "first argmax" the canonical lexicographically-least witness.
    """

    grid: GridSpec
    rect: DyadicRect
    node_level: np.ndarray
    node_index: np.ndarray
    node_mass: np.ndarray
    node_vol: np.ndarray
    max_empty_vol: float
    empty_witness: DyadicRect | None
    node_visits: int

    @property
    def node_count(self) -> int:
        return len(self.node_mass)

    @property
    def root_mass(self) -> float:
        if self.node_count == 0:
            return 0.0
        return float(self.node_mass[-1])  # last row is the level-rect.level root

    def node_at(self, i: int) -> DyadicRect:
        return DyadicRect(int(self.node_level[i]), tuple(int(v) for v in self.node_index[i]))


def build_tree(
    fhat: EmpiricalDist,
    grid: GridSpec,
    rect: DyadicRect,
    *,
    cells: np.ndarray | None = None,
    sel: np.ndarray | None = None,
) -> SparseDyadicTree:
    """Build the sparse tree of mass-carrying dyadic rectangles below ``rect``.

    ``cells`` (per-point level-0 cell indices) and ``sel`` (row selector of
    the points inside ``rect``) can be passed by callers that already have
    them; the greedy splitter maintains both across iterations.
    """
    check_dyadic(grid, rect)
    d = grid.dim
    if cells is None:
        cells = grid.cell_index(fhat.points) if fhat.support_size else np.zeros((0, d), np.int64)
    if sel is None:
        if len(cells):
            inside = np.ones(len(cells), dtype=bool)
            for a in range(d):
                inside &= (cells[:, a] >> rect.level) == rect.index[a]
            sel = np.flatnonzero(inside)
        else:
            sel = np.zeros(0, dtype=np.int64)

    visits = 0
    pts = cells[sel]
    wts = fhat.counts[sel].astype(np.float64) if len(sel) else np.zeros(0)
    n = fhat.n if fhat.support_size else 1

    per_level = {}
    for lev in range(rect.level, -1, -1):
        visits += len(pts)
        idx, cnt = _group_rows(pts >> lev, wts)
        per_level[lev] = (idx, cnt)

    best_vol = -1.0
    best_empty: DyadicRect | None = None
    if len(sel) == 0:
        best_vol = grid.volume_of(rect)
        best_empty = rect
    else:
        bits = np.array(
            [[(b >> (d - 1 - a)) & 1 for a in range(d)] for b in range(1 << d)],
            dtype=np.int64,
        )
        for lev in range(rect.level, 0, -1):
            p_idx, _ = per_level[lev]
            c_idx, _ = per_level[lev - 1]
            base = grid.M  # safe upper bound on any index at any level
            pos = np.searchsorted(_composite(p_idx, base), _composite(c_idx >> 1, base))
            nchild = np.bincount(pos, minlength=len(p_idx))
            need = np.flatnonzero(nchild < (1 << d))
            if not len(need):
                continue
            cand = (p_idx[need, None, :] * 2 + bits[None, :, :]).reshape(-1, d)
            visits += len(cand)
            present = np.isin(_composite(cand, base), _composite(c_idx, base))
            missing = cand[~present]
            if not len(missing):
                continue
            vols = grid.dyadic_volume(lev - 1, missing)
            top = float(vols.max())
            # levels are scanned top-down, so on a volume tie the current
            # (lower) level is lexicographically smaller and wins
            if top >= best_vol:
                ties = missing[vols == top]
                order = np.lexsort(ties.T[::-1])
                best_vol = top
                best_empty = DyadicRect(lev - 1, tuple(int(v) for v in ties[order[0]]))

    levels_out, index_out, mass_out, vol_out = [], [], [], []
    for lev in range(0, rect.level + 1):
        idx, cnt = per_level[lev]
        levels_out.append(np.full(len(idx), lev, dtype=np.int64))
        index_out.append(idx)
        mass_out.append(cnt / n)
        vol_out.append(grid.dyadic_volume(lev, idx))
    node_level = np.concatenate(levels_out) if levels_out else np.zeros(0, np.int64)
    node_index = np.concatenate(index_out) if index_out else np.zeros((0, d), np.int64)
    node_mass = np.concatenate(mass_out) if mass_out else np.zeros(0)
    node_vol = np.concatenate(vol_out) if vol_out else np.zeros(0)
    visits += len(node_level)

    return SparseDyadicTree(
        grid=grid,
        rect=rect,
        node_level=node_level,
        node_index=node_index,
        node_mass=node_mass,
        node_vol=node_vol,
        max_empty_vol=best_vol if best_empty is not None else -1.0,
        empty_witness=best_empty,
        node_visits=visits,
    )


def _eval_discrepancy(tree: SparseDyadicTree, a: float):
    """(err, witness, witness_mass, witness_vol) at constant ``a``."""
    b1 = -1.0
    w1 = None
    if tree.node_count:
        disc = np.abs(tree.node_mass - a * tree.node_vol)
        i = int(np.argmax(disc))  # first max = lexicographically least node
        b1 = float(disc[i])
        w1 = (tree.node_at(i), float(tree.node_mass[i]), float(tree.node_vol[i]))
    b2 = -1.0
    if tree.empty_witness is not None:
        b2 = a * tree.max_empty_vol
    if w1 is None and tree.empty_witness is None:
        raise StructureError("tree has neither nodes nor an empty witness")
    if b2 > b1 or w1 is None:
        return b2, tree.empty_witness, 0.0, tree.max_empty_vol
    if b1 > b2 or tree.empty_witness is None:
        return b1, w1[0], w1[1], w1[2]
    if (tree.empty_witness.level, tree.empty_witness.index) < (w1[0].level, w1[0].index):
        return b2, tree.empty_witness, 0.0, tree.max_empty_vol
    return b1, w1[0], w1[1], w1[2]


def compute_d1(
    fhat: EmpiricalDist,
    grid: GridSpec,
    rect: DyadicRect,
    a: float,
    *,
    tree: SparseDyadicTree | None = None,
):
    """Max discrepancy |mass - a*vol| over dyadic sub-rectangles of ``rect``.

    Returns ``(err, witness)`` where the witness attains the maximum; ties
    are broken by least (level, index).  Runs in O(2^d s log M) node work.
    """
    if a < 0:
        raise ValueError(f"constant a must be nonnegative, got {a}")
    if tree is None:
        tree = build_tree(fhat, grid, rect)
    err, witness, _, _ = _eval_discrepancy(tree, a)
    return err, witness


@dataclass(frozen=True)
class DFitResult:
    """Best constant fit on a rectangle: value, achieved discrepancy, witness."""

    a: float
    err: float
    witness: DyadicRect


def fit_d1(
    fhat: EmpiricalDist,
    grid: GridSpec,
    rect: DyadicRect,
    gamma: float,
    *,
    tree: SparseDyadicTree | None = None,
    max_iter: int = 128,
) -> DFitResult:
    """Constant fit minimizing the max dyadic discrepancy, to within ``gamma``.

    The objective ``F(a)`` is convex piecewise-linear, so a binary search on
    ``a`` guided by the sign of the witness discrepancy converges; the search
    stops once the bracket width times vol(rect) drops below gamma (vol(rect)
    bounds every slope).  The flattening of the data is always evaluated as a
    closed-form candidate, so constant data is fitted exactly (err == 0).
    The search runs over a >= 0 only; a never needs to exceed the largest
    node density, beyond which every discrepancy is nondecreasing.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if tree is None:
        tree = build_tree(fhat, grid, rect)

    best: list = [np.inf, 0.0, None]  # err, a, witness

    def probe(a: float):
        err, wit, wm, wv = _eval_discrepancy(tree, a)
        if err < best[0]:
            best[0], best[1], best[2] = err, a, wit
        return err, wm, wv

    vol_r = grid.volume_of(rect)
    if tree.node_count == 0:
        probe(0.0)
        return DFitResult(best[1], best[0], best[2])

    with np.errstate(divide="ignore", invalid="ignore"):
        dens = np.where(tree.node_vol > 0, tree.node_mass / tree.node_vol, 0.0)
    a_max = float(dens.max()) if len(dens) else 0.0
    if vol_r > 0:
        probe(tree.root_mass / vol_r)  # flattening candidate
    probe(0.0)
    if a_max <= 0 or vol_r <= 0:
        return DFitResult(best[1], best[0], best[2])
    probe(a_max)

    lo, hi = 0.0, a_max
    for _ in range(max_iter):
        if (hi - lo) * vol_r <= gamma:
            break
        mid = 0.5 * (lo + hi)
        err, wm, wv = probe(mid)
        resid = wm - mid * wv
        if err == 0.0 or wv == 0.0:
            break  # exact fit, or a constant term dominates: no a does better
        if resid > 0:
            lo = mid
        else:
            hi = mid
    probe(0.5 * (lo + hi))
    return DFitResult(best[1], best[0], best[2])


def brute_d1(
    fhat: EmpiricalDist,
    grid: GridSpec,
    rect: DyadicRect,
    a: float,
    *,
    guard: int = 10**6,
):
    """Oracle twin of compute_d1: exhaustively scan every dyadic sub-rectangle.

    Dense per-level aggregation of integer counts (divided by n once), so the
    result matches compute_d1 bit-for-bit on any instance within the guard.
    """
    check_dyadic(grid, rect)
    d = grid.dim
    depth = rect.level
    total = sum((1 << (depth - lev)) ** d for lev in range(depth + 1))
    if total > guard:
        raise OracleGuardError(f"{total} dyadic rectangles exceeds guard {guard}")

    side0 = 1 << depth
    counts = np.zeros((side0,) * d, dtype=np.int64)
    if fhat.support_size:
        cells = grid.cell_index(fhat.points)
        inside = np.ones(len(cells), dtype=bool)
        for ax in range(d):
            inside &= (cells[:, ax] >> depth) == rect.index[ax]
        rel = cells[inside] - (np.asarray(rect.index, dtype=np.int64) << depth)
        np.add.at(counts, tuple(rel.T), fhat.counts[inside])
    n = fhat.n if fhat.support_size else 1

    best = (-1.0, None)
    level_counts = counts
    for lev in range(0, depth + 1):
        if lev > 0:
            shrink = level_counts
            for ax in range(d):
                s = shrink.shape[ax] // 2
                shrink = shrink.reshape(
                    shrink.shape[:ax] + (s, 2) + shrink.shape[ax + 1 :]
                ).sum(axis=ax + 1)
            level_counts = shrink
        side = 1 << (depth - lev)
        widths = []
        for ax in range(d):
            abs_idx = (rect.index[ax] << (depth - lev)) + np.arange(side, dtype=np.int64)
            b = grid.axes[ax]
            widths.append(b[(abs_idx + 1) << lev] - b[abs_idx << lev])
        vols = reduce(np.multiply.outer, widths) if d > 1 else widths[0]
        disc = np.abs(level_counts / n - a * vols)
        i = int(np.argmax(disc))  # C-order ravel = lexicographic index order
        if disc.flat[i] > best[0]:
            rel_idx = np.unravel_index(i, disc.shape)
            abs_idx = tuple(
                int((rect.index[ax] << (depth - lev)) + rel_idx[ax]) for ax in range(d)
            )
            best = (float(disc.flat[i]), DyadicRect(lev, abs_idx))
    return best[0], best[1]


__all__ = [
    "SparseDyadicTree",
    "DFitResult",
    "build_tree",
    "compute_d1",
    "fit_d1",
    "brute_d1",
    "check_dyadic",
]
