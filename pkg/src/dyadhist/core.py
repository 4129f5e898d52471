"""Domain types and exact histogram algebra.

Conventions used throughout the package:

* Discrete domains are integer cubes ``{1..m}^d``; a rectangle is a product
  of half-open integer intervals ``[lo, hi)`` and its volume is the number
  of lattice points, ``prod(hi - lo)``.  The full domain is ``[1, m+1)^d``.
* The unit cube is ``[0,1]^d`` with Lebesgue volume.  All intervals are
  half-open; only the top face of the domain counts as closed, so a
  coordinate equal to 1.0 belongs to the last cell instead of falling off
  the grid.
* Grid ownership is by boundary rank: cell ``j`` on an axis with boundaries
  ``x_0 <= ... <= x_M`` owns coordinates in ``[x_j, x_{j+1})``.  Duplicate
  boundaries produce zero-width cells (volume 0), which are legal; points at
  a duplicated value always land in the last cell of the run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import reduce

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateRegionError,
    DomainViolationError,
    StructureError,
    UnsupportedDomainError,
)


# ---------------------------------------------------------------------------
# Domains and rectangles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Domain:
    """Either the discrete cube ``{1..m}^d`` (m set) or the unit cube ``[0,1]^d``."""

    dim: int
    m: int | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.m is not None and self.m < 1:
            raise ValueError(f"discrete side m must be >= 1, got {self.m}")

    @staticmethod
    def discrete(m: int, dim: int) -> "Domain":
        return Domain(dim=dim, m=int(m))

    @staticmethod
    def unit(dim: int) -> "Domain":
        return Domain(dim=dim, m=None)

    @property
    def is_discrete(self) -> bool:
        return self.m is not None

    @property
    def lower(self) -> float:
        return 1 if self.is_discrete else 0.0

    @property
    def upper(self) -> float:
        """Exclusive upper bound of the coordinate range (m+1 or 1.0)."""
        return self.m + 1 if self.is_discrete else 1.0

    def full_rect(self) -> "Rect":
        return Rect((self.lower,) * self.dim, (self.upper,) * self.dim)

    def contains_points(self, pts: np.ndarray) -> np.ndarray:
        """Boolean mask of rows of ``pts`` that lie inside the domain."""
        pts = np.atleast_2d(pts)
        if self.is_discrete:
            ok = (pts >= 1) & (pts <= self.m)
        else:
            ok = (pts >= 0.0) & (pts <= 1.0)
        return ok.all(axis=1)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned product of half-open intervals ``[lo_a, hi_a)``."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("lo and hi must have equal length")
        if any(l > h for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"rect has lo > hi: {self}")

    @property
    def dim(self) -> int:
        return len(self.lo)

    def intersect(self, other: "Rect") -> "Rect":
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(max(l, min(a, b)) for l, a, b in zip(lo, self.hi, other.hi))
        return Rect(lo, hi)

    def contains_points(self, pts: np.ndarray, domain: Domain) -> np.ndarray:
        """Half-open membership; the domain's top face counts as closed."""
        pts = np.atleast_2d(pts)
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        ok = (pts >= lo) & (pts < hi)
        if not domain.is_discrete:
            top = np.asarray([h == domain.upper for h in self.hi])
            ok |= top & (pts == hi)
        return ok.all(axis=1)


def volume(rect: Rect, domain: Domain) -> float:
    """Measure of ``rect``: lattice-point count (discrete) or Lebesgue volume."""
    if rect.dim != domain.dim:
        raise DomainViolationError(f"rect dim {rect.dim} != domain dim {domain.dim}")
    if any(l < domain.lower or h > domain.upper for l, h in zip(rect.lo, rect.hi)):
        raise DomainViolationError(f"rect {rect} outside domain bounds")
    v = 1.0
    for l, h in zip(rect.lo, rect.hi):
        v *= max(0.0, float(h) - float(l))
    return v


# ---------------------------------------------------------------------------
# Dyadic rectangles and grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class DyadicRect:
    """Rectangle of a dyadic decomposition, identified by (level, index).

    At level ``l`` the rectangle spans cells ``[index_a * 2^l, (index_a+1) * 2^l)``
    on every axis.  Level ``L = log2(M)`` is the root; level 0 is a single cell.
    The dataclass ordering (level, then index) is the canonical tie-break
    order used everywhere a deterministic witness is needed.
    """

    level: int
    index: tuple

    @property
    def dim(self) -> int:
        return len(self.index)

    def cell_span(self, axis: int) -> tuple:
        return (self.index[axis] << self.level, (self.index[axis] + 1) << self.level)

    def children(self) -> list:
        """The 2^d children at level-1, in lexicographic index order."""
        if self.level == 0:
            raise StructureError("level-0 rectangle has no children")
        d = self.dim
        out = []
        for bits in range(1 << d):
            idx = tuple(2 * self.index[a] + ((bits >> (d - 1 - a)) & 1) for a in range(d))
            out.append(DyadicRect(self.level - 1, idx))
        return out

    def parent(self) -> "DyadicRect":
        return DyadicRect(self.level + 1, tuple(i >> 1 for i in self.index))

    def contains(self, other: "DyadicRect") -> bool:
        if other.level > self.level:
            return False
        shift = self.level - other.level
        return all((o >> shift) == s for o, s in zip(other.index, self.index))

    def disjoint_from(self, other: "DyadicRect") -> bool:
        return not self.contains(other) and not other.contains(self)


@dataclass(frozen=True, eq=False)
class GridSpec:
    """An ``M^d`` cell grid given by per-axis boundary arrays of length M+1.

    M is identical across axes and a power of two; ``levels = log2(M)`` is
    the depth of the induced dyadic decomposition.  Boundaries may repeat
    (zero-width cells); the first/last boundary equal the domain bounds.
    """

    domain: Domain
    axes: tuple

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=np.float64) for a in self.axes)
        object.__setattr__(self, "axes", axes)
        if len(axes) != self.domain.dim:
            raise StructureError("one boundary array per dimension required")
        sizes = {len(a) for a in axes}
        if len(sizes) != 1:
            raise StructureError("all axes must have the same boundary count")
        m_cells = sizes.pop() - 1
        if m_cells < 1 or m_cells & (m_cells - 1):
            raise StructureError(f"cell count per axis must be a power of 2, got {m_cells}")
        for a in axes:
            if np.any(np.diff(a) < 0):
                raise StructureError("axis boundaries must be non-decreasing")
            if a[0] != self.domain.lower or a[-1] != self.domain.upper:
                raise StructureError("axis boundaries must start/end at the domain bounds")

    @staticmethod
    def uniform(domain: Domain, cells: int) -> "GridSpec":
        """Evenly spaced grid with ``cells`` cells per axis (power of 2)."""
        if domain.is_discrete:
            if cells != domain.m:
                raise StructureError("uniform discrete grid must have m cells per axis")
            ax = np.arange(1, domain.m + 2, dtype=np.float64)
        else:
            ax = np.linspace(0.0, 1.0, cells + 1)
        return GridSpec(domain, tuple(ax.copy() for _ in range(domain.dim)))

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def M(self) -> int:
        return len(self.axes[0]) - 1

    @property
    def levels(self) -> int:
        return self.M.bit_length() - 1

    def root(self) -> DyadicRect:
        return DyadicRect(self.levels, (0,) * self.dim)

    def same_as(self, other: "GridSpec") -> bool:
        return (
            self.domain == other.domain
            and len(self.axes) == len(other.axes)
            and all(np.array_equal(a, b) for a, b in zip(self.axes, other.axes))
        )

    def cell_index(self, pts: np.ndarray) -> np.ndarray:
        """Rank-space cell index of each point, per axis (shape (n, d))."""
        pts = np.atleast_2d(pts)
        out = np.empty(pts.shape, dtype=np.int64)
        for a in range(self.dim):
            j = np.searchsorted(self.axes[a], pts[:, a], side="right") - 1
            out[:, a] = np.clip(j, 0, self.M - 1)
        return out

    def rect_of(self, dr: DyadicRect) -> Rect:
        lo, hi = [], []
        for a in range(self.dim):
            s, e = dr.cell_span(a)
            lo.append(self.coord(a, s))
            hi.append(self.coord(a, e))
        return Rect(tuple(lo), tuple(hi))

    def coord(self, axis: int, rank: int):
        v = self.axes[axis][rank]
        return int(v) if self.domain.is_discrete else float(v)

    def dyadic_volume(self, level: int, index: np.ndarray) -> np.ndarray:
        """Volumes of the dyadic rectangles with the given level-``level`` indices.

        ``index`` has shape (n, d); the result has shape (n,).
        """
        index = np.atleast_2d(np.asarray(index, dtype=np.int64))
        v = np.ones(len(index))
        for a in range(self.dim):
            b = self.axes[a]
            v *= b[(index[:, a] + 1) << level] - b[index[:, a] << level]
        return v

    def volume_of(self, dr: DyadicRect) -> float:
        return float(self.dyadic_volume(dr.level, np.asarray([dr.index]))[0])

    def dyadic_rect_count(self) -> int:
        return sum((self.M >> l) ** self.dim for l in range(self.levels + 1))

    def padded_cell_count(self) -> int:
        """Number of zero-width cells summed over the axes."""
        return int(sum(np.count_nonzero(np.diff(a) == 0) for a in self.axes))


# ---------------------------------------------------------------------------
# Empirical distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EmpiricalDist:
    """Weighted multiset of sample points with total mass 1.

    ``points`` holds the distinct coordinates (shape (p, d)), ``counts`` the
    multiplicities; ``n = counts.sum()`` and each point carries mass count/n.
    """

    domain: Domain
    points: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points))
        if self.domain.is_discrete:
            pts = pts.astype(np.int64)
        else:
            pts = pts.astype(np.float64)
        cnt = np.asarray(self.counts, dtype=np.int64)
        if pts.shape[0] != cnt.shape[0]:
            raise ValueError("points and counts must have equal length")
        if pts.shape[0] and pts.shape[1] != self.domain.dim:
            raise DomainViolationError(
                f"points have dim {pts.shape[1]}, domain has dim {self.domain.dim}"
            )
        if np.any(cnt <= 0):
            raise ValueError("counts must be positive")
        if pts.shape[0] and not self.domain.contains_points(pts).all():
            raise DomainViolationError("sample point outside domain")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "counts", cnt)

    @staticmethod
    def from_samples(domain: Domain, samples: np.ndarray) -> "EmpiricalDist":
        """Aggregate raw samples (one row per draw) into a weighted multiset."""
        samples = np.atleast_2d(np.asarray(samples))
        if samples.size == 0:
            raise ValueError("empty sample set")
        uniq, cnt = np.unique(samples, axis=0, return_counts=True)
        return EmpiricalDist(domain, uniq, cnt)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def support_size(self) -> int:
        return len(self.points)

    def mass_in(self, rect: Rect) -> float:
        if self.support_size == 0:
            return 0.0
        mask = rect.contains_points(self.points, self.domain)
        return float(self.counts[mask].sum()) / self.n


# ---------------------------------------------------------------------------
# Histogram hypotheses
# ---------------------------------------------------------------------------

class HistKind(Enum):
    ARBITRARY = "arbitrary"
    HIERARCHICAL = "hierarchical"
    PARTIAL = "partial"


@dataclass(frozen=True)
class Piece:
    rect: Rect
    value: float

    def __post_init__(self):
        if self.value < 0:
            raise ValueError(f"piece value must be nonnegative, got {self.value}")


@dataclass(frozen=True, eq=False)
class HistHypothesis:
    """Piecewise-constant density given by disjoint rectangles with values.

    ARBITRARY and HIERARCHICAL pieces cover the full domain; PARTIAL leaves
    the uncovered region at value 0.  Hierarchical hypotheses carry the grid,
    the dyadic identity of every piece and the split tree (a dict mapping
    DyadicRect -> piece index for leaves, -1 for internal nodes).
    """

    domain: Domain
    pieces: tuple
    kind: HistKind
    grid: GridSpec | None = None
    dyadic: tuple | None = None
    tree: dict | None = None

    def __post_init__(self):
        if self.kind is HistKind.HIERARCHICAL:
            if self.grid is None or self.dyadic is None:
                raise StructureError("hierarchical hypothesis needs grid and dyadic ids")
        if self.dyadic is not None and len(self.dyadic) != len(self.pieces):
            raise StructureError("dyadic ids must align with pieces")

    @property
    def piece_count(self) -> int:
        return len(self.pieces)

    def total_mass(self) -> float:
        return float(sum(p.value * volume(p.rect, self.domain) for p in self.pieces))

    def value_at(self, x) -> float:
        """Density at a single point; 0 on the uncovered part of a partial."""
        x = np.asarray(x, dtype=np.float64).reshape(1, -1)
        if x.shape[1] != self.domain.dim:
            raise DomainViolationError("point dimension mismatch")
        if not self.domain.contains_points(x).all():
            raise DomainViolationError(f"point {x.ravel()} outside domain")
        for p in self.pieces:
            if p.rect.contains_points(x, self.domain)[0]:
                return p.value
        if self.kind is HistKind.PARTIAL:
            return 0.0
        raise StructureError("point not covered by any piece of a total histogram")

    def mass_in(self, rect: Rect) -> float:
        total = 0.0
        for p in self.pieces:
            total += p.value * volume(p.rect.intersect(rect), self.domain)
        return total


def mass(g, rect: Rect) -> float:
    """Mass of an EmpiricalDist or HistHypothesis on ``rect``."""
    if any(l < g.domain.lower or h > g.domain.upper for l, h in zip(rect.lo, rect.hi)):
        raise DomainViolationError(f"rect {rect} outside domain")
    return g.mass_in(rect)


def flatten(g, rect: Rect, domain: Domain | None = None) -> float:
    """Average density of ``g`` on ``rect`` (mass / volume)."""
    domain = domain or g.domain
    v = volume(rect, domain)
    if v <= 0:
        raise DegenerateRegionError(f"flattening over zero-volume rect {rect}")
    return mass(g, rect) / v


# ---------------------------------------------------------------------------
# Exact distances via coordinate-compressed overlays
# ---------------------------------------------------------------------------

def _overlay_axes(domain: Domain, *hists) -> list:
    """Per-axis sorted unique boundary coordinates of all pieces + domain bounds."""
    out = []
    for a in range(domain.dim):
        vals = [domain.lower, domain.upper]
        for h in hists:
            for p in h.pieces:
                vals.append(p.rect.lo[a])
                vals.append(p.rect.hi[a])
        out.append(np.unique(np.asarray(vals, dtype=np.float64)))
    return out


def _rasterize(h: HistHypothesis, axes: list) -> np.ndarray:
    """Value of ``h`` on each overlay cell (uncovered cells stay 0)."""
    shape = tuple(len(a) - 1 for a in axes)
    grid = np.zeros(shape)
    for p in h.pieces:
        sl = []
        for a in range(h.domain.dim):
            i0 = int(np.searchsorted(axes[a], p.rect.lo[a]))
            i1 = int(np.searchsorted(axes[a], p.rect.hi[a]))
            sl.append(slice(i0, i1))
        grid[tuple(sl)] = p.value
    return grid


def _cell_volumes(axes: list) -> np.ndarray:
    widths = [np.diff(a) for a in axes]
    return reduce(np.multiply.outer, widths)


def l1_dist(h1: HistHypothesis, h2: HistHypothesis) -> float:
    """Exact L1 distance between two piecewise-constant hypotheses."""
    if h1.domain != h2.domain:
        raise ConfigurationError("l1_dist requires hypotheses on the same domain")
    axes = _overlay_axes(h1.domain, h1, h2)
    v1 = _rasterize(h1, axes)
    v2 = _rasterize(h2, axes)
    return float(np.sum(np.abs(v1 - v2) * _cell_volumes(axes)))


def _hist_value_at_points(h: HistHypothesis, pts: np.ndarray) -> np.ndarray:
    vals = np.zeros(len(pts))
    seen = np.zeros(len(pts), dtype=bool)
    for p in h.pieces:
        mask = p.rect.contains_points(pts, h.domain) & ~seen
        vals[mask] = p.value
        seen |= mask
    return vals


def l2_sq_dist(g1, g2) -> float:
    """Sum over lattice points of (g1(x) - g2(x))^2, discrete domains only.

    Works on any mix of EmpiricalDist and HistHypothesis without enumerating
    the domain: support points are handled explicitly and the empty remainder
    of each overlay cell contributes in closed form.
    """
    if g1.domain != g2.domain:
        raise ConfigurationError("l2_sq_dist requires the same domain")
    if not g1.domain.is_discrete:
        raise UnsupportedDomainError("l2 distance is defined on the discrete cube only")

    def emp(g):
        return isinstance(g, EmpiricalDist)

    if emp(g1) and emp(g2):
        pts = np.unique(np.vstack([g1.points, g2.points]), axis=0)
        v1 = _emp_value_at_points(g1, pts)
        v2 = _emp_value_at_points(g2, pts)
        return float(np.sum((v1 - v2) ** 2))
    if emp(g1) != emp(g2):
        e, h = (g1, g2) if emp(g1) else (g2, g1)
        gx = e.counts / e.n
        hx = _hist_value_at_points(h, e.points)
        # sum_x h(x)^2 over the whole lattice, then swap in the support terms
        total_h_sq = sum(p.value**2 * volume(p.rect, h.domain) for p in h.pieces)
        return float(np.sum((gx - hx) ** 2) - np.sum(hx**2) + total_h_sq)
    axes = _overlay_axes(g1.domain, g1, g2)
    v1 = _rasterize(g1, axes)
    v2 = _rasterize(g2, axes)
    return float(np.sum((v1 - v2) ** 2 * _cell_volumes(axes)))


def _emp_value_at_points(e: EmpiricalDist, pts: np.ndarray) -> np.ndarray:
    vals = np.zeros(len(pts))
    if e.support_size == 0:
        return vals
    # match rows of pts against the support
    keep = {tuple(row): c / e.n for row, c in zip(e.points, e.counts)}
    for i, row in enumerate(pts):
        vals[i] = keep.get(tuple(row), 0.0)
    return vals


def log2_int(m: int) -> int:
    """log2 of a power of two, validated."""
    l = int(m).bit_length() - 1
    if m <= 0 or (1 << l) != m:
        raise StructureError(f"{m} is not a power of 2")
    return l


def next_pow2(x: int) -> int:
    """Least power of 2 >= x (x >= 1)."""
    return 1 << max(0, int(x - 1).bit_length())


def eval_hist(h: HistHypothesis, x) -> float:
    """Point evaluation of a hypothesis (alias for HistHypothesis.value_at)."""
    return h.value_at(x)


__all__ = [
    "Domain",
    "Rect",
    "DyadicRect",
    "GridSpec",
    "EmpiricalDist",
    "HistKind",
    "Piece",
    "HistHypothesis",
    "volume",
    "mass",
    "flatten",
    "l1_dist",
    "l2_sq_dist",
    "eval_hist",
    "log2_int",
    "next_pow2",
]
