"""Histogram algebra: volumes, masses, flattening, exact distances."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadhist.core import (
    Domain,
    EmpiricalDist,
    GridSpec,
    HistHypothesis,
    HistKind,
    Piece,
    Rect,
    flatten,
    l1_dist,
    l2_sq_dist,
    mass,
    volume,
)
from dyadhist.errors import (
    ConfigurationError,
    DegenerateRegionError,
    DomainViolationError,
    UnsupportedDomainError,
)

from conftest import lattice_points, make_rng, random_grid, random_hier_hist


def uniform_hist(domain):
    v = 1.0 / volume(domain.full_rect(), domain)
    return HistHypothesis(domain, (Piece(domain.full_rect(), v),), HistKind.ARBITRARY)


class TestVolume:
    def test_full_discrete_domain(self):
        d = Domain.discrete(4, 1)
        assert volume(d.full_rect(), d) == 4

    def test_unit_cube_product_of_lengths(self):
        d = Domain.unit(2)
        assert volume(Rect((0.25, 0.0), (0.75, 0.5)), d) == pytest.approx(0.25, abs=0)

    def test_lattice_box_counted_directly(self):
        d = Domain.discrete(4, 2)
        r = Rect((2, 1), (4, 5))  # {2..3} x {1..4}
        assert volume(r, d) == lattice_points(r, d) == 8

    def test_rect_outside_domain_rejected(self):
        d = Domain.discrete(4, 1)
        with pytest.raises(DomainViolationError):
            volume(Rect((0,), (3,)), d)
        with pytest.raises(DomainViolationError):
            volume(Rect((1,), (7,)), d)


class TestFlatten:
    def test_constant_is_its_own_flattening(self):
        d = Domain.unit(1)
        h = HistHypothesis(d, (Piece(d.full_rect(), 2.5),), HistKind.PARTIAL)
        assert flatten(h, Rect((0.0,), (0.4,))) == pytest.approx(2.5)

    def test_single_sample_over_four_lattice_points(self):
        d = Domain.discrete(4, 1)
        emp = EmpiricalDist(d, np.array([[2]]), np.array([1]))
        assert flatten(emp, d.full_rect()) == pytest.approx(0.25, abs=0)

    def test_empty_region_flattens_to_zero(self):
        d = Domain.discrete(4, 1)
        emp = EmpiricalDist(d, np.array([[1]]), np.array([1]))
        assert flatten(emp, Rect((3,), (5,))) == 0.0

    def test_zero_volume_rect_rejected(self):
        d = Domain.unit(1)
        emp = EmpiricalDist(d, np.array([[0.5]]), np.array([1]))
        with pytest.raises(DegenerateRegionError):
            flatten(emp, Rect((0.3,), (0.3,)))

    def test_flatten_minimizes_l2_among_constants(self, rng):
        # golden-section scan over the constant, independent of flatten()
        d = Domain.discrete(8, 1)
        grid = GridSpec.uniform(d, 8)
        for trial in range(20):
            emp = EmpiricalDist.from_samples(d, rng.integers(1, 9, size=(12, 1)))
            rect = d.full_rect()
            masses = np.zeros(8)
            for p, c in zip(emp.points, emp.counts):
                masses[p[0] - 1] += c / emp.n

            def err(a):
                return float(np.sum((masses - a) ** 2))

            lo, hi = 0.0, 1.0
            invphi = (np.sqrt(5) - 1) / 2
            for _ in range(200):
                x1 = hi - invphi * (hi - lo)
                x2 = lo + invphi * (hi - lo)
                if err(x1) <= err(x2):
                    hi = x2
                else:
                    lo = x1
            assert flatten(emp, rect) == pytest.approx((lo + hi) / 2, abs=1e-7)


class TestEval:
    def test_single_piece(self):
        d = Domain.unit(2)
        h = HistHypothesis(d, (Piece(d.full_rect(), 3.0),), HistKind.ARBITRARY)
        assert h.value_at([0.2, 0.9]) == 3.0

    def test_partial_uncovered_is_zero(self):
        d = Domain.unit(1)
        h = HistHypothesis(d, (Piece(Rect((0.0,), (0.5,)), 2.0),), HistKind.PARTIAL)
        assert h.value_at([0.75]) == 0.0

    def test_two_piece_split_left_value(self):
        d = Domain.unit(1)
        h = HistHypothesis(
            d,
            (Piece(Rect((0.0,), (0.5,)), 1.5), Piece(Rect((0.5,), (1.0,)), 0.5)),
            HistKind.ARBITRARY,
        )
        assert h.value_at([0.25]) == 1.5
        assert h.value_at([0.5]) == 0.5
        assert h.value_at([1.0]) == 0.5  # top face belongs to the last piece

    def test_outside_domain_rejected(self):
        d = Domain.unit(1)
        h = uniform_hist(d)
        with pytest.raises(DomainViolationError):
            h.value_at([1.5])


class TestMass:
    def test_full_domain_is_one(self):
        d = Domain.discrete(4, 1)
        emp = EmpiricalDist.from_samples(d, np.array([[1], [1], [2], [4]]))
        assert mass(emp, d.full_rect()) == 1.0

    def test_empirical_partial_rect(self):
        d = Domain.discrete(4, 1)
        emp = EmpiricalDist.from_samples(d, np.array([[1], [1], [2], [4]]))
        assert mass(emp, Rect((1,), (3,))) == pytest.approx(0.75, abs=0)

    def test_histogram_value_times_volume(self):
        d = Domain.unit(1)
        h = HistHypothesis(d, (Piece(Rect((0.0,), (0.5,)), 2.0),), HistKind.PARTIAL)
        assert mass(h, Rect((0.0,), (0.25,))) == pytest.approx(0.5, abs=0)


class TestL1:
    def test_identity(self):
        d = Domain.unit(2)
        h = uniform_hist(d)
        assert l1_dist(h, h) == 0.0

    def test_two_vs_uniform_on_halves(self):
        d = Domain.unit(1)
        h1 = uniform_hist(d)
        h2 = HistHypothesis(
            d,
            (Piece(Rect((0.0,), (0.5,)), 2.0), Piece(Rect((0.5,), (1.0,)), 0.0)),
            HistKind.ARBITRARY,
        )
        assert l1_dist(h1, h2) == pytest.approx(1.0, abs=1e-15)

    def test_disjoint_thin_pieces_approach_two(self):
        d = Domain.unit(1)
        w = 1e-6
        h1 = HistHypothesis(d, (Piece(Rect((0.0,), (w,)), 1.0 / w),), HistKind.PARTIAL)
        h2 = HistHypothesis(d, (Piece(Rect((1.0 - w,), (1.0,)), 1.0 / w),), HistKind.PARTIAL)
        assert l1_dist(h1, h2) == pytest.approx(2.0, abs=1e-9)

    def test_mismatched_domains_rejected(self):
        with pytest.raises(ConfigurationError):
            l1_dist(uniform_hist(Domain.unit(1)), uniform_hist(Domain.unit(2)))

    @given(st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_symmetry_and_triangle(self, seed):
        rng = make_rng(seed)
        grid = GridSpec.uniform(Domain.unit(rng.integers(1, 3)), 4)
        hs = [random_hier_hist(rng, grid, 7, normalize=False) for _ in range(3)]
        a, b, c = hs
        assert l1_dist(a, b) == pytest.approx(l1_dist(b, a), abs=1e-12)
        assert l1_dist(a, c) <= l1_dist(a, b) + l1_dist(b, c) + 1e-9


class TestL2:
    def test_identity(self):
        d = Domain.discrete(2, 1)
        emp = EmpiricalDist.from_samples(d, np.array([[1], [2]]))
        assert l2_sq_dist(emp, emp) == 0.0

    def test_point_masses_vs_flat(self):
        d = Domain.discrete(2, 1)
        h1 = HistHypothesis(
            d,
            (Piece(Rect((1,), (2,)), 0.75), Piece(Rect((2,), (3,)), 0.25)),
            HistKind.ARBITRARY,
        )
        flat = HistHypothesis(d, (Piece(d.full_rect(), 0.5),), HistKind.ARBITRARY)
        assert l2_sq_dist(h1, flat) == pytest.approx(0.125, abs=0)

    def test_empirical_point_vs_flat(self):
        d = Domain.discrete(2, 1)
        emp = EmpiricalDist(d, np.array([[1]]), np.array([1]))
        flat = HistHypothesis(d, (Piece(d.full_rect(), 0.5),), HistKind.ARBITRARY)
        assert l2_sq_dist(emp, flat) == pytest.approx(0.5, abs=0)

    def test_empirical_vs_empirical(self):
        d = Domain.discrete(4, 1)
        e1 = EmpiricalDist.from_samples(d, np.array([[1], [1], [2], [4]]))
        e2 = EmpiricalDist.from_samples(d, np.array([[1], [2], [3], [4]]))
        # pointwise: (0.5-0.25)^2 + 0 + 0.25^2 + 0
        assert l2_sq_dist(e1, e2) == pytest.approx(0.125, abs=1e-15)

    def test_unit_domain_rejected(self):
        d = Domain.unit(1)
        with pytest.raises(UnsupportedDomainError):
            l2_sq_dist(uniform_hist(d), uniform_hist(d))


class TestEmpiricalDist:
    def test_duplicates_aggregate(self):
        d = Domain.discrete(4, 2)
        emp = EmpiricalDist.from_samples(d, np.array([[1, 2], [1, 2], [3, 4]]))
        assert emp.n == 3
        assert emp.support_size == 2

    def test_point_outside_domain_rejected(self):
        d = Domain.unit(1)
        with pytest.raises(DomainViolationError):
            EmpiricalDist.from_samples(d, np.array([[1.5]]))

    def test_total_mass_is_exactly_one(self, rng):
        d = Domain.discrete(16, 2)
        emp = EmpiricalDist.from_samples(d, rng.integers(1, 17, size=(100, 2)))
        assert mass(emp, d.full_rect()) == 1.0


class TestGridSpec:
    def test_cell_index_half_open_with_duplicates(self):
        d = Domain.discrete(16, 1)
        grid = GridSpec(d, (np.array([1.0, 3, 9, 9, 17]),))
        idx = grid.cell_index(np.array([[1], [2], [3], [8], [9], [16]]))
        assert idx[:, 0].tolist() == [0, 0, 1, 1, 3, 3]

    def test_unit_top_face_clamps_into_last_cell(self):
        d = Domain.unit(1)
        grid = GridSpec.uniform(d, 4)
        idx = grid.cell_index(np.array([[1.0]]))
        assert idx[0, 0] == 3

    def test_rejects_non_power_of_two(self):
        d = Domain.unit(1)
        with pytest.raises(Exception):
            GridSpec(d, (np.array([0.0, 0.5, 0.75, 1.0]),))
