"""Unit tests for the rational enumerations and exact order bookkeeping."""

import math
from fractions import Fraction

import pytest

from orderiso.densesets import (
    DegenerateInterval,
    ElementRef,
    Enumeration,
    ExhaustedEnumeration,
    ScanCapExceeded,
    calkin_wilf,
    calkin_wilf_index,
    dyadic_index,
    dyadic_nth,
)


class TestCalkinWilf:
    def test_first_values(self):
        want = [Fraction(1, 1), Fraction(1, 2), Fraction(2, 1),
                Fraction(1, 3), Fraction(3, 2), Fraction(2, 3), Fraction(3, 1)]
        assert [calkin_wilf(k) for k in range(1, 8)] == want

    def test_enumerates_without_repetition(self):
        seen = {calkin_wilf(k) for k in range(1, 2049)}
        assert len(seen) == 2048

    def test_index_inverts(self):
        for k in (1, 2, 3, 17, 100, 12345):
            assert calkin_wilf_index(calkin_wilf(k)) == k

    def test_index_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            calkin_wilf_index(Fraction(-1, 2))

    def test_deep_fraction_gives_none(self):
        # continued-fraction depth beyond the traversal cap is reported,
        # not silently mis-indexed
        deep = Fraction(10**200 + 1, 10**200)
        assert calkin_wilf_index(deep) is None


class TestDyadic:
    def test_first_values(self):
        got = [dyadic_nth(n) for n in range(1, 6)]
        assert got[0] == 0
        assert set(got) > {Fraction(0), Fraction(1), Fraction(-1)}

    def test_breadth_first_by_level(self):
        # every k/2^j in reduced form appears, lower levels first
        vals = [dyadic_nth(n) for n in range(1, 200)]
        assert Fraction(1, 2) in vals and Fraction(-3, 4) in vals
        assert vals.index(Fraction(1, 2)) < vals.index(Fraction(1, 4))

    def test_index_inverts(self):
        for n in (1, 2, 7, 64, 1000, 99999):
            assert dyadic_index(dyadic_nth(n)) == n

    def test_index_rejects_non_dyadic(self):
        with pytest.raises(ValueError):
            dyadic_index(Fraction(1, 3))

    def test_no_repetition(self):
        vals = [dyadic_nth(n) for n in range(1, 4097)]
        assert len(set(vals)) == 4096


class TestEnumeration:
    def test_density_witness_dyadic(self):
        # a dyadic exists in every small interval probed
        e = Enumeration.dyadic()
        for lo in (-2.3, 0.123, 5.75):
            ref = e.find_in_interval(lo, lo + 0.01)
            assert lo < ref.value < lo + 0.01

    def test_density_witness_calkin_wilf(self):
        e = Enumeration.signed_calkin_wilf()
        ref = e.find_in_interval(0.3001, 0.3011)
        assert 0.3001 < ref.value < 0.3011

    def test_find_excludes_used(self):
        e = Enumeration.dyadic()
        r1 = e.find_in_interval(0.0, 1.0)
        r2 = e.find_in_interval(0.0, 1.0, exclude={r1.order_key})
        assert r2.exact != r1.exact

    def test_degenerate_interval(self):
        with pytest.raises(DegenerateInterval):
            Enumeration.dyadic().find_in_interval(1.0, 1.0)

    def test_scan_cap(self):
        e = Enumeration.explicit([0.0, 10.0])
        with pytest.raises((ScanCapExceeded, ExhaustedEnumeration)):
            e.find_in_interval(1.0, 2.0, cap=10)

    def test_mark_used_twice_rejected(self):
        e = Enumeration.dyadic()
        r = e.nth(1)
        e.mark_used(r)
        with pytest.raises(ValueError):
            e.mark_used(r)

    def test_first_unused_advances(self):
        e = Enumeration.signed_calkin_wilf()
        r1 = e.first_unused()
        e.mark_used(r1)
        r2 = e.first_unused()
        assert r2.index == r1.index + 1

    def test_affine_exact_values(self):
        e = Enumeration.affine("dyadic", 1.0, math.sqrt(2))
        r = e.nth(1)
        # exact form is q*scale + shift at the rational level
        assert r.exact == Fraction(math.sqrt(2))
        assert r.value == float(r.exact)

    def test_affine_order_reversal(self):
        e = Enumeration.affine("dyadic", -2.0, 0.0)
        a, b = e.nth(2), e.nth(3)
        # order keys follow the image ordering, not the base ordering
        assert (a.order_key < b.order_key) == (a.exact < b.exact)

    def test_locate_value_roundtrip(self):
        e = Enumeration.dyadic()
        for n in (1, 5, 40, 777):
            ref = e.nth(n)
            back = e.locate_value(ref.value)
            assert back is not None and back.index == n

    def test_locate_value_affine_roundtrip(self):
        e = Enumeration.affine("signed-calkin-wilf", 0.5, 1.0)
        ref = e.nth(17)
        back = e.locate_value(ref.value)
        assert back is not None and back.exact == ref.exact

    def test_locate_value_every_float_is_dyadic(self):
        # binary64 numbers are dyadic rationals, so membership always holds
        ref = Enumeration.dyadic().locate_value(1 / 3)
        assert ref is not None and float(ref.exact) == 1 / 3

    def test_locate_value_miss_on_explicit(self):
        assert Enumeration.explicit([1.0, 2.0]).locate_value(0.5) is None

    def test_member_from_exact(self):
        e = Enumeration.affine("dyadic", 1.0, 1.0)
        ref = e.member_from_exact(Fraction(7, 4))
        assert ref is not None
        assert ref.exact == Fraction(7, 4)
        assert e.member_from_exact(Fraction(1, 3)) is None

    def test_descriptor_roundtrip(self):
        for e in (Enumeration.dyadic(),
                  Enumeration.signed_calkin_wilf(),
                  Enumeration.affine("dyadic", 1.0, math.sqrt(2)),
                  Enumeration.explicit([1.0, 0.5])):
            d = e.descriptor()
            back = Enumeration.from_descriptor(d)
            assert back.descriptor() == d
            assert back.nth(1).value == e.nth(1).value

    def test_explicit_exhaustion(self):
        e = Enumeration.explicit([3.0])
        e.mark_used(e.first_unused())
        with pytest.raises(ExhaustedEnumeration):
            e.first_unused()


class TestCoverage:
    def test_signed_calkin_wilf_small_rationals_appear(self):
        # every reduced p/q with |p| <= 4, q <= 4 appears among the
        # first few hundred entries of the signed enumeration
        e = Enumeration.signed_calkin_wilf()
        small = {Fraction(p, q) for p in range(-4, 5) for q in range(1, 5)}
        seen = {e.nth(n).exact for n in range(1, 400)}
        assert small <= seen
