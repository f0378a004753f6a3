"""Unit tests for exact evaluation and conservative sup estimation."""

import cmath
import math

import pytest

from orderiso.numkernel import (
    DEFAULT_SAFETY,
    Disk,
    GaussTerm,
    Grid,
    Interval,
    NonFiniteSample,
    RealPoly,
    SupBound,
    WindowTooSmall,
    growth_cap,
    log_sup_gauss_on_disk,
    poly_eval,
    poly_symmetrize,
    sup_on_disk,
    sup_on_real,
    term_eval,
)


class TestRealPoly:
    def test_horner_matches_direct(self):
        p = RealPoly((1.0, -2.0, 0.5, 3.0))
        for z in (0.0, 1.5, -2.0, 1 + 2j):
            direct = 1.0 - 2.0 * z + 0.5 * z**2 + 3.0 * z**3
            assert poly_eval(p, z) == pytest.approx(direct, rel=1e-15)

    def test_eval_with_deriv(self):
        p = RealPoly((2.0, 0.0, 1.0))  # 2 + z^2
        v, d = p.eval_with_deriv(3.0)
        assert v == 11.0
        assert d == 6.0

    def test_scaled_basis(self):
        # same polynomial expressed in (z/2)^k coefficients
        p = RealPoly((0.0, 2.0), scale=2.0)  # 2*(z/2) = z
        assert p(5.0) == 5.0
        v, d = p.eval_with_deriv(5.0)
        assert d == 1.0

    def test_deriv_antideriv_roundtrip(self):
        p = RealPoly((1.0, 2.0, 3.0), scale=1.5)
        q = p.deriv().antideriv(constant=1.0)
        for x in (-1.0, 0.3, 2.0):
            assert q(x) == pytest.approx(p(x), rel=1e-14)

    def test_rescale_preserves_values(self):
        p = RealPoly((1.0, -1.0, 0.25), scale=1.0)
        q = p.rescale(4.0)
        for z in (0.5, -3.0, 2j):
            assert q(z) == pytest.approx(p(z), rel=1e-14)

    def test_add_mixed_scales(self):
        p = RealPoly((0.0, 1.0), scale=1.0)
        q = RealPoly((1.0, 0.0, 2.0), scale=2.0)  # 1 + 2 (z/2)^2
        s = p + q
        for x in (0.0, 1.0, -2.5):
            assert s(x) == pytest.approx(p(x) + q(x), rel=1e-14)

    def test_trailing_zeros_trimmed(self):
        p = RealPoly((1.0, 2.0, 0.0, 0.0))
        assert p.degree == 1

    def test_conjugate_symmetry_exact(self):
        p = RealPoly((0.3, -1.7, 0.0, 2.25), scale=3.0)
        for z in (1 + 1j, -2 + 0.5j, 0.1 - 3j):
            assert poly_eval(p, z.conjugate()) == poly_eval(p, z).conjugate()

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            RealPoly((1.0, math.inf))
        with pytest.raises(ValueError):
            RealPoly((1.0,), scale=0.0)

    def test_symmetrize_takes_real_parts(self):
        p = poly_symmetrize((1 + 1j, 2 - 3j, 0.5))
        assert p.coeffs == (1.0, 2.0, 0.5)


class TestGaussTerm:
    def test_value_and_derivative_no_roots(self):
        t = GaussTerm(roots=())
        v, d = term_eval(t, 0.7)
        assert v == pytest.approx(math.exp(-0.49), rel=1e-15)
        assert d == pytest.approx(-2 * 0.7 * math.exp(-0.49), rel=1e-14)

    def test_roots_make_exact_zeros(self):
        t = GaussTerm(roots=(1.0, -2.0, 0.25))
        for r in t.roots:
            v, _ = term_eval(t, r)
            assert v == 0.0

    def test_derivative_matches_finite_difference(self):
        t = GaussTerm(roots=(0.5, -1.0))
        z, h = 0.3, 1e-6
        _, d = term_eval(t, z)
        vp, _ = term_eval(t, z + h)
        vm, _ = term_eval(t, z - h)
        assert d == pytest.approx((vp - vm) / (2 * h), rel=1e-8)

    def test_warped_term_uses_carrier(self):
        t = GaussTerm(roots=(1.0,), warp="phi")
        carrier = RealPoly((0.0, 2.0))  # 2z
        v, d = term_eval(t, 0.5, carrier=carrier)
        # w = 1, image of the root is 2: e^{-1}(1-2)
        assert v == pytest.approx(-math.exp(-1.0), rel=1e-14)
        z, h = 0.5, 1e-6
        vp, _ = term_eval(t, z + h, carrier=carrier)
        vm, _ = term_eval(t, z - h, carrier=carrier)
        assert d == pytest.approx((vp - vm) / (2 * h), rel=1e-7)

    def test_warp_requires_carrier(self):
        t = GaussTerm(roots=(), warp="phi")
        with pytest.raises(ValueError):
            term_eval(t, 1.0)


class TestGeometry:
    def test_disk_boundary_on_circle(self):
        d = Disk(1 + 1j, 2.0)
        pts = d.boundary(64)
        assert len(pts) == 64
        for z in pts:
            assert abs(abs(z - d.center) - 2.0) < 1e-12

    def test_interval_grid_endpoints(self):
        g = Interval(-1.0, 3.0).grid(5)
        assert g[0] == -1.0 and g[-1] == 3.0
        assert len(g) == 5

    def test_interval_validation(self):
        with pytest.raises(ValueError):
            Interval(2.0, 2.0)

    def test_grid_wraps_domains(self):
        assert len(Grid(Interval(0, 1), 8).points) == 8
        assert len(Grid(Disk(0, 1.0), 64).points) == 64


class TestSupBounds:
    def test_disk_sup_of_monomial(self):
        # sup |z^3| on |z| <= 2 is 8
        b = sup_on_disk(lambda z: z**3, Disk(0, 2.0), m=256)
        assert b.value == pytest.approx(8.0 * DEFAULT_SAFETY, rel=1e-3)
        assert b.method == "boundary-sample"

    def test_disk_sup_rejects_nonfinite(self):
        with pytest.raises(NonFiniteSample):
            sup_on_disk(lambda z: math.inf, Disk(0, 1.0), m=64)

    def test_real_sup_gaussian(self):
        # sup of x*exp(-x^2) is (2e)^{-1/2} at x = 1/sqrt2
        b = sup_on_real(lambda x: x * math.exp(-x * x), 5.0, degree=1)
        assert b.value == pytest.approx(DEFAULT_SAFETY / math.sqrt(2 * math.e), rel=1e-3)

    def test_real_sup_window_guard(self):
        with pytest.raises(WindowTooSmall):
            sup_on_real(lambda x: x, 1.0, degree=9, roots=(3.0,))

    def test_growth_cap_dominates_samples(self):
        roots = (0.5, -1.5)
        cap = growth_cap(roots)
        for r in (0.0, 1.0, 3.0, 10.0):
            z = r * cmath.exp(0.7j)
            v = abs((z - roots[0]) * (z - roots[1])) * math.exp(-abs(z))
            assert v <= cap.value

    def test_log_sup_matches_linear_sup(self):
        roots = (1.0, -0.5)
        lg = log_sup_gauss_on_disk(roots, 2.0, m=4096)
        t = GaussTerm(roots=roots)
        direct = sup_on_disk(lambda z: term_eval(t, z)[0], Disk(0, 2.0))
        assert lg == pytest.approx(direct.log_value, abs=1e-3)

    def test_supbound_log_value(self):
        b = SupBound(math.e, "boundary-sample", 1.0)
        assert b.log_value == pytest.approx(1.0)
