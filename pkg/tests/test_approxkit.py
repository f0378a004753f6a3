"""Unit tests for the approximation toolkit."""

import math

import numpy as np
import pytest

from orderiso.approxkit import (ApproxError, CompactSpec, Constraint,
                                ConstraintSet, PatchSchedule, PieceMap,
                                RankDeficient, SpecialChaplet, hoischen_window,
                                ke_approx, mergelyan_fit, re_patch,
                                walsh_correct)
from orderiso.numkernel import Disk, Interval, RealPoly


def circle_samples(fn, radius=1.0, center=0.0, m=64):
    pts = Disk(center, radius).boundary(m)
    return [(z, fn(z)) for z in pts]


class TestMergelyanFit:
    def test_cubic_exact(self):
        p, resid = mergelyan_fit(circle_samples(lambda z: z ** 3), 3)
        assert resid <= 1e-12
        for z in (0.3, 1j, -0.7 + 0.2j):
            assert abs(p(z) - z ** 3) <= 1e-12

    def test_exp_taylor_rate(self):
        import cmath
        p, resid = mergelyan_fit(circle_samples(cmath.exp, m=128), 12)
        # the best degree-12 fit beats the Taylor remainder 1/13!
        assert resid <= 1.0 / math.factorial(13)
        assert resid <= 1e-9

    def test_symmetric_gives_real_coeffs(self):
        p, _ = mergelyan_fit(circle_samples(lambda z: z * z + 1), 4)
        assert all(isinstance(c, float) for c in p.coeffs)

    def test_rank_deficient_raises(self):
        with pytest.raises(RankDeficient):
            mergelyan_fit([(1.0, 1.0), (2.0, 2.0)], 5)


class TestWalshCorrect:
    def test_random_constraint_sets(self):
        rng = np.random.default_rng(1234)
        p0 = RealPoly((0.0, 1.0))
        for _ in range(100):
            k = int(rng.integers(1, 5))
            xs = np.sort(rng.uniform(-2, 2, size=k))
            if len(set(xs.tolist())) < k:
                continue
            cons = []
            for x in xs:
                kind = "value" if rng.random() < 0.7 else "derivative"
                cons.append(Constraint(float(x), kind, float(rng.normal())))
            cset = ConstraintSet(tuple(cons))
            q, sup = walsh_correct(p0, cset, degree=k + 3, scale=2.0)
            for c in cset:
                v, d = q.eval_with_deriv(c.point)
                got = v if c.kind == "value" else d
                assert abs(got - c.target) <= 1e-10
            assert sup < np.inf

    def test_correction_is_small_for_near_satisfied(self):
        p0 = RealPoly((0.0, 1.0))
        cset = ConstraintSet.of((1.0, "value", 1.0 + 1e-12))
        _, sup = walsh_correct(p0, cset, degree=3)
        assert sup <= 1e-10

    def test_no_constraints_identity(self):
        p0 = RealPoly((2.0, 3.0))
        q, sup = walsh_correct(p0, ConstraintSet(()), degree=3)
        assert q is p0 and sup == 0.0


class TestKeApprox:
    def test_reproduces_polynomial(self):
        target = RealPoly((1.0, -0.5, 0.25), scale=2.0)
        q = CompactSpec(k_pieces=(Disk(0.0, 2.0), Interval(2.0, 3.0),
                                  Interval(-3.0, -2.0)), symmetric=True)
        p, rep = ke_approx(target, None, q, ConstraintSet(()), 1e-10)
        assert rep.sup_q_value <= 1e-10
        assert rep.sup_k_deriv <= 1e-10

    def test_pins_exact(self):
        import cmath
        target = (cmath.sin, cmath.cos)
        q = CompactSpec(k_pieces=(Interval(-2.0, 2.0),), symmetric=True)
        pins = ConstraintSet.of((0.5, "value", math.sin(0.5)),
                                (0.5, "derivative", math.cos(0.5)))
        p, rep = ke_approx(target, None, q, pins, 1e-6)
        v, d = p.eval_with_deriv(0.5)
        assert abs(v - math.sin(0.5)) <= 1e-12
        assert abs(d - math.cos(0.5)) <= 1e-12
        assert rep.sup_q_value < 1e-6

    def test_e_pieces_value_only(self):
        one = RealPoly((1.0,))
        q = CompactSpec(k_pieces=(Disk(0.0, 1.0),),
                        e_pieces=(Disk(2.5j, 0.25), Disk(-2.5j, 0.25)),
                        symmetric=True)
        p, rep = ke_approx(one, lambda z: 0.0, q, ConstraintSet(()), 0.25,
                           degrees=(8, 16, 32, 64, 128, 200, 400))
        assert rep.sup_q_value < 0.25

    def test_requires_symmetric_spec(self):
        q = CompactSpec(k_pieces=(Interval(0.0, 1.0),), symmetric=False)
        with pytest.raises(ValueError):
            ke_approx(RealPoly((0.0, 1.0)), None, q, ConstraintSet(()), 1e-6)


class TestHoischenWindow:
    def test_sin_window_with_pins(self):
        import cmath
        window = Interval(-3.0, 3.0)
        p, rep = hoischen_window((cmath.sin, cmath.cos), window,
                                 lambda x: 1e-4, xpins=(0.0,))
        v, d = p.eval_with_deriv(0.0)
        assert v == 0.0 or abs(v) <= 1e-13
        assert abs(d - 1.0) <= 1e-13
        assert rep.sup_q_value < 1e-4
        assert rep.sup_k_deriv < 1e-4

    def test_rejects_nonpositive_eps(self):
        with pytest.raises(ValueError):
            hoischen_window(RealPoly((0.0, 1.0)), Interval(-1, 1),
                            lambda x: 0.0)


class TestPatchSchedule:
    def test_tail_rule_enforced(self):
        with pytest.raises(ValueError):
            PatchSchedule((0.1, 0.06, 0.05))

    def test_design_meets_invariants(self):
        minima = [min(0.5, 1.0 / n) for n in range(1, 7)]
        sched = PatchSchedule.design(minima, count=7)
        eps = sched.epsilons
        assert len(eps) == 7
        for n in range(7):
            assert 2.0 * sum(eps[n + 1:]) < eps[n]
        for e, m in zip(eps, minima):
            assert e < m

    def test_design_respects_tight_late_minimum(self):
        sched = PatchSchedule.design([1.0, 1.0, 1e-3])
        assert sched.epsilons[2] < 1e-3


def default_test_chaplet():
    return SpecialChaplet((2.0, 4.0, 8.0),
                          (Disk(3j, 0.5), Disk(6j, 1.0)))


class TestRePatch:
    def test_zero_case_all_stages_zero(self):
        ch = default_test_chaplet()
        zero = RealPoly((0.0,))
        sched = PatchSchedule.design([0.5, 0.5], count=3)
        res = re_patch(ch, [zero, zero], zero, (), sched)
        inner = np.array(Disk(0.0, 2.0).boundary(128))
        for p in [res.phi] + res.stages:
            assert np.max(np.abs(p(inner))) <= 1e-12
        assert all(r.passed for r in res.reports)

    def test_generic_polynomial_chain(self):
        # data drawn from one global polynomial: every stage reproduces it
        ch = default_test_chaplet()
        g = RealPoly((0.5, 0.25, 0.0, -0.003), scale=4.0)
        sched = PatchSchedule.design([0.5, 0.5], count=3)
        res = re_patch(ch, [g, g], g, (1.0,), sched)
        for r in res.reports:
            assert r.passed
            assert r.sup_q < r.eps_target
        # telescoping: |p_K - p_m| on the inner disk within the tail sums
        for m_idx, tele in enumerate(res.telescoping):
            bound = sum(sched.epsilons[j] for j in range(m_idx + 1, 3))
            assert tele <= bound + 1e-12

    def test_stage_gate_failure_reported(self):
        ch = default_test_chaplet()
        one = RealPoly((1.0,))
        zero = RealPoly((0.0,))
        tight = PatchSchedule((1e-8, 4e-9, 1e-9))
        with pytest.raises(ApproxError):
            re_patch(ch, [one, one], zero, (), tight,
                     stage_caps=(16, 16))

    def test_real_coefficients_exact(self):
        ch = default_test_chaplet()
        g = RealPoly((0.0, 1.0))
        sched = PatchSchedule.design([0.5, 0.5], count=3)
        res = re_patch(ch, [g, g], g, (), sched)
        for p in res.stages:
            assert p.coeffs.dtype == np.float64
