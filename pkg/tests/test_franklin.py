"""Unit tests for the back-and-forth construction engine."""

import math
from fractions import Fraction

import pytest

from orderiso.densesets import Enumeration
from orderiso.franklin import (
    BudgetSchedule,
    ConstructionError,
    IdentityModel,
    run,
    verify,
)


def _pairs_sorted(state):
    return sorted(zip(state.alpha_keys, state.beta_keys))


class TestBudgetSchedule:
    def test_default_epsilons(self):
        b = BudgetSchedule()
        assert b.epsilon(1) == 4.0 ** -2
        assert b.epsilon(3) == 4.0 ** -4

    def test_partial_sums_below_one(self):
        b = BudgetSchedule()
        assert b.partial_sum < 1.0

    def test_ratio_guard(self):
        with pytest.raises(ValueError):
            BudgetSchedule(scale=0.25, ratio=0.5)


class TestIdentityOracle:
    def test_all_lambdas_zero(self):
        st = run(Enumeration.dyadic(), Enumeration.dyadic(), n_steps=40)
        assert st.lambdas[0] == 0.0
        assert all(l == 0.0 for l in st.lambdas)

    def test_f_is_identity(self):
        st = run(Enumeration.dyadic(), Enumeration.dyadic(), n_steps=40)
        for x in (-3.0, 0.1, 2.75):
            v, d = st.f_eval(x)
            assert v == x and d == 1.0

    def test_verify_all_pass(self):
        st = run(Enumeration.dyadic(), Enumeration.dyadic(), n_steps=40)
        rep = verify(st)
        assert rep.overall_pass, [c for c in rep.checks if not c.passed]


class TestShiftOracle:
    def test_translation_recovered(self):
        a = Enumeration.dyadic()
        b = Enumeration.affine("dyadic", 1.0, 1.0)
        st = run(a, b, n_steps=40)
        assert st.lambdas[0] == 1.0
        assert all(l == 0.0 for l in st.lambdas[1:])
        m = 10_000
        worst = max(abs(st.f_eval(-5 + 10 * k / (m - 1))[0] - (-5 + 10 * k / (m - 1) + 1))
                    for k in range(m))
        assert worst <= 1e-12

    def test_order_isomorphism_exact(self):
        a = Enumeration.dyadic()
        b = Enumeration.affine("dyadic", 1.0, 1.0)
        st = run(a, b, n_steps=40)
        pairs = _pairs_sorted(st)
        assert all(p[1] < q[1] for p, q in zip(pairs, pairs[1:]))


class TestGenericRun:
    @pytest.fixture(scope="class")
    def state(self):
        a = Enumeration.signed_calkin_wilf()
        b = Enumeration.affine("dyadic", 1.0, math.sqrt(2))
        return run(a, b, n_steps=40)

    def test_interpolation(self, state):
        worst = max(abs(state.f_eval(al)[0] - be)
                    for al, be in zip(state.alphas, state.betas))
        assert worst <= 1e-9

    def test_exact_order_isomorphism(self, state):
        pairs = _pairs_sorted(state)
        assert all(p[1] < q[1] for p, q in zip(pairs, pairs[1:]))

    def test_exhaustiveness(self, state):
        # after 2n steps the first n of each enumeration are consumed
        a = Enumeration.signed_calkin_wilf()
        b = Enumeration.affine("dyadic", 1.0, math.sqrt(2))
        a_keys = {al for al in state.alpha_keys}
        b_keys = {be for be in state.beta_keys}
        for n in range(1, 21):
            assert a.nth(n).order_key in a_keys
            assert b.nth(n).order_key in b_keys

    def test_derivative_floor(self, state):
        floor = 1.0 - BudgetSchedule().partial_sum
        m, lo, hi = 2048, -5.0, 5.0
        worst = min(state.f_eval(lo + (hi - lo) * k / (m - 1))[1] for k in range(m))
        assert worst >= floor - 1e-9

    def test_budget_margins(self, state):
        for tr in state.trace:
            if tr.lam == 0.0 or tr.kind == "seed":
                continue
            n = tr.step
            assert abs(tr.lam) * tr.sup_disk < BudgetSchedule().epsilon(n)
            assert abs(tr.lam) * tr.sup_growth < 2.0 ** -n

    def test_verify_all_pass(self, state):
        rep = verify(state)
        assert rep.overall_pass, [c.name for c in rep.checks if not c.passed]

    def test_conjugate_symmetry(self, state):
        for z in (1 + 1j, -0.5 + 2j, 2 - 0.3j):
            v, _ = state.f_eval(z)
            w, _ = state.f_eval(z.conjugate())
            assert w == v.conjugate()

    def test_growth_bound(self, state):
        lam1 = abs(state.lambdas[0])
        for k in range(200):
            z = 3.0 * math.cos(k) * complex(math.cos(7 * k), math.sin(7 * k))
            v, _ = state.f_eval(z)
            assert abs(v) <= abs(z) + lam1 + math.exp(abs(z) ** 3) + 1e-9


class TestFailureModes:
    def test_exhausted_explicit_list(self):
        a = Enumeration.explicit([0.0, 1.0, 2.0])
        b = Enumeration.dyadic()
        with pytest.raises(ConstructionError):
            run(a, b, n_steps=10)

    def test_identity_model_default(self):
        m = IdentityModel()
        assert m.base_eval(2.0) == (2.0, 1.0)
        assert m.mod_eval(2.0) == (1.0, 0.0)
