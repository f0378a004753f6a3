"""Back-and-forth construction of order isomorphisms between countable
dense real sets, realised as finite partial sums

    f_N(z) = base(z) + modulator(z) * sum_j lambda_j h_j(z),

with h_1 = 1 and h_j(z) = exp(-w(z)^2) prod_{k<j} (w(z) - w(alpha_k)).
The plain engine uses base(z) = z, modulator = 1 and w(z) = z; the
universal variant swaps in a carrier polynomial and a damper (see the
birkhoff module).

Every committed step records the smallness caps it honoured; the
verifier replays all testable invariants against a committed state.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional

from .densesets import (DegenerateInterval, ElementRef, Enumeration,
                        ScanCapExceeded)
from .numkernel import (
    DEFAULT_SAFETY,
    SupBound,
    growth_cap,
    log_sup_gauss_on_disk,
    sup_on_real,
)

MAX_BRACKET_DOUBLINGS = 60
MAX_INTERVAL_HALVINGS = 200
INTERPOLATION_TOL = 1e-9


class ConstructionError(RuntimeError):
    """The construction could not proceed (cap exceeded, invariant breach)."""


class BudgetError(ValueError):
    pass


@dataclass(frozen=True)
class BudgetSchedule:
    """Geometric smallness budgets eps_n = scale * ratio^n.

    The default (scale=1/4, ratio=1/4) gives eps_n = 4^-(n+1), so the
    total is 1/12 < 1 and the tail rule sum_{k>n} 2 eps_k < eps_n holds
    at every n (tail factor 2*ratio/(1-ratio) = 2/3 < 1).
    """

    scale: float = 0.25
    ratio: float = 0.25

    def __post_init__(self):
        if not (0 < self.ratio < 1) or not (self.scale > 0):
            raise BudgetError("need scale > 0 and ratio in (0,1)")
        if self.partial_sum >= 1:
            raise BudgetError("budget sum must stay below 1")
        if 2 * self.ratio / (1 - self.ratio) >= 1:
            raise BudgetError("tail rule needs ratio < 1/3")

    def epsilon(self, n: int) -> float:
        return self.scale * self.ratio ** n

    @property
    def partial_sum(self) -> float:
        return self.scale * self.ratio / (1 - self.ratio)


class IdentityModel:
    """base(z) = z, modulator = 1, unwarped terms (the Theorem 1 shape)."""

    warped = False

    def base_eval(self, z):
        return z, 1.0

    def mod_eval(self, z):
        return 1.0, 0.0

    def warp_eval(self, z):
        return z, 1.0

    def warp_real_bound(self) -> float:
        return math.inf  # unused for the identity warp


@dataclass
class StepTrace:
    step: int
    kind: str  # "seed" | "even" | "odd"
    alpha: float
    beta: float
    lam: float
    eta: Optional[float]
    sup_disk: Optional[float]
    sup_real: Optional[float]
    sup_growth: Optional[float]
    residual: float
    exact_hit: bool

    def as_record(self) -> dict:
        return {
            "step": self.step,
            "kind": self.kind,
            "alpha": self.alpha,
            "beta": self.beta,
            "lambda": self.lam,
            "eta": self.eta,
            "sup_disk": self.sup_disk,
            "sup_real": self.sup_real,
            "sup_growth": self.sup_growth,
            "residual": self.residual,
            "exact_hit": self.exact_hit,
        }


@dataclass
class CheckResult:
    name: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass
class VerificationReport:
    checks: list

    @property
    def overall_pass(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "overall_pass": self.overall_pass,
            "checks": [
                {"name": c.name, "passed": c.passed,
                 "margin": c.margin, "detail": c.detail}
                for c in self.checks
            ],
        }


@dataclass
class ConstructionState:
    enum_a: Enumeration
    enum_b: Enumeration
    budgets: BudgetSchedule
    model: object = field(default_factory=IdentityModel)
    alphas: list = field(default_factory=list)
    betas: list = field(default_factory=list)
    lambdas: list = field(default_factory=list)
    alpha_keys: list = field(default_factory=list)
    beta_keys: list = field(default_factory=list)
    alpha_exacts: list = field(default_factory=list)
    beta_exacts: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    pending_beta: Optional[ElementRef] = None
    prefer_exact: bool = True
    scan_cap: int = 200_000
    safety: float = DEFAULT_SAFETY

    @property
    def step_count(self) -> int:
        return len(self.lambdas)

    # -- evaluation ----------------------------------------------------

    def f_eval(self, z):
        """Value and derivative of the current partial sum at z."""
        base, dbase = self.model.base_eval(z)
        if not self.lambdas:
            return base, dbase
        w, dw = self.model.warp_eval(z)
        images = self._root_images()
        g = cmath.exp(-w * w) if isinstance(w, complex) else math.exp(-w * w)
        # prefix products over (w - w(alpha_k)) and their w-derivatives
        prod = 1.0
        dprod = 0.0
        s = self.lambdas[0]  # h_1 == 1
        ds = 0.0
        for j in range(2, len(self.lambdas) + 1):
            fac = w - images[j - 2]
            dprod = dprod * fac + prod
            prod = prod * fac
            lam = self.lambdas[j - 1]
            if lam != 0.0:
                s += lam * g * prod
                ds += lam * g * (dprod - 2.0 * w * prod)
        mod, dmod = self.model.mod_eval(z)
        value = base + mod * s
        deriv = dbase + dmod * s + mod * ds * dw
        return value, deriv

    def __call__(self, x):
        return self.f_eval(x)[0]

    def _root_images(self):
        if not self.model.warped:
            return self.alphas
        if not hasattr(self, "_img_cache") or len(self._img_cache) != len(self.alphas):
            self._img_cache = [self.model.warp_eval(a)[0] for a in self.alphas]
        return self._img_cache

    def term_value(self, n: int, z):
        """h_n at z (n >= 1) against the currently committed roots."""
        if n == 1:
            return 1.0
        w, _ = self.model.warp_eval(z)
        images = self._root_images()[: n - 1]
        g = cmath.exp(-w * w) if isinstance(w, complex) else math.exp(-w * w)
        prod = 1.0
        for wk in images:
            prod *= (w - wk)
        return g * prod

    # -- solvers and caps ----------------------------------------------

    def solve_preimage(self, target: float) -> float:
        """Best-float root of f(x) = target (f strictly increasing).

        Bisects all the way down to adjacent floats so that an exactly
        representable preimage is returned exactly, never perturbed by
        an early tolerance exit.
        """
        x = target
        fx = self.f_eval(x)[0]
        if fx == target:
            return x
        step = max(1.0, abs(target)) * 0.5
        lo, hi = x, x
        flo = fhi = fx
        for _ in range(MAX_BRACKET_DOUBLINGS + 1):
            if flo > target:
                lo -= step
                flo = self.f_eval(lo)[0]
            elif fhi < target:
                hi += step
                fhi = self.f_eval(hi)[0]
            else:
                break
            step *= 2.0
        else:
            raise ConstructionError("bracket expansion exceeded limit")
        while True:
            mid = 0.5 * (lo + hi)
            if not (lo < mid < hi):
                break
            fm = self.f_eval(mid)[0]
            if fm == target:
                return mid
            if fm < target:
                lo = mid
            else:
                hi = mid
        return min((lo, hi), key=lambda c: abs(self.f_eval(c)[0] - target))

    def eta_cap(self, n: int):
        """Largest |lambda| for which the three smallness conditions hold
        at index n, from sampled sup bounds (log-space where needed)."""
        if n < 2:
            raise ValueError("eta_cap applies from step 2 on")
        eps = self.budgets.epsilon(n)
        roots = self.alphas[: n - 1]
        images = self._root_images()[: n - 1]
        deg = len(roots)

        if self.model.warped:
            log_disk = self._log_sup_warped_disk(images, radius=float(n))
        else:
            log_disk = log_sup_gauss_on_disk(roots, radius=float(n),
                                             m=1024, safety=self.safety)

        half = max((abs(r) for r in roots), default=0.0) + math.sqrt(deg + 2) + 2.0
        hb = self.model.warp_real_bound()
        if math.isfinite(hb):
            half = min(half, hb)

        def hprime(x):
            w, dw = self.model.warp_eval(x)
            g = math.exp(-w * w)
            prod, dprod = 1.0, 0.0
            for wk in images:
                dprod = dprod * (w - wk) + prod
                prod *= (w - wk)
            return dw * g * (dprod - 2.0 * w * prod)

        sup_real_b = sup_on_real(hprime, half, m=4096, safety=self.safety)
        growth_b = growth_cap(images if self.model.warped else roots,
                              m=2048, safety=self.safety)

        log_eta = min(math.log(eps) - log_disk,
                      math.log(eps) - sup_real_b.log_value,
                      -n * math.log(2.0) - growth_b.log_value)
        extra = getattr(self.model, "eta_extra", None)
        if extra is not None:
            log_eta = min(log_eta, extra(self, n))
        eta = math.exp(log_eta) if log_eta > -745 else 0.0
        sup_disk_val = math.exp(log_disk) if log_disk < 700 else math.inf
        return eta, sup_disk_val, sup_real_b.value, growth_b.value

    def _log_sup_warped_disk(self, images, radius: float, m: int = 1024) -> float:
        best = -math.inf
        for k in range(m):
            z = radius * cmath.exp(2j * math.pi * k / m)
            w, _ = self.model.warp_eval(z)
            lg = -(w * w).real
            for wk in images:
                d = abs(w - wk)
                lg += math.log(d) if d > 0 else -math.inf
            if lg > best:
                best = lg
        return best + math.log(self.safety)

    # -- steps -----------------------------------------------------------

    def exact_shift(self):
        """Exact rational L with true f(x) = x + L, when that form holds
        exactly: identity model, exact seed, every later lambda zero."""
        from fractions import Fraction
        if self.model.warped or not isinstance(self.model, IdentityModel):
            return None
        if not self.lambdas or any(l != 0.0 for l in self.lambdas[1:]):
            return None
        a0, b0 = self.alpha_exacts[0], self.beta_exacts[0]
        if a0 is None or b0 is None:
            return None
        lam = Fraction(self.lambdas[0])
        return lam if b0 - a0 == lam else None

    def _order_ok(self, a_key, b_key) -> bool:
        """Would committing (a_key, b_key) keep the pairing exactly
        order-isomorphic against all committed pairs?"""
        for ka, kb in zip(self.alpha_keys, self.beta_keys):
            if a_key == ka or b_key == kb or (a_key < ka) != (b_key < kb):
                return False
        return True

    def _commit(self, kind: str, alpha_ref: ElementRef, beta_ref: ElementRef,
                lam: float, eta=None, sups=(None, None, None),
                exact_hit=False) -> None:
        self.alphas.append(alpha_ref.value)
        self.betas.append(beta_ref.value)
        self.lambdas.append(lam)
        self.alpha_keys.append(alpha_ref.order_key)
        self.beta_keys.append(beta_ref.order_key)
        self.alpha_exacts.append(alpha_ref.exact)
        self.beta_exacts.append(beta_ref.exact)
        if hasattr(self, "_img_cache"):
            del self._img_cache
        residual = abs(self.f_eval(alpha_ref.value)[0] - beta_ref.value)
        self.trace.append(StepTrace(
            step=self.step_count, kind=kind,
            alpha=alpha_ref.value, beta=beta_ref.value, lam=lam,
            eta=eta,
            sup_disk=_json_safe(sups[0]), sup_real=_json_safe(sups[1]),
            sup_growth=_json_safe(sups[2]),
            residual=residual, exact_hit=exact_hit))

    def seed(self) -> None:
        """alpha_1 = a_1, beta_1 = b_1, lambda_1 = (b_1 - base(a_1)) / mod(a_1)."""
        a1 = self.enum_a.first_unused()
        b1 = self.enum_b.first_unused()
        self.enum_a.mark_used(a1)
        self.enum_b.mark_used(b1)
        if not self.model.warped and a1.exact is not None and b1.exact is not None:
            lam = float(b1.exact - a1.exact)  # one rounding of the exact gap
        else:
            base = self.model.base_eval(a1.value)[0]
            mod = self.model.mod_eval(a1.value)[0]
            lam = (b1.value - base) / mod
        self._commit("seed", a1, b1, lam, exact_hit=False)
        nxt = self.enum_b.first_unused()
        self.enum_b.mark_used(nxt)
        self.pending_beta = nxt

    def step_even(self) -> None:
        n = self.step_count + 1
        if n % 2 != 0:
            raise ConstructionError("even step out of order")
        beta_ref = self.pending_beta
        self.pending_beta = None
        target = beta_ref.value

        if self.prefer_exact:
            # exact-arithmetic preimage when the true map is x -> x + L
            shift = self.exact_shift()
            if shift is not None and beta_ref.exact is not None:
                ref = self.enum_a.member_from_exact(beta_ref.exact - shift)
                if (ref is not None and not self.enum_a.is_used(ref)
                        and self._order_ok(ref.order_key, beta_ref.order_key)):
                    self.enum_a.mark_used(ref)
                    self._commit("even", ref, beta_ref, 0.0, exact_hit=True)
                    return

        x_n = self.solve_preimage(target)

        if self.prefer_exact:
            # lambda = 0 needs f(alpha) == beta at least to float rounding.
            # Several ulp-neighbours of the bisection point may qualify;
            # rank exact float hits first, then by simplicity, so the
            # canonical member of A is consumed, not a noise float.
            cands = sorted(
                (c for c in _float_neighbors(x_n, 4)
                 if abs(self.f_eval(c)[0] - target) <= 2.0 * _ulp(target)),
                key=lambda c: (self.f_eval(c)[0] != target, _simplicity(c)))
            for cand in cands:
                ref = self.enum_a.locate_value(cand)
                if (ref is not None and not self.enum_a.is_used(ref)
                        and self._order_ok(ref.order_key, beta_ref.order_key)):
                    self.enum_a.mark_used(ref)
                    self._commit("even", ref, beta_ref, 0.0,
                                 exact_hit=self.f_eval(cand)[0] == target)
                    return

        eta, sd, sr, sg = self.eta_cap(n)
        if eta <= 0.0:
            raise ConstructionError(
                f"step {n}: smallness cap underflowed to zero; "
                "no inexact choice is representable at this depth")
        def lam_of(x):
            mx = self.model.mod_eval(x)[0]
            hx = self.term_value(n, x)
            return (target - self.f_eval(x)[0]) / (mx * hx)

        half = 1.0
        chosen = None
        for _ in range(MAX_INTERVAL_HALVINGS):
            samples = [x_n + half * (k / 16.0 - 1.0) for k in range(33)]
            if all(abs(lam_of(x)) < eta for x in samples
                   if self.term_value(n, x) != 0.0):
                exclude = set(self.alpha_keys)
                cand = None
                while True:
                    try:
                        cand = self.enum_a.find_in_interval(
                            x_n - half, x_n + half,
                            exclude=exclude, cap=self.scan_cap)
                    except (ScanCapExceeded, DegenerateInterval):
                        cand = None
                        break
                    if self._order_ok(cand.order_key, beta_ref.order_key):
                        break
                    exclude.add(cand.order_key)
                if cand is not None:
                    lam = lam_of(cand.value)
                    if abs(lam) < eta:
                        chosen = (cand, lam)
                        break
            half *= 0.5
        if chosen is None:
            raise ConstructionError(
                f"step {n}: no admissible alpha in A near x_n = {x_n} "
                f"(eta = {eta:.3e})")
        cand, lam = chosen
        self.enum_a.mark_used(cand)
        self._commit("even", cand, beta_ref, lam, eta=eta, sups=(sd, sr, sg))

    def step_odd(self) -> None:
        n = self.step_count + 1
        if n % 2 != 1 or n < 3:
            raise ConstructionError("odd step out of order")
        alpha_ref = self.enum_a.first_unused()
        self.enum_a.mark_used(alpha_ref)
        a = alpha_ref.value
        f_at = self.f_eval(a)[0]
        h_at = self.term_value(n, a)
        if h_at == 0.0:
            raise ConstructionError(f"h_{n}(alpha_{n}) = 0")

        if self.prefer_exact:
            shift = self.exact_shift()
            if shift is not None and alpha_ref.exact is not None:
                ref = self.enum_b.member_from_exact(alpha_ref.exact + shift)
                if (ref is not None and not self.enum_b.is_used(ref)
                        and self._order_ok(alpha_ref.order_key, ref.order_key)):
                    self.enum_b.mark_used(ref)
                    self._commit("odd", alpha_ref, ref, 0.0, exact_hit=True)
                    self._select_next_beta()
                    return
            # float-level hit: a member of B within rounding of f(alpha)
            for v in _float_neighbors(f_at, 4):
                ref = self.enum_b.locate_value(v)
                if (ref is not None and not self.enum_b.is_used(ref)
                        and self._order_ok(alpha_ref.order_key, ref.order_key)):
                    self.enum_b.mark_used(ref)
                    self._commit("odd", alpha_ref, ref, 0.0,
                                 exact_hit=v == f_at)
                    self._select_next_beta()
                    return

        eta, sd, sr, sg = self.eta_cap(n)
        if eta <= 0.0:
            raise ConstructionError(
                f"step {n}: smallness cap underflowed to zero")
        # the odd-step scale factor is the modulator by default; models may
        # supply a different one (see the odd_factor discussion in birkhoff)
        odd_factor = getattr(self.model, "odd_factor", None)
        mod_at = odd_factor(a) if odd_factor is not None \
            else self.model.mod_eval(a)[0]
        radius = eta * abs(mod_at * h_at)
        exclude = set(self.beta_keys)
        while True:
            try:
                cand = self.enum_b.find_in_interval(
                    f_at - radius, f_at + radius,
                    exclude=exclude, cap=self.scan_cap)
            except (ScanCapExceeded, DegenerateInterval) as exc:
                raise ConstructionError(
                    f"step {n}: no unused element of B within {radius:.3e} "
                    f"of {f_at}") from exc
            if self._order_ok(alpha_ref.order_key, cand.order_key):
                break
            exclude.add(cand.order_key)
        lam = (cand.value - f_at) / (mod_at * h_at)
        self.enum_b.mark_used(cand)
        self._commit("odd", alpha_ref, cand, lam, eta=eta, sups=(sd, sr, sg))
        self._select_next_beta()

    def _select_next_beta(self) -> None:
        nxt = self.enum_b.first_unused()
        self.enum_b.mark_used(nxt)
        self.pending_beta = nxt


def _ulp(x: float) -> float:
    return math.ulp(x) if x != 0.0 else math.ulp(0.0)


def _simplicity(x: float):
    from fractions import Fraction
    q = Fraction(x)
    return (q.denominator, abs(q.numerator))


def _float_neighbors(x: float, width: int):
    """x, then its ulp-neighbours alternating outward."""
    yield x
    up, down = x, x
    for _ in range(width):
        up = math.nextafter(up, math.inf)
        down = math.nextafter(down, -math.inf)
        yield up
        yield down


def _json_safe(v):
    if v is None:
        return None
    return v if math.isfinite(v) else None


def run(enum_a: Enumeration, enum_b: Enumeration,
        budgets: BudgetSchedule = None, n_steps: int = 20,
        model=None, prefer_exact: bool = True,
        scan_cap: int = 200_000) -> ConstructionState:
    """Alternate even/odd steps until n_steps lambdas are committed."""
    if n_steps < 1:
        raise ValueError("n_steps >= 1 required")
    state = ConstructionState(
        enum_a=enum_a, enum_b=enum_b,
        budgets=budgets or BudgetSchedule(),
        model=model or IdentityModel(),
        prefer_exact=prefer_exact, scan_cap=scan_cap)
    state.seed()
    while state.step_count < n_steps:
        if (state.step_count + 1) % 2 == 0:
            state.step_even()
        else:
            state.step_odd()
    return state


# --------------------------------------------------------------------------
# verification
# --------------------------------------------------------------------------


def _pairing_is_order_isomorphic(alpha_keys, beta_keys) -> int:
    """Number of exact order violations between the two key sequences."""
    order = sorted(range(len(alpha_keys)), key=lambda i: alpha_keys[i])
    bad = 0
    for i, j in zip(order, order[1:]):
        if not beta_keys[i] < beta_keys[j]:
            bad += 1
    return bad


def verify(state: ConstructionState, window=(-5.0, 5.0), grid_m: int = 2048,
           growth_samples: int = 1000) -> VerificationReport:
    checks = []
    n = state.step_count

    # (i) interpolation residuals
    res = max(abs(state.f_eval(a)[0] - b)
              for a, b in zip(state.alphas, state.betas))
    checks.append(CheckResult("interpolation", res <= INTERPOLATION_TOL,
                              INTERPOLATION_TOL - res,
                              f"max |f(alpha_j) - beta_j| = {res:.3e}"))

    # (ii) exact pairing order isomorphism
    bad = _pairing_is_order_isomorphic(state.alpha_keys, state.beta_keys)
    checks.append(CheckResult("order-isomorphism", bad == 0, float(-bad),
                              f"{bad} exact order violations"))

    # (iii) back-and-forth exhaustiveness
    half = n // 2
    missing = 0
    for enum in (state.enum_a, state.enum_b):
        for k in range(1, half + 1):
            ref = enum.nth(k)
            if k not in enum.used_indices and ref.order_key not in enum.used_keys:
                missing += 1
    checks.append(CheckResult(
        "exhaustiveness", missing == 0, float(-missing),
        f"first {half} of each enumeration: {missing} unconsumed"))

    # (iv) derivative floor on the window grid
    a, b = window
    floor = 1.0 - state.budgets.partial_sum
    lo = math.inf
    for k in range(grid_m):
        x = a + (b - a) * k / (grid_m - 1)
        d = state.f_eval(x)[1]
        lo = min(lo, d)
    if state.model.warped:
        floor = 0.0  # the universal variant asserts positivity only
    checks.append(CheckResult("derivative-floor", lo >= floor - 1e-9,
                              lo - floor,
                              f"grid min f' = {lo:.6f}, floor {floor:.6f}"))

    # (v) per-step smallness margins
    worst = math.inf
    fail = 0
    for t in state.trace:
        if t.kind == "seed":
            continue
        eps = state.budgets.epsilon(t.step)
        if t.lam == 0.0:
            worst = min(worst, eps, 2.0 ** (-t.step))
            continue
        for sup, cap in ((t.sup_disk, eps), (t.sup_real, eps),
                         (t.sup_growth, 2.0 ** (-t.step))):
            if sup is None:
                fail += 1
                continue
            m = cap - abs(t.lam) * sup
            worst = min(worst, m)
            if m <= 0:
                fail += 1
    checks.append(CheckResult("smallness-margins", fail == 0,
                              worst if math.isfinite(worst) else 0.0,
                              f"{fail} margin violations, min margin {worst:.3e}"))

    # (vi) growth bound on |z| <= 3 (only meaningful for the identity model)
    if not state.model.warped:
        rng = _lcg(20250826)
        worst_g = math.inf
        ok = True
        lam1 = abs(state.lambdas[0]) if state.lambdas else 0.0
        for _ in range(growth_samples):
            r = 3.0 * math.sqrt(next(rng))
            th = 2.0 * math.pi * next(rng)
            z = complex(r * math.cos(th), r * math.sin(th))
            bound = abs(z) + lam1 + math.exp(abs(z) ** 3)
            m = bound - abs(state.f_eval(z)[0])
            worst_g = min(worst_g, m)
            ok = ok and (m >= 0)
        checks.append(CheckResult("growth-bound", ok, worst_g,
                                  f"min margin {worst_g:.3e} over {growth_samples} samples"))

    # (vii) conjugate symmetry
    rng = _lcg(987654321)
    worst_s = 0.0
    for _ in range(200):
        z = complex(next(rng) * 8 - 4, next(rng) * 8 - 4)
        v1 = state.f_eval(z)[0]
        v2 = state.f_eval(z.conjugate())[0]
        err = abs(v2 - v1.conjugate())
        scale = max(1.0, abs(v1))
        worst_s = max(worst_s, err / scale)
    tol = 4 * 2.220446049250313e-16
    checks.append(CheckResult("conjugate-symmetry", worst_s <= tol,
                              tol - worst_s, f"max rel asymmetry {worst_s:.3e}"))

    return VerificationReport(checks)


def _lcg(seed: int):
    """Deterministic uniform(0,1) stream (no global RNG state)."""
    state = seed & 0xFFFFFFFFFFFF
    while True:
        state = (25214903917 * state + 11) & 0xFFFFFFFFFFFF
        yield state / 0x1000000000000
