"""Universal-carrier pipeline on a special chaplet.

Builds a single real polynomial carrier Phi that is close to the
identity on a real window, strictly increasing there, and close to a
prescribed cycle of rational polynomials on the chaplet discs; a damper
H that is close to 1 on the window and tiny on the discs; and then runs
the warped back-and-forth construction f = Phi + H * sum lambda_j h_j
with h_j(z) = exp(-Phi(z)^2) * prod_{k<j} (Phi(z) - Phi(alpha_k)), so
the limit object interpolates B over A while staying within 1/|z| of
the carrier on the discs.  Universality is witnessed finitely: for each
cycle target the translate of f to its disc reproduces the target
within the measured budget.
"""

from __future__ import annotations

import cmath
import math
import tempfile
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import franklin
from .approxkit import (ApproxError, PatchResult, PatchSchedule,
                        SpecialChaplet, DEGREE_LADDER, PIECE_SAMPLES,
                        WINDOW_SAMPLES, re_patch)
from .franklin import BudgetSchedule, ConstructionState
from .numkernel import Disk, Interval, RealPoly

CHAPLET_SAMPLES = 256     # boundary samples per disc for artifact checks
GRID_SAMPLES = 4096       # real-window grid for derivative/range checks


# --------------------------------------------------------------------------
# chaplet and target cycle
# --------------------------------------------------------------------------


def default_chaplet(K: int) -> SpecialChaplet:
    """Radii 2^n; disc n centred at 1.5*2^n*i with radius 2^(n-2)."""
    if K < 1:
        raise ValueError("K >= 1 required")
    radii = tuple(2.0 ** n for n in range(1, K + 2))
    discs = tuple(Disk(1.5 * 2.0 ** n * 1j, 2.0 ** (n - 2))
                  for n in range(1, K + 1))
    return SpecialChaplet(radii, discs)  # containment checked on build


@dataclass(frozen=True)
class TargetCycle:
    """Finitely many rational-coefficient targets, assigned cyclically.

    Disc n carries targets[(n-1) mod len(targets)]; with K >= 2*len
    every target appears on at least two discs, the finite stand-in for
    an enumeration in which every polynomial recurs infinitely often.
    """

    targets: tuple

    def __post_init__(self):
        if not self.targets:
            raise ValueError("need at least one target")

    def index_for(self, n: int) -> int:
        return (n - 1) % len(self.targets)

    def target_for(self, n: int) -> RealPoly:
        return self.targets[self.index_for(n)]

    def discs_for(self, index: int, K: int):
        return [n for n in range(1, K + 1) if self.index_for(n) == index]

    def check_coverage(self, K: int) -> None:
        if K >= 2 * len(self.targets):
            for i in range(len(self.targets)):
                if len(self.discs_for(i, K)) < 2:
                    raise ValueError(f"target {i} assigned to fewer "
                                     "than two discs")


def default_cycle() -> TargetCycle:
    """Three small rational targets; slopes must stay small because the
    damper budget scales with exp(-target^2) on each disc."""
    return TargetCycle((RealPoly((1.0,)),
                        RealPoly((0.5, 1.0 / 64.0)),
                        RealPoly((-0.75,))))


def _disc_samples(disc: Disk, m: int = CHAPLET_SAMPLES) -> np.ndarray:
    return np.array(disc.boundary(m), dtype=complex)


def _chaplet_boundary(chaplet: SpecialChaplet, m: int = CHAPLET_SAMPLES):
    """Per-disc boundary samples, upper and mirrored discs."""
    out = []
    for n in range(1, chaplet.count + 1):
        up = _disc_samples(chaplet.discs[n - 1], m)
        out.append((n, np.concatenate([up, np.conj(up)])))
    return out


def _real_coefficients(poly) -> bool:
    """Exact realness of every coefficient array in a (possibly summed)
    patch polynomial; real recurrences evaluate conjugate-symmetrically,
    so this is the whole check."""
    for p in getattr(poly, "parts", (poly,)):
        p = getattr(p, "part", p)
        arrays = [np.asarray(getattr(p, "coeffs", ()))]
        if hasattr(p, "hess"):
            arrays.append(np.asarray(p.hess))
        for a in arrays:
            if not (np.isrealobj(a) or bool(np.all(np.isreal(a)))):
                return False
    return True


# --------------------------------------------------------------------------
# the carrier Phi
# --------------------------------------------------------------------------


@dataclass
class PhiArtifact:
    poly: object                  # final patch polynomial (orthogonal basis)
    chaplet: SpecialChaplet
    cycle: TargetCycle
    window: Interval
    deriv_floor: float            # min Phi' on the window grid
    disc_errors: tuple            # per-disc sup |Phi - target| on samples
    real_coefficients: bool
    patch: Optional[PatchResult] = None

    def eval_with_deriv(self, z):
        return self.poly.eval_with_deriv(z)

    def __call__(self, z):
        return self.poly(z)


def _shifted_target(poly: RealPoly, center: complex):
    def data(z, _p=poly, _a=center):
        return _p(z - _a)
    return data


def build_phi(chaplet: SpecialChaplet, cycle: TargetCycle,
              window: Optional[Interval] = None,
              budgets: Optional[PatchSchedule] = None,
              degrees: Sequence[int] = DEGREE_LADDER,
              stage_caps: Optional[Sequence[int]] = None,
              spill_dir: Optional[str] = None) -> PhiArtifact:
    """Carrier polynomial: identity-like on the window, cycle targets on
    the discs (conjugate-reflected data on the mirrored discs).

    The disc tolerance is 1/n on disc n and the real tolerance 1/2 (half
    the slope of the identity), so the derivative keeps a positive floor
    and each target is reproduced within 1/n.
    """
    K = chaplet.count
    cycle.check_coverage(K)
    big_r = chaplet.radii[-1]
    if window is None:
        window = Interval(-big_r, big_r)
    if window.a > -big_r or window.b < big_r:
        raise ValueError("window must cover [-r_{K+1}, r_{K+1}]")

    minima = [min(0.5, 1.0 / n) for n in range(1, K + 1)]
    schedule = budgets if budgets is not None else \
        PatchSchedule.design(minima, count=K + 1)

    fE = [_shifted_target(cycle.target_for(n), chaplet.discs[n - 1].center)
          for n in range(1, K + 1)]
    identity = RealPoly((0.0, 1.0), scale=1.0)
    if spill_dir is None:
        spill_dir = tempfile.mkdtemp(prefix="carrier_phi_")
    patch = re_patch(chaplet, fE, identity, (), schedule,
                     degrees=degrees, stage_caps=stage_caps,
                     spill_dir=spill_dir)
    phi = patch.stages[-1]

    grid = np.array(window.grid(GRID_SAMPLES))
    _, dvals = phi.eval_many(grid)
    floor = float(np.min(dvals.real))
    disc_errors = []
    for n, pts in _chaplet_boundary(chaplet):
        targ = np.array([_reflect(fE[n - 1])(z) for z in pts])
        pv, _ = phi.eval_many(pts)
        disc_errors.append(float(np.max(np.abs(pv - targ))))
    real_ok = _real_coefficients(phi)

    art = PhiArtifact(phi, chaplet, cycle, window, floor,
                      tuple(disc_errors), real_ok, patch)
    problems = []
    if floor <= 0.0:
        problems.append(f"derivative floor {floor:.3e} not positive")
    for n, err in enumerate(disc_errors, start=1):
        if err >= 1.0 / n:
            problems.append(f"disc {n} error {err:.3e} >= {1.0 / n:.3e}")
    if not real_ok:
        problems.append("coefficients not exactly real")
    if problems:
        raise ApproxError("carrier invariants failed: " + "; ".join(problems))
    return art


def _reflect(fn):
    def data(z):
        if z.imag >= 0:
            return complex(fn(z))
        return complex(fn(z.conjugate())).conjugate()
    return data


# --------------------------------------------------------------------------
# the damper H
# --------------------------------------------------------------------------


@dataclass
class EpsilonDesign:
    """Pointwise damper tolerances on the sample layouts actually used."""

    jmax: int
    disc_points: tuple       # per disc: complex samples (upper + mirrored)
    disc_eps: tuple          # per disc: tolerance at those samples
    real_points: np.ndarray
    real_eps: np.ndarray
    degenerate: int = 0      # samples where the envelope over/underflowed

    def stage_minima(self, chaplet: SpecialChaplet):
        mins = []
        for n in range(1, chaplet.count + 1):
            r_out = chaplet.radii[n]
            on_axis = self.real_eps[np.abs(self.real_points) <= r_out]
            mins.append(min(float(np.min(on_axis)),
                            float(np.min(self.disc_eps[n - 1]))))
        return mins


def design_epsilon_H(chaplet: SpecialChaplet, phi: PhiArtifact,
                     jmax: int = 1) -> EpsilonDesign:
    """Tolerance the damper must satisfy so every later series term
    stays below 2^-j / |z| on the discs and below the derivative budget
    on the axis.

    The alpha-roots do not exist yet, so each |h_j| is replaced by the
    root-free envelope exp(-Re(w^2)) * (|w| + 2 r_{K+1})^(j-1) with
    w = Phi(z), an upper bound for every admissible root configuration
    inside the window; everything is halved for margin.
    """
    if jmax < 1:
        raise ValueError("jmax >= 1 required")
    big_r = chaplet.radii[-1]
    degenerate = 0

    def envelope_min(w_vals, scale_vals):
        # min over j <= jmax of scale / envelope_j(w), capped by 1
        out = np.ones(len(w_vals))
        logw = np.log(np.abs(w_vals) + 2.0 * big_r)
        base = -np.real(w_vals * w_vals)
        for j in range(1, jmax + 1):
            log_env = base + (j - 1) * logw
            with np.errstate(over="ignore", under="ignore"):
                cand = scale_vals * np.exp(-np.clip(log_env, -745.0, 745.0))
            out = np.minimum(out, cand)
        return out

    disc_points, disc_eps = [], []
    for n, pts in _chaplet_boundary(chaplet):
        w, _ = phi.poly.eval_many(pts)
        eps = 0.5 * envelope_min(w, 1.0 / np.abs(pts))
        degenerate += int(np.sum(~np.isfinite(eps)) + np.sum(eps <= 0.0))
        disc_points.append(pts)
        disc_eps.append(eps)

    grid = np.array(phi.window.grid(WINDOW_SAMPLES))
    vals, ders = phi.poly.eval_many(grid)
    w = vals.real.astype(complex)
    eps_r = 0.5 * envelope_min(w, np.maximum(ders.real, 0.0))
    degenerate += int(np.sum(~np.isfinite(eps_r)) + np.sum(eps_r <= 0.0))

    design = EpsilonDesign(jmax, tuple(disc_points), tuple(disc_eps),
                           grid, eps_r, degenerate)
    if degenerate:
        raise ApproxError(
            f"epsilon design degenerate at {degenerate} samples "
            "(envelope overflow); reduce jmax or the target sizes")
    return design


@dataclass
class HArtifact:
    poly: object
    design: EpsilonDesign
    window: Interval
    range_ok: bool            # 0 < H < 2 on the window grid
    sup_real_dev: float       # max |H-1| / eps on real samples
    sup_disc: float           # max |H| / eps on chaplet samples
    sup_real_deriv: float     # max |H'| / eps on real samples
    patch: Optional[PatchResult] = None

    def eval_with_deriv(self, z):
        return self.poly.eval_with_deriv(z)

    def __call__(self, z):
        return self.poly(z)


def build_H(chaplet: SpecialChaplet, design: EpsilonDesign,
            window: Optional[Interval] = None,
            budgets: Optional[PatchSchedule] = None,
            degrees: Sequence[int] = DEGREE_LADDER,
            stage_caps: Optional[Sequence[int]] = None,
            spill_dir: Optional[str] = None) -> HArtifact:
    """Damper: 1 on the real axis, 0 on the discs, within the design."""
    big_r = chaplet.radii[-1]
    if window is None:
        window = Interval(-big_r, big_r)
    minima = design.stage_minima(chaplet)
    schedule = budgets if budgets is not None else \
        PatchSchedule.design(minima, count=chaplet.count + 1)
    if spill_dir is None:
        spill_dir = tempfile.mkdtemp(prefix="damper_h_")

    one = RealPoly((1.0,), scale=1.0)
    zero = RealPoly((0.0,), scale=1.0)
    patch = re_patch(chaplet, [zero] * chaplet.count, one, (), schedule,
                     degrees=degrees, stage_caps=stage_caps,
                     spill_dir=spill_dir)
    H = patch.stages[-1]

    grid = np.array(window.grid(GRID_SAMPLES))
    gv, _ = H.eval_many(grid)
    range_ok = bool(np.all(gv.real > 0.0) and np.all(gv.real < 2.0))
    rv, rd = H.eval_many(design.real_points)
    sup_dev = float(np.max(np.abs(rv.real - 1.0) / design.real_eps))
    sup_der = float(np.max(np.abs(rd.real) / design.real_eps))
    sup_disc = 0.0
    for pts, eps in zip(design.disc_points, design.disc_eps):
        hv, _ = H.eval_many(pts)
        sup_disc = max(sup_disc, float(np.max(np.abs(hv) / eps)))

    art = HArtifact(H, design, window, range_ok, sup_dev, sup_disc,
                    sup_der, patch)
    problems = []
    if not range_ok:
        problems.append("H leaves (0, 2) on the window grid")
    if sup_dev >= 1.0:
        problems.append(f"|H-1|/eps reaches {sup_dev:.3f} on the axis")
    if sup_disc >= 1.0:
        problems.append(f"|H|/eps reaches {sup_disc:.3f} on the discs")
    if sup_der >= 1.0:
        problems.append(f"|H'|/eps reaches {sup_der:.3f} on the axis")
    if problems:
        raise ApproxError("damper invariants failed: " + "; ".join(problems))
    return art


# --------------------------------------------------------------------------
# the warped construction model
# --------------------------------------------------------------------------


class PhiModel:
    """base = Phi, modulator = H, warp = Phi, for the back-and-forth.

    Extra smallness caps beyond the generic engine ones: each committed
    term must stay below 2^-j / |z| at the chaplet samples (so the sum
    never moves f further than 1/|z| from the carrier there), and the
    window derivative floor of Phi must survive the accumulated
    derivative perturbations (budgeted geometrically).

    literal_odd_factor reproduces a published display in which the odd
    step scales by Phi(alpha) instead of H(alpha); the two disagree
    whenever Phi(alpha) != H(alpha), and only the H form keeps
    f(alpha) = beta under the series actually evaluated, so the switch
    exists for comparison runs, not for production.
    """

    warped = True

    def __init__(self, phi: PhiArtifact, damper: HArtifact,
                 literal_odd_factor: bool = False,
                 margin_grid: int = 1024, chaplet_m: int = 64):
        self.phi = phi
        self.damper = damper
        self.literal_odd_factor = literal_odd_factor
        self._cache = {}
        ch = phi.chaplet
        ups = [np.array(d.boundary(chaplet_m), dtype=complex)
               for d in ch.discs]
        pts = np.concatenate(ups + [np.conj(u) for u in ups])
        self._chaplet_pts = pts
        self._chaplet_w = phi.poly.eval_many(pts)[0]
        self._chaplet_H = damper.poly.eval_many(pts)[0]
        grid = np.array(phi.window.grid(margin_grid))
        pv, pd = phi.poly.eval_many(grid)
        hv, hd = damper.poly.eval_many(grid)
        self._grid = grid
        self._grid_w = pv.real
        self._grid_dw = pd.real
        self._grid_H = hv.real
        self._grid_dH = hd.real
        self.phi_floor = float(np.min(pd.real))

    # -- model protocol -------------------------------------------------

    def _both(self, z):
        key = complex(z)
        hit = self._cache.get(key)
        if hit is None:
            hit = (self.phi.poly.eval_with_deriv(z),
                   self.damper.poly.eval_with_deriv(z))
            if len(self._cache) > 65536:
                self._cache.clear()
            self._cache[key] = hit
        return hit

    def base_eval(self, z):
        return self._both(z)[0]

    def warp_eval(self, z):
        return self._both(z)[0]

    def mod_eval(self, z):
        return self._both(z)[1]

    def warp_real_bound(self) -> float:
        return self.phi.window.b

    def warp_disk_radius(self, n: int) -> float:
        # growth caps need |warp| control only where the carrier is
        # controlled: inside the first chaplet radius every invariant is
        # a window claim, so the probing disk never leaves that region
        return min(float(n), 0.9 * self.phi.chaplet.radii[0])

    def odd_factor(self, x):
        if self.literal_odd_factor:
            return self.base_eval(x)[0]
        return self.mod_eval(x)[0]

    # -- extra eta caps ---------------------------------------------------

    def _terms_on(self, w, dw, images):
        """h_n and dh_n/dz over arrays, for the committed root images."""
        with np.errstate(over="ignore", under="ignore"):
            g = np.exp(-w * w)
        prod = np.ones_like(w)
        dprod = np.zeros_like(w)
        for wk in images:
            fac = w - wk
            dprod = dprod * fac + prod
            prod = prod * fac
        h = g * prod
        dh = dw * g * (dprod - 2.0 * w * prod)
        return h, dh

    def eta_extra(self, state, n: int) -> float:
        images = np.array(state._root_images()[: n - 1], dtype=complex)
        # chaplet cap: |H(z) lambda h_n(z)| < 2^-n / |z| at the samples
        h, _ = self._terms_on(self._chaplet_w,
                              np.ones_like(self._chaplet_w), images)
        denom = np.abs(self._chaplet_H * h) * np.abs(self._chaplet_pts)
        good = denom > 0.0
        log_c = math.inf
        if np.any(good):
            log_c = float(np.min(-n * math.log(2.0) - np.log(denom[good])))
        # derivative cap: sum |H' lambda h_j| + |H lambda h_j'| must never
        # consume the Phi' floor; give step n the slice floor * 2^-(n+1)
        h, dh = self._terms_on(self._grid_w.astype(complex),
                               self._grid_dw.astype(complex), images)
        press = np.max(np.abs(self._grid_dH * h) + np.abs(self._grid_H * dh))
        log_m = math.inf
        if press > 0.0:
            log_m = (math.log(self.phi_floor) - (n + 1) * math.log(2.0)
                     - math.log(float(press)))
        return min(log_c, log_m)


@dataclass
class UniversalState:
    """A committed warped construction plus its carrier artifacts."""

    state: ConstructionState
    phi: PhiArtifact
    damper: HArtifact

    def __getattr__(self, name):
        return getattr(self.state, name)

    def f_eval(self, z):
        return self.state.f_eval(z)

    def __call__(self, x):
        return self.state.f_eval(x)[0]

    def carrier_deviation(self, m: int = CHAPLET_SAMPLES):
        """max |f - Phi| and max |f - Phi|*|z| over chaplet samples."""
        sup_dev = 0.0
        sup_weighted = 0.0
        per_disc = []
        for n, pts in _chaplet_boundary(self.phi.chaplet, m):
            dev = np.array([abs(self.state.f_eval(z)[0] - self.phi(z))
                            for z in pts])
            per_disc.append(float(dev.max()))
            sup_dev = max(sup_dev, per_disc[-1])
            sup_weighted = max(sup_weighted,
                               float(np.max(dev * np.abs(pts))))
        return sup_dev, sup_weighted, per_disc


def run_theorem2(enum_a, enum_b, phi: PhiArtifact, damper: HArtifact,
                 budgets: Optional[BudgetSchedule] = None, n_steps: int = 20,
                 literal_odd_factor: bool = False,
                 prefer_exact: bool = True,
                 scan_cap: int = 200_000) -> UniversalState:
    """Back-and-forth over the carrier: f = Phi + H * sum lambda_j h_j."""
    model = PhiModel(phi, damper, literal_odd_factor=literal_odd_factor)
    state = franklin.run(enum_a, enum_b, budgets=budgets, n_steps=n_steps,
                         model=model, prefer_exact=prefer_exact,
                         scan_cap=scan_cap)
    return UniversalState(state, phi, damper)


# --------------------------------------------------------------------------
# universality witnesses and verification
# --------------------------------------------------------------------------


@dataclass
class WitnessRecord:
    target_index: int
    disc: int
    error: float
    tol: float
    passed: bool


def universality_witness(obj, target: RealPoly,
                         tol: Optional[float] = None) -> WitnessRecord:
    """Measured sup of |f(z + a_n) - target(z)| over |z| <= rho_n samples
    for the best disc assigned to the target.

    obj is a PhiArtifact or an UniversalState; with no explicit tol the
    budget is 1/n plus (for a full construction) the measured carrier
    deviation on that disc.
    """
    if isinstance(obj, UniversalState):
        phi = obj.phi
        feval = lambda z: obj.state.f_eval(z)[0]
        _, _, per_disc = obj.carrier_deviation()
    else:
        phi = obj
        feval = lambda z: phi(z)
        per_disc = [0.0] * phi.chaplet.count
    cycle = phi.cycle
    idx = None
    for i, t in enumerate(cycle.targets):
        if t is target or (t.coeffs == target.coeffs and t.scale == target.scale):
            idx = i
            break
    if idx is None:
        raise ValueError("target is not in the cycle")
    discs = cycle.discs_for(idx, phi.chaplet.count)
    best = None
    for n in discs:
        d = phi.chaplet.discs[n - 1]
        rings = [d.radius, 0.6 * d.radius, 0.2 * d.radius]
        zs = np.concatenate([np.array(Disk(0.0, r).boundary(64))
                             for r in rings])
        err = max(abs(feval(z + d.center) - target(z)) for z in zs)
        budget = tol if tol is not None else 1.0 / n + per_disc[n - 1]
        rec = WitnessRecord(idx, n, float(err), float(budget), err <= budget)
        if rec.passed:
            return rec
        if best is None or rec.error < best.error:
            best = rec
    return best


def verify_universal(ustate: UniversalState):
    """Engine checks plus the carrier-specific invariants."""
    report = franklin.verify(ustate.state)
    checks = list(report.checks)
    st = ustate.state

    zeros_ok = True
    worst = 0.0
    for j in range(2, st.step_count + 1):
        for k in range(j - 1):
            v = abs(st.term_value(j, st.alphas[k]))
            worst = max(worst, v)
            zeros_ok = zeros_ok and v == 0.0
    checks.append(franklin.CheckResult(
        "warped telescoping exact zeros", zeros_ok, -worst,
        f"max |h_j(alpha_k)| = {worst:.3e} over k < j"))

    grid = np.array(ustate.phi.window.grid(GRID_SAMPLES // 2))
    dmin = min(st.f_eval(float(x))[1] for x in grid[:: max(1, len(grid) // 512)])
    checks.append(franklin.CheckResult(
        "grid min f' positive", dmin > 0.0, dmin, f"min f' = {dmin:.6e}"))

    sup_dev, sup_weighted, _ = ustate.carrier_deviation(m=64)
    checks.append(franklin.CheckResult(
        "carrier fidelity |f-Phi|*|z| <= 1", sup_weighted <= 1.0,
        1.0 - sup_weighted,
        f"max |f-Phi|*|z| = {sup_weighted:.3e}, max |f-Phi| = {sup_dev:.3e}"))

    rng = np.random.default_rng(7)
    pts = rng.uniform(-3, 3, 32) + 1j * rng.uniform(-3, 3, 32)
    sym = max(abs(st.f_eval(complex(z).conjugate())[0]
                  - complex(st.f_eval(complex(z))[0]).conjugate())
              for z in pts)
    tolsym = 4.0 * max(abs(st.f_eval(complex(z))[0]) for z in pts) * 2.2e-16
    checks.append(franklin.CheckResult(
        "conjugate symmetry", sym <= tolsym, tolsym - sym,
        f"max asymmetry {sym:.3e}"))

    return franklin.VerificationReport(checks=checks)
