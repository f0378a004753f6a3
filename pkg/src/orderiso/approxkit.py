"""Polynomial approximation machinery on sampled compacts.

The pieces: least-squares polynomial fitting on disc boundaries and
segments (a numerical stand-in for uniform approximation on compacts
with connected complement), exact interpolation of finitely many point
values and derivatives by a minimum-norm correction, an antiderivative
fitting scheme that controls a function on Q = K ∪ E and its derivative
on K simultaneously, a windowed C¹ approximation on a real interval
with exact pins, and the chaplet patch recursion that glues everything
into a single polynomial.

All fits use the scaled basis (z/scale)^k so coefficients stay O(1) on
windows of radius ~100; symmetric problems are solved as real systems,
which makes the real-coefficient claims exact rather than approximate.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import blas as _blas

from .numkernel import Disk, Interval, RealPoly, poly_symmetrize


def _blas_gemv_h(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """a^H @ x without materializing conj(a) (a must be F-contiguous)."""
    if not len(x):
        return np.zeros(a.shape[1], dtype=complex)
    return _blas.zgemv(1.0, a, x, trans=2)

DEGREE_LADDER = (8, 16, 32, 64, 128, 200)
PIECE_SAMPLES = 256
WINDOW_SAMPLES = 2048
CONSTRAINT_TOL = 1e-10
SOFT_WEIGHT = 0.03      # weight of advisory rows vs hard data rows
SAMPLE_FACTOR = 1.3     # fit samples per basis function on each hard piece
CHECK_EVERY = 16        # residual checkpoint spacing during basis growth


class ApproxError(RuntimeError):
    """A fit failed to reach its target within the degree ladder."""


class RankDeficient(ValueError):
    pass


# --------------------------------------------------------------------------
# domain types
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Constraint:
    point: complex
    kind: str  # "value" | "derivative"
    target: complex


@dataclass(frozen=True)
class ConstraintSet:
    items: tuple

    def __post_init__(self):
        seen = set()
        for c in self.items:
            if c.kind not in ("value", "derivative"):
                raise ValueError(f"unknown constraint kind {c.kind!r}")
            key = (c.kind, complex(c.point))
            if key in seen:
                raise ValueError(f"duplicate {c.kind} constraint at {c.point}")
            seen.add(key)

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @staticmethod
    def of(*triples) -> "ConstraintSet":
        return ConstraintSet(tuple(Constraint(p, k, t) for p, k, t in triples))


def _sample_piece(piece, m: int):
    """Fit nodes on a piece: disc boundaries uniform, segments Chebyshev.

    Uniform segment grids alias badly once the degree approaches the
    sample count; Chebyshev nodes keep the sampled least-squares problem
    faithful to the continuum one at any degree below the node count.
    """
    if isinstance(piece, Disk):
        pts = np.array(piece.boundary(m), dtype=complex)
        # snap rounding dust on the axis so conjugate folding is exact
        tiny = np.abs(pts.imag) <= 1e-12 * np.abs(pts.real)
        pts[tiny] = pts[tiny].real
        return pts
    k = np.arange(m)
    mid, half = 0.5 * (piece.a + piece.b), 0.5 * (piece.b - piece.a)
    return mid + half * np.cos((2 * k + 1) * np.pi / (2 * m))


@dataclass(frozen=True)
class CompactSpec:
    """Q = K ∪ E as explicit pieces; K carries derivative data, E only values."""

    k_pieces: tuple
    e_pieces: tuple = ()
    symmetric: bool = True

    @property
    def pieces(self):
        return self.k_pieces + self.e_pieces

    def radius(self) -> float:
        r = 0.0
        for p in self.pieces:
            if isinstance(p, Disk):
                r = max(r, abs(p.center) + p.radius)
            else:
                r = max(r, abs(p.a), abs(p.b))
        return r


@dataclass(frozen=True)
class SpecialChaplet:
    """Disjoint conjugate-symmetric disc pairs separated by annuli.

    radii r_1 < ... < r_{K+1}; disc n (upper half-plane) sits inside
    the open annulus r_n < |z| < r_{n+1} and off the real axis; the
    mirrored disc is implied.
    """

    radii: tuple
    discs: tuple  # upper-half-plane Disk per annulus

    def __post_init__(self):
        if len(self.radii) != len(self.discs) + 1:
            raise ValueError("need K discs and K+1 radii")
        for r1, r2 in zip(self.radii, self.radii[1:]):
            if not (0 < r1 < r2):
                raise ValueError("radii must be positive and increasing")
        prev_rho = 0.0
        for n, d in enumerate(self.discs, start=1):
            lo, hi = self.radii[n - 1], self.radii[n]
            if not (abs(d.center) - d.radius > lo and abs(d.center) + d.radius < hi):
                raise ValueError(f"disc {n} escapes its annulus ({lo}, {hi})")
            if d.center.imag - d.radius <= 0:
                raise ValueError(f"disc {n} touches the real axis")
            if d.radius <= prev_rho:
                raise ValueError("disc radii must be strictly increasing")
            prev_rho = d.radius
        # pairwise disjointness follows from annulus separation

    @property
    def count(self) -> int:
        return len(self.discs)

    def disc_minus(self, n: int) -> Disk:
        d = self.discs[n - 1]
        return Disk(d.center.conjugate(), d.radius)

    def stage_k(self, n: int) -> tuple:
        """K_n: closed disc of radius r_n plus the flanking segments."""
        lo, hi = self.radii[n - 1], self.radii[n]
        return (Disk(0.0, lo), Interval(lo, hi), Interval(-hi, -lo))

    def stage_e(self, n: int) -> tuple:
        return (self.discs[n - 1], self.disc_minus(n))


@dataclass(frozen=True)
class PatchSchedule:
    """Stage budgets ε_1..ε_{K+1} for the patch recursion.

    Invariants: Σ_{k>n} 2ε_k < ε_n for every n (stage errors must not
    wash out earlier stages), and each ε_n sits below the pointwise
    target minimum the caller designed for stage n.
    """

    epsilons: tuple
    stage_minima: tuple = ()

    def __post_init__(self):
        eps = self.epsilons
        if not eps or any(e <= 0 for e in eps):
            raise ValueError("budgets must be positive")
        for n in range(len(eps)):
            tail = 2.0 * sum(eps[n + 1:])
            if tail >= eps[n]:
                raise ValueError(f"tail rule violated at stage {n + 1}")
        for e, m in zip(eps, self.stage_minima):
            if e >= m:
                raise ValueError("budget exceeds its stage target minimum")

    def epsilon(self, n: int) -> float:
        return self.epsilons[n - 1]

    @staticmethod
    def design(stage_minima: Sequence[float], margin: float = 0.9,
               slack: float = 1.02, count: Optional[int] = None
               ) -> "PatchSchedule":
        """Largest-tail schedule under the stage minima.

        Working backward from f_count = 1 with f_n = slack·2·Σ_{k>n} f_k,
        any scaling ε_n = t·f_n satisfies the tail rule with room to
        spare; the largest t keeping every ε_n below margin·(its stage
        minimum) is used.  Maximizing the late budgets matters because
        the late stages are the expensive fits.
        """
        mins = [float(v) for v in stage_minima]
        if any(v <= 0 for v in mins):
            raise ValueError("stage minima must be positive")
        n_eps = count if count is not None else len(mins)
        if n_eps < len(mins):
            raise ValueError("need at least one budget per stage minimum")
        factors = [0.0] * n_eps
        factors[-1] = 1.0
        for n in range(n_eps - 2, -1, -1):
            factors[n] = slack * 2.0 * sum(factors[n + 1:])
        t = min(margin * mn / factors[i] for i, mn in enumerate(mins))
        return PatchSchedule(tuple(t * f for f in factors), tuple(mins))


# --------------------------------------------------------------------------
# least-squares core
# --------------------------------------------------------------------------


def _solve_ls(rows: np.ndarray, rhs: np.ndarray, symmetric: bool) -> np.ndarray:
    """Least-squares solve with one refinement pass.

    Symmetric problems are split into a real system (stacked real and
    imaginary parts), so the returned coefficients are exactly real.
    """
    if symmetric:
        mat = np.vstack([rows.real, rows.imag])
        vec = np.concatenate([rhs.real, rhs.imag])
    else:
        mat, vec = rows, rhs
    x, _, rank, _ = np.linalg.lstsq(mat, vec, rcond=None)
    if rank < min(mat.shape):
        # rank deficiency is fine for fitting (SVD picks the min-norm
        # solution) but the refinement step below still applies
        pass
    resid = vec - mat @ x
    dx, _, _, _ = np.linalg.lstsq(mat, resid, rcond=None)
    return x + dx


def _min_norm(rows: np.ndarray, rhs: np.ndarray, symmetric: bool) -> np.ndarray:
    """Minimum-coefficient-norm exact solution of an underdetermined system."""
    if symmetric:
        mat = np.vstack([rows.real, rows.imag])
        vec = np.concatenate([rhs.real, rhs.imag])
    else:
        mat, vec = rows, rhs
    x, _, rank, _ = np.linalg.lstsq(mat, vec, rcond=None)
    resid = vec - mat @ x
    if np.max(np.abs(resid), initial=0.0) > 1e-6 * max(1.0, np.max(np.abs(vec), initial=0.0)):
        raise RankDeficient("constraint system inconsistent or coincident points")
    dx, _, _, _ = np.linalg.lstsq(mat, resid, rcond=None)
    return x + dx


def _value_rows(points: np.ndarray, degree: int, scale: float) -> np.ndarray:
    w = points / scale
    return np.vander(w, degree + 1, increasing=True)


def _deriv_rows(points: np.ndarray, degree: int, scale: float) -> np.ndarray:
    w = points / scale
    rows = np.zeros((len(points), degree + 1), dtype=complex)
    rows[:, 1:] = np.vander(w, degree, increasing=True)
    rows *= np.arange(degree + 1) / scale
    return rows


def mergelyan_fit(samples, degree: int, symmetric: bool = True,
                  scale: float = 1.0):
    """Least-squares polynomial through (point, value) samples.

    Returns (poly, sup residual over the samples).  With symmetric=True
    the output has exactly real coefficients (the solve is real).
    """
    pts = np.array([complex(p) for p, _ in samples])
    vals = np.array([complex(v) for _, v in samples])
    if len(set(pts.tolist())) < degree + 1:
        raise RankDeficient(
            f"need at least {degree + 1} distinct points, got {len(set(pts.tolist()))}")
    rows = _value_rows(pts, degree, scale)
    coef = _solve_ls(rows, vals, symmetric)
    if symmetric:
        poly = RealPoly(tuple(float(c) for c in coef), scale)
    else:
        poly = poly_symmetrize(tuple(coef), scale) if np.allclose(coef.imag, 0) \
            else _ComplexPoly(tuple(coef), scale)
    resid = float(np.max(np.abs(rows @ np.asarray(coef, dtype=complex) - vals)))
    return poly, resid


class _ComplexPoly:
    """Thin non-symmetric counterpart of RealPoly (same eval interface)."""

    def __init__(self, coeffs, scale=1.0):
        self.coeffs = tuple(complex(c) for c in coeffs)
        self.scale = float(scale)

    def __call__(self, z):
        w = z / self.scale
        acc = self.coeffs[-1]
        for c in self.coeffs[-2::-1]:
            acc = acc * w + c
        return acc

    def eval_with_deriv(self, z):
        w = z / self.scale
        v = self.coeffs[-1]
        d = 0.0
        for c in self.coeffs[-2::-1]:
            d = d * w + v
            v = v * w + c
        return v, d / self.scale


def _constraint_rows(cset: ConstraintSet, degree: int, scale: float):
    rows = np.zeros((len(cset), degree + 1), dtype=complex)
    for i, c in enumerate(cset):
        pt = np.array([complex(c.point)])
        if c.kind == "value":
            rows[i] = _value_rows(pt, degree, scale)[0]
        else:
            rows[i] = _deriv_rows(pt, degree, scale)[0]
    return rows


def _apply_functional(p, c: Constraint) -> complex:
    v, d = p.eval_with_deriv(c.point)
    return v if c.kind == "value" else d


def walsh_correct(p, cset: ConstraintSet, degree: int,
                  symmetric: bool = True, scale: Optional[float] = None):
    """p plus the minimum-norm polynomial meeting the constraints exactly.

    Returns (corrected poly, sup of the correction on the reference disk
    |z| <= scale) so callers can enforce smallness of the perturbation.
    """
    if len(cset) == 0:
        return p, 0.0
    if degree + 1 < len(cset):
        raise ValueError("degree too small for the constraint count")
    s = scale if scale is not None else getattr(p, "scale", 1.0)
    rows = _constraint_rows(cset, degree, s)
    rhs = np.array([complex(c.target) - _apply_functional(p, c) for c in cset])
    coef = _min_norm(rows, rhs, symmetric)
    if symmetric:
        corr = RealPoly(tuple(float(x) for x in coef), s)
    else:
        corr = _ComplexPoly(tuple(coef), s)
    boundary = Disk(0.0, s).boundary(PIECE_SAMPLES)
    sup_corr = max(abs(corr(z)) for z in boundary)
    if symmetric and isinstance(p, RealPoly):
        return p + corr, sup_corr
    return _poly_sum(p, corr, s), sup_corr


def _poly_sum(p, q, scale):
    if isinstance(p, RealPoly) and isinstance(q, RealPoly):
        return p + q
    a = _rescaled_coeffs(p, scale)
    b = _rescaled_coeffs(q, scale)
    out = [0j] * max(len(a), len(b))
    for i, c in enumerate(a):
        out[i] += c
    for i, c in enumerate(b):
        out[i] += c
    return _ComplexPoly(tuple(out), scale)


def _rescaled_coeffs(p, new_scale):
    cs = list(getattr(p, "coeffs"))
    old = getattr(p, "scale", 1.0)
    f = 1.0
    out = []
    for c in cs:
        out.append(c * f)
        f *= new_scale / old
    return out


# --------------------------------------------------------------------------
# sample-set orthogonal basis (Arnoldi / Hessenberg recurrence)
#
# Monomials, however scaled, are numerically useless at degree ~100 on
# mixed disc/segment geometries: the least-squares matrix is so
# ill-conditioned that the SVD cutoff freezes the achievable residual.
# Orthogonalizing the basis on the actual sample set keeps the fitting
# matrix perfectly conditioned; the basis is then evaluated anywhere
# through the stored recurrence coefficients.
# --------------------------------------------------------------------------


def _realify(z: complex):
    return z.real if z.imag == 0.0 else z


class OrthoPoly:
    """Polynomial in a sample-set-orthonormal basis.

    q_0 = h0; q_{k+1}(z) = ((z/scale)·q_k(z) − Σ_j H[j,k] q_j(z)) / H[k+1,k].
    With a conjugation-closed node set, H and the coefficients are real,
    so evaluation is exactly conjugate-symmetric and real on the reals.
    """

    __slots__ = ("hess", "h0", "coeffs", "scale")

    def __init__(self, hess: np.ndarray, h0: float, coeffs: np.ndarray,
                 scale: float):
        self.hess = hess
        self.h0 = float(h0)
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.scale = float(scale)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def basis_at(self, pts: np.ndarray, deriv: bool = False):
        """Basis values (and w-derivatives·1/scale) at the points."""
        w = np.asarray(pts, dtype=complex) / self.scale
        d = self.degree
        vals = np.empty((len(w), d + 1), dtype=complex)
        vals[:, 0] = self.h0
        ders = np.zeros_like(vals) if deriv else None
        for k in range(d):
            v = w * vals[:, k]
            v = v - vals[:, : k + 1] @ self.hess[: k + 1, k]
            vals[:, k + 1] = v / self.hess[k + 1, k]
            if deriv:
                dv = vals[:, k] / self.scale + w * ders[:, k]
                dv = dv - ders[:, : k + 1] @ self.hess[: k + 1, k]
                ders[:, k + 1] = dv / self.hess[k + 1, k]
        return (vals, ders) if deriv else vals

    def __call__(self, z):
        arr = np.atleast_1d(np.asarray(z, dtype=complex))
        out = self.basis_at(arr) @ self.coeffs
        return out if np.ndim(z) else _realify(out[0])

    def eval_with_deriv(self, z):
        vals, ders = self.basis_at(np.array([z]), deriv=True)
        return (_realify((vals @ self.coeffs)[0]),
                _realify((ders @ self.coeffs)[0]))

    def eval_many(self, pts, chunk: int = 4096):
        """Vectorized (values, derivatives) over an array of points.

        Large point sets are processed in chunks so the transient basis
        matrix (npts x degree) never dominates memory at high degree.
        """
        pts = np.asarray(pts, dtype=complex)
        if len(pts) <= chunk:
            vals, ders = self.basis_at(pts, deriv=True)
            return vals @ self.coeffs, ders @ self.coeffs
        vs, ds = [], []
        for i in range(0, len(pts), chunk):
            vals, ders = self.basis_at(pts[i:i + chunk], deriv=True)
            vs.append(vals @ self.coeffs)
            ds.append(ders @ self.coeffs)
        return np.concatenate(vs), np.concatenate(ds)

    def with_coeffs(self, coeffs) -> "OrthoPoly":
        return OrthoPoly(self.hess, self.h0, coeffs, self.scale)

    def spill(self, path: str) -> None:
        """Move the recurrence matrix to a disk-backed memory map.

        High-degree bases carry an O(degree^2) recurrence matrix; once a
        stage is finished the matrix is only ever read column-by-column
        during evaluation, so a read-only map keeps it out of resident
        memory while later stages fit.
        """
        np.save(path, np.asfortranarray(self.hess))
        self.hess = np.load(path if path.endswith(".npy") else path + ".npy",
                            mmap_mode="r")


class PolySum:
    """A polynomial held as a sum of independently represented parts.

    The patch recursion builds each stage as a correction added to the
    previous stage; summing the parts at evaluation time preserves each
    part's own numerically stable basis (collapsing everything onto one
    basis would square the conditioning).  Every part is conjugate-
    symmetric with real coefficients, so the sum is as well — exactly,
    since complex arithmetic commutes with conjugation in floating point.
    """

    __slots__ = ("parts",)

    def __init__(self, parts):
        self.parts = tuple(parts)

    def plus(self, part) -> "PolySum":
        return PolySum(self.parts + (part,))

    @property
    def degree(self) -> int:
        return max(int(getattr(p, "degree", 0)) for p in self.parts)

    def eval_many(self, pts):
        pts = np.asarray(pts, dtype=complex)
        v = np.zeros(len(pts), dtype=complex)
        d = np.zeros(len(pts), dtype=complex)
        for p in self.parts:
            pv, pd = _eval_piece(p, pts)
            v += pv
            d += pd
        return v, d

    def eval_with_deriv(self, z):
        v, d = self.eval_many(np.array([complex(z)]))
        return _realify(complex(v[0])), _realify(complex(d[0]))

    def __call__(self, z):
        arr = np.atleast_1d(np.asarray(z, dtype=complex))
        out = self.eval_many(arr)[0]
        return out if np.ndim(z) else _realify(complex(out[0]))


def arnoldi_basis(nodes: np.ndarray, degree: int, scale: float):
    """Orthonormal polynomial basis on the node set (values + recurrence).

    Returns (W, template) where W has orthonormal columns q_k(nodes) and
    template is a zero-coefficient OrthoPoly carrying the recurrence.
    """
    w = np.asarray(nodes, dtype=complex) / scale
    n = len(w)
    if degree + 1 > n:
        raise RankDeficient("more basis functions than nodes")
    W = np.empty((n, degree + 1), dtype=complex)
    hess = np.zeros((degree + 1, degree), dtype=float)
    h0 = 1.0 / math.sqrt(n)
    W[:, 0] = h0
    for k in range(degree):
        v = w * W[:, k]
        for _ in range(2):  # classical Gram-Schmidt, twice
            proj = W[:, : k + 1].conj().T @ v
            hess[: k + 1, k] += proj.real  # real by conjugate symmetry
            v = v - W[:, : k + 1] @ proj
        nv = float(np.linalg.norm(v))
        if nv < 1e-300:
            raise RankDeficient(f"node set supports degree < {k + 1}")
        hess[k + 1, k] = nv
        W[:, k + 1] = v / nv
    return W, OrthoPoly(hess, h0, np.zeros(degree + 1), scale)


def _fold_conjugate(nodes: np.ndarray, *datas):
    """Drop lower-half-plane nodes, weight upper ones by sqrt(2).

    On a conjugation-closed node set with conjugate-symmetric data the
    full weighted inner products equal the folded ones, so fits on the
    folded system are exactly the fits on the full system at half the
    cost; residual magnitudes at dropped nodes equal their mirrors.
    """
    keep = nodes.imag >= 0.0
    mult = np.where(nodes.imag > 0.0, math.sqrt(2.0), 1.0)[keep]
    return (nodes[keep], mult) + tuple(d[keep] for d in datas)


@dataclass
class _GrownFit:
    poly: OrthoPoly
    degree: int
    sup_value: float        # |p - f| over hard value rows
    sup_deriv: float        # |p' - f'| over hard derivative rows
    v_basis: np.ndarray     # basis values at the value nodes (for re-checks)
    d_basis: np.ndarray     # basis derivatives at the derivative nodes
    v_rhs: np.ndarray
    d_rhs: np.ndarray
    v_hard: np.ndarray
    d_hard: np.ndarray

    def residuals_for(self, coeffs: np.ndarray):
        c = np.asarray(coeffs, dtype=complex)
        rv = np.abs(self.v_basis @ c - self.v_rhs)
        sup_v = float(rv[self.v_hard].max()) if self.v_hard.any() else 0.0
        if len(self.d_rhs):
            rd = np.abs(self.d_basis @ c - self.d_rhs)
            sup_d = float(rd[self.d_hard].max()) if self.d_hard.any() else 0.0
        else:
            sup_d = 0.0
        return sup_v, sup_d


def _grow_fit(v_nodes, v_weights, v_rhs, v_hard,
              d_nodes, d_weights, d_rhs, d_hard,
              scale: float, eps: float, eps_deriv: Optional[float],
              cap: int, checkpoints=()) -> _GrownFit:
    """Grow a sample-orthonormal basis column by column and project.

    The least-squares solution in an orthonormal basis is a projection,
    so each new column refines the previous fit for free; residuals are
    checked at checkpoints and growth stops at the first degree meeting
    the gates (value gate eps on hard rows; derivative gate eps_deriv on
    hard derivative rows, or none).  All inputs must already be folded
    to the closed upper half-plane with multiplicity weights.
    """
    mv, md = len(v_nodes), len(d_nodes)
    if cap + 1 > mv + md:
        raise RankDeficient("more basis functions than sample functionals")
    zv = np.asarray(v_nodes, dtype=complex) / scale
    zd = np.asarray(d_nodes, dtype=complex) / scale
    w2v = np.asarray(v_weights, dtype=float) ** 2
    w2d = np.asarray(d_weights, dtype=float) ** 2
    # Fortran order: column slices stay contiguous, so the BLAS
    # conjugate-transpose products below run without temporary copies
    V = np.empty((mv, cap + 1), dtype=complex, order="F")
    A = np.empty((md, cap + 1), dtype=complex, order="F")
    D = np.empty((md, cap + 1), dtype=complex, order="F")
    hess = np.zeros((cap + 1, cap), dtype=float)
    coef = np.zeros(cap + 1)
    rhsw_v = w2v * np.asarray(v_rhs, dtype=complex)
    rhsw_d = w2d * np.asarray(d_rhs, dtype=complex)
    h0 = 1.0 / math.sqrt(float(w2v.sum()))
    V[:, 0] = h0
    A[:, 0] = h0
    D[:, 0] = 0.0
    coef[0] = float(np.real(np.vdot(V[:, 0], rhsw_v)))
    fit_v = coef[0] * V[:, 0]
    fit_d = np.zeros(md, dtype=complex)
    marks = set(checkpoints)

    def sups(fv, fd):
        sv = float(np.abs(fv - v_rhs)[v_hard].max()) if v_hard.any() else 0.0
        sd = float(np.abs(fd - d_rhs)[d_hard].max()) if md and d_hard.any() else 0.0
        return sv, sd

    best = (0, coef[:1].copy()) + sups(fit_v, fit_d)
    k_done = 0
    for k in range(cap):
        vV = zv * V[:, k]
        vA = zd * A[:, k]
        vD = A[:, k] / scale + zd * D[:, k]
        for _ in range(2):  # classical Gram-Schmidt, twice
            h = np.real(_blas_gemv_h(V[:, : k + 1], w2v * vV))
            if md:
                h += np.real(_blas_gemv_h(D[:, : k + 1], w2d * vD))
            vV -= V[:, : k + 1] @ h
            vA -= A[:, : k + 1] @ h
            vD -= D[:, : k + 1] @ h
            hess[: k + 1, k] += h
        nv = math.sqrt(float(np.sum(w2v * (vV.real ** 2 + vV.imag ** 2))
                             + np.sum(w2d * (vD.real ** 2 + vD.imag ** 2))))
        if nv < 1e-150:
            break
        hess[k + 1, k] = nv
        V[:, k + 1] = vV / nv
        A[:, k + 1] = vA / nv
        D[:, k + 1] = vD / nv
        coef[k + 1] = float(np.real(np.vdot(V[:, k + 1], rhsw_v)))
        if md:
            coef[k + 1] += float(np.real(np.vdot(D[:, k + 1], rhsw_d)))
        fit_v = fit_v + coef[k + 1] * V[:, k + 1]
        fit_d = fit_d + coef[k + 1] * D[:, k + 1]
        k_done = k + 1
        if (k + 1) % CHECK_EVERY == 0 or (k + 1) in marks or k + 1 == cap:
            sv, sd = sups(fit_v, fit_d)
            if sv + sd < best[2] + best[3]:
                best = (k + 1, coef[: k + 2].copy(), sv, sd)
            if sv < eps and (eps_deriv is None or sd < eps_deriv):
                break
    deg, cbest, sv, sd = best
    # prefer the last grown state when it met the gates
    sv_last, sd_last = sups(fit_v, fit_d)
    if sv_last < eps and (eps_deriv is None or sd_last < eps_deriv):
        deg, cbest, sv, sd = k_done, coef[: k_done + 1].copy(), sv_last, sd_last
    poly = OrthoPoly(hess[: deg + 1, : deg], h0, cbest, scale)
    return _GrownFit(poly, deg, sv, sd,
                     V[:, : deg + 1], D[:, : deg + 1],
                     np.asarray(v_rhs, dtype=complex),
                     np.asarray(d_rhs, dtype=complex),
                     np.asarray(v_hard, dtype=bool),
                     np.asarray(d_hard, dtype=bool))


def _pin_exact(p: OrthoPoly, pins: ConstraintSet, symmetric: bool):
    """Minimum-norm coefficient correction meeting the pins exactly."""
    if len(pins) == 0:
        return p, 0.0
    pts = np.array([complex(c.point) for c in pins])
    vals, ders = p.basis_at(pts.astype(complex), deriv=True)
    rows = np.array([vals[i] if c.kind == "value" else ders[i]
                     for i, c in enumerate(pins)])
    rhs = np.array([complex(c.target) for c in pins]) \
        - rows @ p.coeffs.astype(complex)
    delta = _min_norm(rows, rhs, symmetric)
    corrected = p.with_coeffs(p.coeffs + (delta.real if symmetric else delta))
    return corrected, float(np.linalg.norm(delta))


# --------------------------------------------------------------------------
# simultaneous approximation + exact pins
# --------------------------------------------------------------------------


@dataclass
class FitReport:
    degree: int
    sup_q_value: float      # |p - f| over all Q samples
    sup_k_deriv: float      # |p' - f'| over K samples
    constraint_resid: float
    correction_sup: float
    sup_pre: float = 0.0    # |p - f| over pre-control rows (not gated)

    def within(self, eps: float) -> bool:
        return self.sup_q_value < eps and self.sup_k_deriv < eps


def _as_cfun(obj):
    """Normalize function data to a (value, derivative) callable."""
    if hasattr(obj, "eval_with_deriv"):
        return obj.eval_with_deriv
    if isinstance(obj, tuple):
        f, fp = obj
        return lambda z: (f(z), fp(z))
    raise TypeError("expected RealPoly-like or (f, f') tuple")


class PieceMap(dict):
    """Per-piece function data: piece -> RealPoly/OrthoPoly/(f, f') pair."""


def _eval_piece(obj, pts: np.ndarray):
    """(values, derivatives) of the function data over a point array."""
    if hasattr(obj, "eval_many"):
        return obj.eval_many(pts)
    fk = _as_cfun(obj)
    pairs = [fk(z) for z in pts]
    return (np.array([v for v, _ in pairs], dtype=complex),
            np.array([d for _, d in pairs], dtype=complex))


def _piece_extent(piece) -> float:
    if isinstance(piece, Disk):
        return 2.0 * piece.radius
    return piece.b - piece.a


def _piece_samples(piece, cap: int, scale: float, base: int) -> int:
    # enough nodes that a degree-cap polynomial cannot alias on the piece;
    # on a circle of radius r well inside the scale disk the high basis
    # modes decay like (r/scale)^k, so the node count shrinks with r
    if isinstance(piece, Disk):
        frac = min(1.0, 0.15 + 1.1 * (abs(piece.center) + piece.radius) / scale)
    else:
        frac = min(1.0, 0.2 + _piece_extent(piece) / scale)
    return max(base, int(SAMPLE_FACTOR * cap * frac) + 64)


def _eval_values(data, pts: np.ndarray) -> np.ndarray:
    """Values of possibly value-only function data over a point array."""
    if hasattr(data, "eval_many"):
        return data.eval_many(pts)[0]
    return np.array([complex(data(z)) for z in pts])


def ke_approx(fK, fE, Q: CompactSpec, pins: ConstraintSet,
              eps: float, degrees: Sequence[int] = DEGREE_LADDER,
              m: int = PIECE_SAMPLES, *, soft: Sequence = (),
              soft_weight: float = SOFT_WEIGHT,
              eps_deriv="same", pre: Sequence = (),
              sampler: Optional[Callable] = None,
              deriv_stride: int = 2, scale: Optional[float] = None):
    """Polynomial p with |p−f| small on Q, |p′−f′| small on K, pins exact.

    One joint least-squares system controls both residual families:
    value rows on every Q sample and derivative rows on the K samples,
    solved by projection onto a basis orthonormalized on those very
    functionals (grown incrementally, so escalation stops at the first
    degree meeting the gates).  The pins are enforced afterwards by a
    minimum-norm coefficient correction in the same basis.

    fK: function data for K pieces (value+derivative) — a RealPoly-like,
    an (f, f') pair, or a PieceMap assigning data per piece; fE likewise
    for E pieces (values only).

    pre: extra (piece, value+derivative data) rows fitted at full weight
    but not gated — pre-control of regions whose own gates come later.
    soft: extra (piece, value-callable) advisory data fitted at weight
    soft_weight; it biases the fit without entering the residual gates.
    sampler: optional piece -> node count override; scale: optional
    basis scale override (pre/soft pieces may lie beyond Q's radius).
    eps_deriv: derivative gate — "same" uses eps, None disables it.

    Returns (p, FitReport) for the first degree meeting the gates, or
    the best attempt (caller decides whether to gate).
    """
    if not Q.symmetric:
        raise ValueError("ke_approx requires a conjugation-closed CompactSpec")
    eps_d = eps if eps_deriv == "same" else eps_deriv
    cap = max(degrees)
    if scale is None:
        scale = Q.radius()

    def n_samples(piece):
        if sampler is not None:
            return sampler(piece)
        return _piece_samples(piece, cap, scale, m)

    v_nodes, v_w, v_rhs, v_hard = [], [], [], []
    d_nodes, d_w, d_rhs, d_hard = [], [], [], []
    n_pre_v = 0

    def add_cpiece(piece, data, hard):
        pts = np.asarray(_sample_piece(piece, n_samples(piece)), dtype=complex)
        # fold before evaluating: mirrored halves carry no information
        pts_f, mult = _fold_conjugate(pts)
        vals_f, ders_f = _eval_piece(data, pts_f)
        flag = np.full(len(pts_f), hard, dtype=bool)
        v_nodes.append(pts_f); v_w.append(mult)
        v_rhs.append(vals_f); v_hard.append(flag)
        # derivative rows at reduced density: they gate a smoother residual
        s = deriv_stride
        d_nodes.append(pts_f[::s]); d_w.append(mult[::s])
        d_rhs.append(ders_f[::s]); d_hard.append(flag[::s])
        return len(pts_f)

    for piece in Q.k_pieces:
        add_cpiece(piece, fK[piece] if isinstance(fK, PieceMap) else fK, True)
    if Q.e_pieces and fE is None:
        raise ValueError("E pieces present but no fE supplied")
    for piece in Q.e_pieces:
        pts = np.asarray(_sample_piece(piece, n_samples(piece)), dtype=complex)
        pts_f, mult = _fold_conjugate(pts)
        if not len(pts_f):
            continue  # mirrored piece: its data is carried by the partner
        data = fE[piece] if isinstance(fE, PieceMap) else fE
        vals_f = _eval_values(data, pts_f)
        v_nodes.append(pts_f); v_w.append(mult)
        v_rhs.append(vals_f); v_hard.append(np.ones(len(pts_f), dtype=bool))
    for piece, data in pre:
        n_pre_v += add_cpiece(piece, data, False)
    for piece, data in soft:
        pts = np.asarray(_sample_piece(piece, n_samples(piece)), dtype=complex)
        pts_f, mult = _fold_conjugate(pts)
        if not len(pts_f):
            continue
        vals_f = _eval_values(data, pts_f)
        v_nodes.append(pts_f); v_w.append(soft_weight * mult)
        v_rhs.append(vals_f); v_hard.append(np.zeros(len(pts_f), dtype=bool))

    # pre rows sit between the E rows and the soft rows in the stack
    n_gated = sum(len(a) for a, h in zip(v_nodes, v_hard) if h.any())
    grown = _grow_fit(
        np.concatenate(v_nodes), np.concatenate(v_w),
        np.concatenate(v_rhs), np.concatenate(v_hard),
        np.concatenate(d_nodes) if d_nodes else np.zeros(0, dtype=complex),
        np.concatenate(d_w) if d_nodes else np.zeros(0),
        np.concatenate(d_rhs) if d_nodes else np.zeros(0, dtype=complex),
        np.concatenate(d_hard) if d_nodes else np.zeros(0, dtype=bool),
        scale, eps, eps_d, cap, checkpoints=degrees)
    p, corr_norm = _pin_exact(grown.poly, pins, True)
    sup_v, sup_d = grown.residuals_for(p.coeffs)
    sup_pre = 0.0
    if n_pre_v:
        rv = np.abs(grown.v_basis @ p.coeffs.astype(complex) - grown.v_rhs)
        sup_pre = float(rv[n_gated:n_gated + n_pre_v].max())
    cres = max((abs(_apply_functional(p, cn) - complex(cn.target))
                for cn in pins), default=0.0)
    return p, FitReport(grown.degree, sup_v, sup_d, cres, corr_norm, sup_pre)


def hoischen_window(f, window: Interval, eps_samples,
                    xpins: Sequence[float] = (),
                    degrees: Sequence[int] = DEGREE_LADDER,
                    m: int = WINDOW_SAMPLES):
    """Real-coefficient polynomial g with |g−f| and |g′−f′| < ε pointwise
    on the window grid and exact value+derivative pins at xpins.

    eps_samples: array aligned with window.grid(m), or a callable.
    """
    fk = _as_cfun(f)
    grid = np.array(window.grid(m))
    if callable(eps_samples):
        eps = np.array([float(eps_samples(x)) for x in grid])
    else:
        eps = np.asarray(eps_samples, dtype=float)
        if eps.shape != grid.shape:
            raise ValueError("eps sample array must match the window grid")
    if np.any(eps <= 0):
        raise ValueError("eps must be positive on the window")
    pins = ConstraintSet(tuple(
        Constraint(float(x), kind, complex(val))
        for x in xpins
        for kind, val in zip(("value", "derivative"), fk(float(x)))))
    q = CompactSpec(k_pieces=(window,), e_pieces=(), symmetric=True)
    vals, ders = _eval_piece(f, grid.astype(complex))
    gate = float(np.min(eps)) / 2
    for _ in range(4):  # tighten the fit-sample gate if the grid check trips
        p, rep = ke_approx(f, None, q, pins, eps=gate, degrees=degrees, m=m)
        pv, pd = p.eval_many(grid)
        rv = np.abs(pv - vals)
        rd = np.abs(pd - ders)
        if np.all(rv < eps) and np.all(rd < eps):
            return p, FitReport(rep.degree, float(rv.max()), float(rd.max()),
                                rep.constraint_resid, rep.correction_sup)
        if rep.sup_q_value >= gate or rep.sup_k_deriv >= gate:
            break  # the fit itself is stuck; tightening cannot help
        gate /= 4.0
    raise ApproxError(
        f"window fit missed pointwise eps (min {eps.min():.3e}) at degree cap")


# --------------------------------------------------------------------------
# chaplet patch recursion
# --------------------------------------------------------------------------


@dataclass
class StageReport:
    stage: int
    degree: int
    sup_q: float
    sup_k_deriv: float
    eps_target: float
    constraint_resid: float

    @property
    def passed(self) -> bool:
        # the stage gate is on values (|p_n − f_n| on Q_n) and exact pins;
        # the derivative residual is carried for the callers' own checks
        return (self.sup_q < self.eps_target
                and self.constraint_resid <= CONSTRAINT_TOL)


@dataclass
class PatchResult:
    phi: RealPoly
    stages: list          # p_1 .. p_K
    reports: list         # StageReport per stage
    window_report: FitReport
    telescoping: list     # sup over inner-disk samples of |p_K - p_m|

    @property
    def g(self) -> RealPoly:
        return self.stages[-1]


def _reflect_disc(fn):
    def reflected(z, _g=fn):
        # lower disc carries the conjugate reflection of the target
        if z.imag >= 0:
            return complex(_g(z))
        return complex(_g(z.conjugate())).conjugate()
    return reflected


class _CachedEval:
    """Evaluation cache around a polynomial part.

    The patch recursion re-reads earlier stages on the same sample sets
    at every later stage (the shared far segments and advisory discs);
    keying on the exact point array makes repeat reads free.
    """

    __slots__ = ("part", "_cache")

    def __init__(self, part):
        self.part = part
        self._cache = {}

    @property
    def degree(self) -> int:
        return int(getattr(self.part, "degree", 0))

    def eval_many(self, pts):
        pts = np.asarray(pts, dtype=complex)
        key = pts.tobytes()
        hit = self._cache.get(key)
        if hit is None:
            hit = _eval_piece(self.part, pts)
            self._cache[key] = hit
        return hit

    def eval_with_deriv(self, z):
        v, d = _eval_piece(self.part, np.array([complex(z)]))
        return _realify(complex(v[0])), _realify(complex(d[0]))

    def __call__(self, z):
        arr = np.atleast_1d(np.asarray(z, dtype=complex))
        out = _eval_piece(self.part, arr)[0]
        return out if np.ndim(z) else _realify(complex(out[0]))


class _NegSum:
    """-(q_1 + ... + q_n) as correction-stage function data.

    A stage fit targets f - p_{n-1}; on pieces whose data is the window
    fit phi itself this difference is exactly minus the sum of the
    earlier corrections, so phi never needs re-evaluating.
    """

    __slots__ = ("parts",)

    def __init__(self, parts):
        self.parts = tuple(parts)

    def eval_many(self, pts):
        pts = np.asarray(pts, dtype=complex)
        v = np.zeros(len(pts), dtype=complex)
        d = np.zeros(len(pts), dtype=complex)
        for q in self.parts:
            qv, qd = q.eval_many(pts)
            v -= qv
            d -= qd
        return v, d

    def eval_with_deriv(self, z):
        v, d = self.eval_many(np.array([complex(z)]))
        return complex(v[0]), complex(d[0])


class _DiscResidual:
    """target - p_{n-1} on a disc, with vectorized evaluation."""

    __slots__ = ("fn", "carrier")

    def __init__(self, fn, carrier):
        self.fn = fn
        self.carrier = carrier

    def eval_many(self, pts):
        pts = np.asarray(pts, dtype=complex)
        tv = np.array([complex(self.fn(z)) for z in pts])
        cv, _ = self.carrier.eval_many(pts)
        return tv - cv, np.zeros(len(pts), dtype=complex)

    def __call__(self, z):
        return complex(self.eval_many(np.array([complex(z)]))[0][0])


# Empirical per-degree convergence rate of the equilibrium-weighted fits
# used by the patch recursion.  A stage's residual decays like
# exp(-rate * (degree - CAP_OFFSET)) with rate set by the width of the
# transition channel between the stage disc and the hard zero set,
# relative to the full window: rate = RATE_COEF * (gap / R)^RATE_POW.
# Calibrated against measured stage fits at gap/R = 1/256 (rate 3.9e-4),
# 1/8 (rate 3.1e-3) and the stage-local regime 1/8 (rate 2.6e-3).
RATE_COEF = 0.0095
RATE_POW = 0.58
CAP_OFFSET = 300
CAP_MARGIN = 1.15
CAP_LIMIT = 9000
CAP_FLOOR = 400


def _stage_rate(gap: float, big_r: float) -> float:
    return RATE_COEF * (max(gap, 1e-9) / big_r) ** RATE_POW


def _stage_cap(m_data: float, eps: float, rate: float) -> int:
    folds = math.log(max(m_data / eps, 1.0))
    cap = CAP_OFFSET + CAP_MARGIN * folds / rate
    return int(min(max(cap, CAP_FLOOR), CAP_LIMIT))


def _equilibrium_sampler(cap: int, big_r: float, base: int = 192):
    """Node counts matching the equilibrium measure of the window union.

    Fits in the patch recursion spread their degrees over the whole
    window; node counts per piece follow the arcsine density of
    [-R, R] (segments and the origin circle) or the local angular share
    (off-axis discs) so no piece is over- or under-resolved.
    """

    def count(piece) -> int:
        if isinstance(piece, Disk):
            c, r = abs(piece.center), piece.radius
            if c < 1e-12:
                share = 2.0 * math.asin(min(r / big_r, 1.0)) / math.pi
                n = 1.2 * cap * share
            else:
                h = math.sqrt(max(1.0 - (c / big_r) ** 2, 0.02))
                n = 0.9 * cap * (r / big_r) / h
        else:
            a, b = sorted((abs(piece.a), abs(piece.b)))
            share = (math.asin(min(b / big_r, 1.0))
                     - math.asin(min(a / big_r, 1.0))) / math.pi
            n = 1.2 * cap * share
        return int(n) + base
    return count


def re_patch(chaplet: SpecialChaplet, fE, fR, xpins: Sequence[float],
             schedule: PatchSchedule,
             degrees: Sequence[int] = DEGREE_LADDER,
             m: int = PIECE_SAMPLES,
             stage_caps: Optional[Sequence[int]] = None,
             soft_weight: float = 0.1,
             spill_dir: Optional[str] = None) -> PatchResult:
    """Recursive patching of real-window data and chaplet disc targets.

    fE: list of per-disc callables, one per upper disc E_n^+; data on
    the mirrored disc is the conjugate reflection z -> conj(fE(conj z)).
    fR: (f, f') on the real window [-r_{K+1}, r_{K+1}].

    Each stage is fit in correction form: stage n produces q_n with
    p_n = p_{n-1} + q_n, so the fit data are q_n ~ 0 on the inner disc
    boundary (p_n reproduces p_{n-1} there, and by the maximum principle
    on everything inside), q_n ~ phi - p_{n-1} on its flanking segments,
    and q_n ~ target - p_{n-1} on E_n, each within eps_{n+1}; xpins and
    +-r_{n+1} are pinned (value and derivative) to the window fit.

    Two row families beyond the gated pieces keep every later read of
    p_n under control.  The segments beyond r_{n+1} enter at full weight
    (data phi - p_{n-1}): they pre-control the regions whose gates come
    at later stages, and — decisively — they pin the fit basis to the
    equilibrium of the whole window, without which the stage polynomial
    explodes off its own pieces and sinks the recursion.  The discs
    E_j, j > n, enter as zero-data advisory rows at weight soft_weight:
    pure moderation where later stages must read p_n against their own
    targets.  A stage has no rows anywhere else; between the controlled
    sets the polynomial is large, and nothing ever reads it there.

    Degree caps per stage come from the measured convergence-rate law
    (see RATE_COEF) applied to the measured data magnitude, so cheap
    stages stop early and hard stages get the depth they need;
    stage_caps overrides.  spill_dir, if given, moves each finished
    stage's recurrence matrix to a disk map to bound resident memory.
    """
    K = chaplet.count
    if len(schedule.epsilons) < K + 1:
        raise ValueError("schedule must provide eps_1..eps_{K+1}")
    big_r = chaplet.radii[-1]
    window = Interval(-big_r, big_r)

    # the paper-level recursion starts from a C1-accurate window fit
    eps_half = [schedule.epsilon(1) / 2.0] * WINDOW_SAMPLES
    phi, window_rep = hoischen_window(fR, window, np.array(eps_half),
                                      xpins, degrees=degrees)

    disc_fns = [_reflect_disc(fE[n - 1] if fE is not None else (lambda z: 0.0))
                for n in range(1, K + 1)]

    def stage_gap(n: int) -> float:
        d = chaplet.discs[n - 1]
        return (d.center.imag - d.radius) - chaplet.radii[n - 1]

    # one sampler for every stage: shared node sets make the cached
    # evaluations of earlier stages hit at every later stage
    if stage_caps is None:
        cap_hint = CAP_FLOOR
        for n in range(1, K + 1):
            border = np.asarray(chaplet.discs[n - 1].boundary(8), dtype=complex)
            jump = max(abs(complex(disc_fns[n - 1](z)) - complex(phi(z)))
                       for z in border)
            # + allowance for junk accumulated by earlier stages there
            cap_hint = max(cap_hint, _stage_cap(
                jump + 10.0, 0.8 * schedule.epsilon(n + 1),
                _stage_rate(stage_gap(n), big_r)))
        sampler_cap = cap_hint
    else:
        sampler_cap = int(max(stage_caps))
    sampler = _equilibrium_sampler(sampler_cap, big_r)

    qs: list = []                       # cached correction polynomials
    carrier = PolySum((phi,))
    stages, reports = [], []
    zero = RealPoly((0.0,))
    for n in range(1, K + 1):
        r_out = chaplet.radii[n]
        eps_n = schedule.epsilon(n + 1)
        disk_piece, seg_hi, seg_lo = chaplet.stage_k(n)
        e_hi, e_lo = chaplet.stage_e(n)
        q_spec = CompactSpec(k_pieces=(disk_piece, seg_hi, seg_lo),
                             e_pieces=(e_hi, e_lo), symmetric=True)
        seg_data = _NegSum(qs) if qs else zero
        fk = PieceMap({disk_piece: zero, seg_hi: seg_data, seg_lo: seg_data})
        e_data = _DiscResidual(disc_fns[n - 1], carrier)
        fe = PieceMap({e_hi: e_data, e_lo: e_data})
        pre = [(piece, seg_data)
               for j in range(n + 1, K + 1)
               for piece in (Interval(chaplet.radii[j - 1], chaplet.radii[j]),
                             Interval(-chaplet.radii[j], -chaplet.radii[j - 1]))]
        soft = [(chaplet.discs[j - 1], (lambda z: 0.0))
                for j in range(n + 1, K + 1)]
        pin_pts = [x for x in xpins if abs(x) <= r_out] + [r_out, -r_out]
        pins = ConstraintSet(tuple(
            Constraint(float(x), kind, complex(pv) - complex(cv))
            for x in dict.fromkeys(pin_pts)
            for (kind, pv), cv in zip(
                zip(("value", "derivative"), phi.eval_with_deriv(float(x))),
                carrier.eval_with_deriv(float(x)))))
        if stage_caps is not None:
            cap = int(stage_caps[n - 1])
        else:
            m_data = max(float(np.max(np.abs(
                e_data.eval_many(e_hi.boundary(16))[0]))), eps_n)
            cap = _stage_cap(m_data, 0.8 * eps_n,
                             _stage_rate(stage_gap(n), big_r))
        stage_degrees = tuple(d for d in degrees if d <= cap) + (cap,)
        q_n, rep = ke_approx(fk, fe, q_spec, pins, eps_n,
                             degrees=stage_degrees, m=m, soft=soft,
                             soft_weight=soft_weight, eps_deriv=None,
                             pre=pre, sampler=sampler, deriv_stride=4,
                             scale=big_r)
        report = StageReport(n, rep.degree, rep.sup_q_value, rep.sup_k_deriv,
                             eps_n, rep.constraint_resid)
        reports.append(report)
        if not report.passed:
            raise ApproxError(
                f"stage {n}: residual {rep.sup_q_value:.3e} missed eps "
                f"{eps_n:.3e} at degree cap {cap}")
        if spill_dir is not None and q_n.degree > 1024:
            q_n.spill(f"{spill_dir}/stage_{len(qs) + 1}_hess")
        qs.append(_CachedEval(q_n))
        carrier = carrier.plus(qs[-1])
        stages.append(carrier)

    # telescoping on the inner disc boundary: p_K - p_m = sum_{j>m} q_j,
    # summed directly so no catastrophic cancellation enters the measure
    inner = np.array(Disk(0.0, chaplet.radii[0]).boundary(m), dtype=complex)
    q_vals = [q.eval_many(inner)[0] for q in qs]
    tele = []
    for start in range(K):
        acc = np.zeros(len(inner), dtype=complex)
        for qv in q_vals[start:]:
            acc += qv
        tele.append(float(np.max(np.abs(acc))))
    return PatchResult(phi, stages, reports, window_rep, tele)
