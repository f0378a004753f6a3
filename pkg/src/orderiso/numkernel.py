"""Exact-formula evaluation of polynomials and Gaussian-product terms,
plus conservative sup-norm estimation on discs and on the real line.

Sup norms are sampled, never certified: every bound carries a
multiplicative safety margin and is flagged by its estimation method.
Values that would overflow binary64 are handled in log space.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

DEFAULT_SAFETY = 1.25
DISK_BOUNDARY_SAMPLES = 4096
REAL_WINDOW_SAMPLES = 8192


class NonFiniteSample(ValueError):
    """A sampled function value was nan or inf."""


class WindowTooSmall(ValueError):
    """The real-line window does not cover the analytic tail threshold."""


# --------------------------------------------------------------------------
# polynomials
# --------------------------------------------------------------------------


def _trim(coeffs: Sequence[float]) -> tuple:
    cs = list(coeffs)
    while len(cs) > 1 and cs[-1] == 0:
        cs.pop()
    return tuple(cs)


@dataclass(frozen=True)
class RealPoly:
    """Polynomial with real coefficients in the scaled basis (z/scale)^k.

    scale == 1 gives plain monomial coefficients.  The scale exists so
    that high-degree fits on windows of radius ~100 keep coefficients
    of magnitude O(1); the coefficients themselves stay real, so exact
    conjugate symmetry of evaluation is preserved.
    """

    coeffs: tuple
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _trim(self.coeffs))
        if not all(math.isfinite(c) for c in self.coeffs):
            raise ValueError("non-finite coefficient")
        if not (self.scale > 0):
            raise ValueError("scale must be positive")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, z):
        return poly_eval(self, z)

    def eval_with_deriv(self, z):
        """Horner value and derivative at z (complex or float)."""
        w = z / self.scale
        v = self.coeffs[-1]
        d = 0.0
        for c in self.coeffs[-2::-1]:
            d = d * w + v
            v = v * w + c
        return v, d / self.scale

    def deriv(self) -> "RealPoly":
        if self.degree == 0:
            return RealPoly((0.0,), self.scale)
        cs = [k * c / self.scale for k, c in enumerate(self.coeffs)][1:]
        return RealPoly(tuple(cs), self.scale)

    def antideriv(self, constant: float = 0.0) -> "RealPoly":
        cs = [constant] + [c * self.scale / (k + 1) for k, c in enumerate(self.coeffs)]
        return RealPoly(tuple(cs), self.scale)

    def rescale(self, new_scale: float) -> "RealPoly":
        if new_scale == self.scale:
            return self
        # coefficient at degree k transforms by (new/old)^k
        cs = []
        f = 1.0
        for c in self.coeffs:
            cs.append(c * f)
            f *= new_scale / self.scale
        return RealPoly(tuple(cs), new_scale)

    def __add__(self, other: "RealPoly") -> "RealPoly":
        o = other.rescale(self.scale)
        n = max(len(self.coeffs), len(o.coeffs))
        cs = [0.0] * n
        for i, c in enumerate(self.coeffs):
            cs[i] += c
        for i, c in enumerate(o.coeffs):
            cs[i] += c
        return RealPoly(tuple(cs), self.scale)


def poly_eval(p: RealPoly, z):
    """Horner-scheme evaluation; exact conjugate symmetry for real coeffs."""
    w = z / p.scale
    acc = p.coeffs[-1]
    for c in p.coeffs[-2::-1]:
        acc = acc * w + c
    return acc


def poly_symmetrize(coeffs: Sequence[complex], scale: float = 1.0) -> RealPoly:
    """(p(z) + conj(p(conj z)))/2 reduces to the real part of each coefficient."""
    return RealPoly(tuple(float(c.real) if isinstance(c, complex) else float(c) for c in coeffs), scale)


# --------------------------------------------------------------------------
# Gaussian product terms
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussTerm:
    """Term exp(-w(z)^2) * prod_k (w(z) - w(alpha_k)) with w = z or w = carrier(z)."""

    roots: tuple
    warp: str = "identity"  # "identity" | "phi"

    def __post_init__(self):
        if self.warp not in ("identity", "phi"):
            raise ValueError("warp must be 'identity' or 'phi'")
        object.__setattr__(self, "roots", tuple(float(r) for r in self.roots))


def term_eval(t: GaussTerm, z, carrier=None):
    """Value and z-derivative of a Gaussian product term.

    carrier must provide eval_with_deriv(z) when warp='phi'; the product
    factors then read (carrier(z) - carrier(alpha_k)).
    """
    if t.warp == "phi":
        if carrier is None:
            raise ValueError("warp='phi' requires a carrier")
        w, wprime = carrier.eval_with_deriv(z)
        images = [carrier(r) for r in t.roots]
    else:
        w, wprime = z, 1.0
        images = t.roots

    prod = 1.0 + 0.0j if isinstance(w, complex) else 1.0
    dprod = 0.0
    for wk in images:
        dprod = dprod * (w - wk) + prod
        prod = prod * (w - wk)
    g = cmath.exp(-w * w) if isinstance(w, complex) else math.exp(-w * w)
    value = g * prod
    deriv = wprime * g * (dprod - 2.0 * w * prod)
    return value, deriv


# --------------------------------------------------------------------------
# geometry
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Disk:
    center: complex
    radius: float

    def __post_init__(self):
        if not (self.radius > 0):
            raise ValueError("radius must be positive")

    def boundary(self, m: int):
        return [
            self.center + self.radius * cmath.exp(2j * math.pi * k / m) for k in range(m)
        ]


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a < self.b):
            raise ValueError("interval endpoints must satisfy a < b")

    def grid(self, m: int):
        if m < 2:
            raise ValueError("grid needs m >= 2")
        h = (self.b - self.a) / (m - 1)
        return [self.a + k * h for k in range(m)]

    def contains(self, x: float) -> bool:
        return self.a < x < self.b


@dataclass(frozen=True)
class Grid:
    """Finite sample layout inside a Disk or Interval."""

    domain: object
    m: int
    points: tuple = field(default=None)

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("grid needs m >= 2")
        if self.points is None:
            if isinstance(self.domain, Interval):
                pts = tuple(self.domain.grid(self.m))
            elif isinstance(self.domain, Disk):
                pts = tuple(self.domain.boundary(self.m))
            else:
                raise TypeError("domain must be Disk or Interval")
            object.__setattr__(self, "points", pts)


# --------------------------------------------------------------------------
# sup bounds
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SupBound:
    value: float
    method: str  # "boundary-sample" | "window-plus-tail"
    safety: float
    log_value: float = None  # natural log of value, usable when value overflows

    def __post_init__(self):
        if not (self.safety >= 1.0):
            raise ValueError("safety must be >= 1")
        if self.log_value is None:
            lv = math.log(self.value) if self.value > 0 else -math.inf
            object.__setattr__(self, "log_value", lv)


def sup_on_disk(f: Callable, d: Disk, m: int = DISK_BOUNDARY_SAMPLES,
                safety: float = DEFAULT_SAFETY) -> SupBound:
    """Sampled sup of |f| over a closed disk, boundary-only by the
    maximum-modulus principle (f must be holomorphic near the disk)."""
    if m < 64:
        raise ValueError("need at least 64 boundary samples")
    best = 0.0
    for z in d.boundary(m):
        v = abs(f(z))
        if not math.isfinite(v):
            raise NonFiniteSample(f"|f({z})| is not finite")
        if v > best:
            best = v
    return SupBound(best * safety, "boundary-sample", safety)


def sup_on_real(f: Callable, half_width: float, m: int = REAL_WINDOW_SAMPLES,
                degree: int = None, roots: Sequence[float] = (),
                safety: float = DEFAULT_SAFETY) -> SupBound:
    """Sampled sup of |f| over the real line for functions of the form
    (degree-d polynomial) * exp(-x^2).  The window must reach past the
    point where the envelope |x|^d exp(-x^2) is decreasing, so the
    ignored tail cannot contain the maximum."""
    if degree is not None:
        need = (max((abs(r) for r in roots), default=0.0)
                + math.sqrt(degree + 1))
        if half_width < need:
            raise WindowTooSmall(
                f"window half-width {half_width} below threshold {need}")
    best = 0.0
    h = 2.0 * half_width / (m - 1)
    for k in range(m):
        x = -half_width + k * h
        v = abs(f(x))
        if not math.isfinite(v):
            raise NonFiniteSample(f"|f({x})| is not finite")
        if v > best:
            best = v
    return SupBound(best * safety, "window-plus-tail", safety)


def growth_cap(roots: Sequence[float], m: int = DISK_BOUNDARY_SAMPLES,
               safety: float = DEFAULT_SAFETY) -> SupBound:
    """Conservative sup over all complex z of prod|z - a_k| * exp(-|z|).

    Uses the radial envelope prod(r + |a_k|) * exp(-r), which dominates
    the true function and is exact when every root is 0.  The envelope
    peaks before r = deg + max|a|, so sampling out to that point plus
    slack captures the maximum."""
    rs = [abs(r) for r in roots]
    if not rs:
        raise ValueError("growth_cap needs a nonempty root list")
    deg = len(rs)
    r_stop = deg + max(rs) + 16.0
    best_log = -math.inf
    h = r_stop / (m - 1)
    for k in range(m):
        r = k * h
        lg = sum(math.log(r + a) if (r + a) > 0 else -math.inf for a in rs) - r
        if lg > best_log:
            best_log = lg
    log_val = best_log + math.log(safety)
    value = math.exp(log_val) if log_val < 700 else math.inf
    return SupBound(value, "window-plus-tail", safety, log_value=log_val)


# --------------------------------------------------------------------------
# log-space sup helpers for the construction engines (avoid overflow of
# exp(n^2)-sized bounds at late steps)
# --------------------------------------------------------------------------


def log_sup_gauss_on_disk(roots: Sequence[float], radius: float,
                          m: int = DISK_BOUNDARY_SAMPLES,
                          safety: float = DEFAULT_SAFETY) -> float:
    """log sup over |z| = radius of |exp(-z^2) * prod(z - a_k)| (+ log safety)."""
    best = -math.inf
    for k in range(m):
        z = radius * cmath.exp(2j * math.pi * k / m)
        lg = -(z * z).real + sum(math.log(abs(z - a)) if z != a else -math.inf
                                 for a in roots)
        if lg > best:
            best = lg
    return best + math.log(safety)
