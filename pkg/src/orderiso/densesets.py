"""Countable dense subsets of the reals as explicit enumerations.

Each enumeration yields exact rational values (as Fraction) that are
converted to binary64 only at the consumption boundary.  Consumed
elements are tracked both by index and by exact value, so that elements
located by value (whose index may be astronomically large) still block
re-selection without ever materialising the index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

DEFAULT_SCAN_CAP = 200_000

# CW indices are only materialised while their bit length stays sane;
# a float like 1e-300 sits at tree depth ~2^1000 and has no usable index.
_CW_INDEX_BIT_CAP = 256


class ExhaustedEnumeration(LookupError):
    """An explicit list ran out of unused elements."""


class ScanCapExceeded(LookupError):
    """No enumeration element found inside the interval within the scan cap."""


class DegenerateInterval(ValueError):
    pass


@dataclass(frozen=True)
class ElementRef:
    """One located element: float value, exact form, and order key.

    index is None when the element was located by value and its
    enumeration index is too large to materialise.
    order_key is monotone in the true value within its enumeration.
    """

    index: Optional[int]
    value: float
    exact: object  # Fraction for rational kinds, float otherwise
    order_key: object


# --------------------------------------------------------------------------
# Calkin-Wilf machinery (exact, Fraction based)
# --------------------------------------------------------------------------


def calkin_wilf(k: int) -> Fraction:
    """k-th element (k >= 1) of the Calkin-Wilf sequence 1, 1/2, 2, 1/3, ..."""
    if k < 1:
        raise ValueError("k >= 1 required")
    a, b = 1, 1
    for bit in bin(k)[3:]:  # walk the tree along k's binary expansion
        if bit == "0":
            b = a + b
        else:
            a = a + b
    return Fraction(a, b)


def calkin_wilf_index(q: Fraction) -> Optional[int]:
    """Position of a positive rational in the Calkin-Wilf sequence.

    Returns None when the index would exceed the materialisation cap
    (its bit length equals the sum of the continued-fraction terms).
    """
    if q <= 0:
        raise ValueError("positive rational required")
    # the index bit length equals the sum of the continued-fraction terms
    a, b = q.numerator, q.denominator
    depth = 0
    while b:
        depth += a // b
        a, b = b, a % b
    if depth > _CW_INDEX_BIT_CAP:
        return None
    bits = []
    a, b = q.numerator, q.denominator
    while (a, b) != (1, 1):
        if a > b:
            bits.append("1")
            a -= b
        else:
            bits.append("0")
            b -= a
    return int("1" + "".join(reversed(bits)), 2)


# --------------------------------------------------------------------------
# dyadic breadth-first enumeration
#
# level 0: {0, 1, -1}; level L adds every reduced k/2^m with m <= L and
# |k/2^m| <= 2^L not listed before, ordered by |x| ascending, positive
# before negative.  Total count through level L is 2^(2L+1) + 1.
# --------------------------------------------------------------------------


def _dyadic_total(level: int) -> int:
    if level < 0:
        return 0
    return 2 ** (2 * level + 1) + 1


def _dyadic_valid_count(level: int, t: int) -> int:
    """Number of integers 1 <= s <= t such that s/2^level is new at this level:
    s odd, or s > 2^(2*level - 1)."""
    if t <= 0:
        return 0
    odd = (t + 1) // 2
    half = 2 ** (2 * level - 1)
    even_beyond = 0
    if t > half:
        even_beyond = t // 2 - half // 2
    return odd + even_beyond


def dyadic_nth(n: int) -> Fraction:
    if n < 1:
        raise ValueError("n >= 1 required")
    if n <= 3:
        return (Fraction(0), Fraction(1), Fraction(-1))[n - 1]
    level = 1
    while _dyadic_total(level) < n:
        level += 1
    idx = n - _dyadic_total(level - 1) - 1  # 0-based within the level
    pair, sign = divmod(idx, 2)
    # find smallest t with _dyadic_valid_count(level, t) == pair + 1
    lo, hi = 1, 2 ** (2 * level)
    while lo < hi:
        mid = (lo + hi) // 2
        if _dyadic_valid_count(level, mid) >= pair + 1:
            hi = mid
        else:
            lo = mid + 1
    q = Fraction(lo, 2 ** level)
    return q if sign == 0 else -q


def dyadic_index(x: Fraction) -> int:
    """Exact inverse of dyadic_nth (total over all dyadic rationals)."""
    if x.denominator & (x.denominator - 1):
        raise ValueError("not a dyadic rational")
    if x == 0:
        return 1
    if x == 1:
        return 2
    if x == -1:
        return 3
    m = x.denominator.bit_length() - 1
    ax = abs(x)
    lmin = 0
    while ax > 2 ** lmin:
        lmin += 1
    level = max(m, lmin, 1)
    t = int(ax * 2 ** level)
    before = _dyadic_valid_count(level, t - 1)
    return _dyadic_total(level - 1) + 2 * before + (1 if x > 0 else 2)


# --------------------------------------------------------------------------
# enumeration kinds
# --------------------------------------------------------------------------


def _simplest_rational_in(lo: Fraction, hi: Fraction) -> Fraction:
    """Rational with smallest continued-fraction depth in [lo, hi]."""
    if lo <= 0 <= hi:
        return Fraction(0)
    if hi < 0:
        return -_simplest_rational_in(-hi, -lo)
    # 0 < lo <= hi
    if lo.denominator == 1:
        return Fraction(lo)
    il = lo.numerator // lo.denominator
    if il + 1 <= hi:
        return Fraction(il + 1)
    frac_lo = lo - il
    frac_hi = hi - il
    return il + 1 / _simplest_rational_in(1 / frac_hi, 1 / frac_lo)


def _simplest_candidates(lo: Fraction, hi: Fraction, dyadic: bool):
    """Candidate members of [lo, hi], simplest first (a short stream)."""
    if dyadic:
        m = 0
        emitted = 0
        while emitted < 8 and m < 1200:
            step = Fraction(1, 2 ** m)
            k = -((-lo) // step)  # ceil(lo / step)
            while k * step <= hi:
                yield k * step
                emitted += 1
                if emitted >= 8:
                    return
                k += 1
            m += 1
    else:
        q = _simplest_rational_in(lo, hi)
        yield q
        # a few refinements toward the midpoint in case rounding rejects q
        mid = (lo + hi) / 2
        for w in (Fraction(1, 4), Fraction(1, 16), Fraction(1, 64)):
            sub_lo = mid - (hi - lo) * w
            sub_hi = mid + (hi - lo) * w
            yield _simplest_rational_in(sub_lo, sub_hi)


class _Kind:
    dense = True
    exact_rational = True

    def nth_exact(self, n: int) -> Fraction:
        raise NotImplementedError

    def value_index(self, x: Fraction) -> Optional[int]:
        """Index of an exact member, None if unmaterialisable;
        raises KeyError if x is not a member."""
        raise NotImplementedError


class _SignedCalkinWilf(_Kind):
    name = "signed-calkin-wilf"

    def nth_exact(self, n: int) -> Fraction:
        if n < 1:
            raise ValueError("n >= 1 required")
        if n == 1:
            return Fraction(0)
        k, sign = divmod(n, 2)
        q = calkin_wilf(k)
        return q if sign == 0 else -q

    def value_index(self, x: Fraction) -> Optional[int]:
        if x == 0:
            return 1
        k = calkin_wilf_index(abs(x))
        if k is None:
            return None
        return 2 * k if x > 0 else 2 * k + 1


class _Dyadic(_Kind):
    name = "dyadic"

    def nth_exact(self, n: int) -> Fraction:
        return dyadic_nth(n)

    def value_index(self, x: Fraction) -> Optional[int]:
        return dyadic_index(x)


class _ExplicitList(_Kind):
    name = "explicit-list"
    dense = False

    def __init__(self, values):
        self.values = [float(v) for v in values]
        self.exacts = [Fraction(v) for v in self.values]

    def nth_exact(self, n: int) -> Fraction:
        if n < 1 or n > len(self.exacts):
            raise ExhaustedEnumeration(f"explicit list has {len(self.exacts)} elements")
        return self.exacts[n - 1]

    def value_index(self, x: Fraction) -> Optional[int]:
        try:
            return self.exacts.index(x) + 1
        except ValueError:
            raise KeyError(x)


@dataclass
class Enumeration:
    """A countable dense real set as an indexed sequence with bookkeeping.

    kind: signed-calkin-wilf | dyadic | affine-image | explicit-list.
    Affine images wrap a base kind through x -> scale*x + shift (scale != 0);
    the order key of an affine element is the signed base rational, so
    order comparisons stay exact even for irrational shifts.
    """

    kind: str
    base: Optional[_Kind] = None
    scale: float = 1.0
    shift: float = 0.0
    used_indices: set = field(default_factory=set)
    used_keys: set = field(default_factory=set)

    # -- constructors -------------------------------------------------

    @staticmethod
    def signed_calkin_wilf() -> "Enumeration":
        return Enumeration("signed-calkin-wilf", _SignedCalkinWilf())

    @staticmethod
    def dyadic() -> "Enumeration":
        return Enumeration("dyadic", _Dyadic())

    @staticmethod
    def affine(base: str, scale: float, shift: float) -> "Enumeration":
        if scale == 0:
            raise ValueError("affine scale must be nonzero")
        inner = {"signed-calkin-wilf": _SignedCalkinWilf,
                 "dyadic": _Dyadic}[base]()
        return Enumeration("affine-image", inner, float(scale), float(shift))

    @staticmethod
    def explicit(values) -> "Enumeration":
        return Enumeration("explicit-list", _ExplicitList(values))

    @staticmethod
    def from_descriptor(d: dict) -> "Enumeration":
        kind = d["kind"]
        if kind == "affine-image":
            return Enumeration.affine(d["base"], d["scale"], d["shift"])
        if kind == "explicit-list":
            return Enumeration.explicit(d["values"])
        if kind == "signed-calkin-wilf":
            return Enumeration.signed_calkin_wilf()
        if kind == "dyadic":
            return Enumeration.dyadic()
        raise ValueError(f"unknown enumeration kind {kind!r}")

    def descriptor(self) -> dict:
        if self.kind == "affine-image":
            return {"kind": self.kind, "base": self.base.name,
                    "scale": self.scale, "shift": self.shift}
        if self.kind == "explicit-list":
            return {"kind": self.kind, "values": list(self.base.values)}
        return {"kind": self.kind}

    @property
    def dense(self) -> bool:
        return self.base.dense

    # -- element production -------------------------------------------

    def _make_ref(self, n: Optional[int], q: Fraction) -> ElementRef:
        if self.kind == "affine-image":
            # single rounding of the exact affine image, so the value map
            # q -> float is monotone and every float in range is attained
            exact = q * Fraction(self.scale) + Fraction(self.shift)
            key = q if self.scale > 0 else -q
            return ElementRef(n, float(exact), exact, key)
        return ElementRef(n, float(q), q, q)

    def nth(self, n: int) -> ElementRef:
        return self._make_ref(n, self.base.nth_exact(n))

    def first_unused(self) -> ElementRef:
        n = 1
        while True:
            ref = self.nth(n)  # raises ExhaustedEnumeration for spent lists
            if n not in self.used_indices and ref.order_key not in self.used_keys:
                return ref
            n += 1

    def mark_used(self, ref: ElementRef) -> None:
        if ref.order_key in self.used_keys:
            raise ValueError(f"element {ref.value} already consumed")
        if ref.index is not None:
            self.used_indices.add(ref.index)
        self.used_keys.add(ref.order_key)

    def is_used(self, ref: ElementRef) -> bool:
        return ref.order_key in self.used_keys

    def find_in_interval(self, a: float, b: float, exclude=frozenset(),
                         cap: int = DEFAULT_SCAN_CAP) -> ElementRef:
        """Smallest-index element with value strictly inside (a, b) and
        order key outside exclude."""
        if not (a < b):
            raise DegenerateInterval(f"({a}, {b})")
        for n in range(1, cap + 1):
            try:
                ref = self.nth(n)
            except ExhaustedEnumeration:
                break
            if a < ref.value < b and ref.order_key not in exclude:
                return ref
        raise ScanCapExceeded(
            f"no element of {self.kind} in ({a}, {b}) within {cap} indices")

    # -- exact membership by value -------------------------------------

    def locate_value(self, x: float) -> Optional[ElementRef]:
        """Exact-form membership: the element whose binary64 value is x,
        or None.  For rational kinds every finite float is a member; for
        affine images a float preimage of x under scale*b + shift is
        searched within a few ulps."""
        if not math.isfinite(x):
            return None
        if self.kind in ("signed-calkin-wilf", "dyadic"):
            q = Fraction(x)
            try:
                n = self.base.value_index(q)
            except KeyError:
                return None
            return self._make_ref(n, q)
        if self.kind == "explicit-list":
            try:
                n = self.base.value_index(Fraction(x))
            except KeyError:
                return None
            return self._make_ref(n, Fraction(x))
        # affine-image: x is a member iff some exact base rational q has
        # fl(q*scale + shift) == x.  The admissible q form an interval of
        # width ~ulp(x)/|scale|; pick the simplest base rational inside it
        # (deterministic, and with the smallest index the kind can offer).
        ulp = math.ulp(x) if x != 0 else math.ulp(0.0)
        S, H, X = Fraction(self.scale), Fraction(self.shift), Fraction(x)
        # strictly interior points of the rounding preimage always map back
        # to x; shaving the half-ulp avoids ties-to-even at the boundary
        half_ulp = Fraction(ulp) / 2 * (1 - Fraction(1, 2 ** 16))
        lo = (X - half_ulp - H) / S
        hi = (X + half_ulp - H) / S
        if lo > hi:
            lo, hi = hi, lo
        for q in _simplest_candidates(lo, hi, dyadic=isinstance(self.base, _Dyadic)):
            if float(q * S + H) == x:
                try:
                    n = self.base.value_index(q)
                except (KeyError, ValueError):
                    continue
                return ElementRef(n, x, q * S + H, q if self.scale > 0 else -q)
        return None

    def member_from_exact(self, v: Fraction) -> Optional[ElementRef]:
        """Element whose exact value is the rational v, or None."""
        if self.kind == "affine-image":
            q = (v - Fraction(self.shift)) / Fraction(self.scale)
        else:
            q = v
        try:
            n = self.base.value_index(q)
        except (KeyError, ValueError):
            return None
        return self._make_ref(n, q)
