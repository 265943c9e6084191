"""Exact amplitudes of the form sum_k c_k * i^e_k * sqrt(n_k).

Scenario files write amplitudes such as ``1/sqrt(3)`` or ``sqrt(2/3)``.
Keeping them symbolic lets a scenario be re-emitted exactly instead of as
rounded decimals. Coefficients are ``Fraction``; ``n`` is kept square-free
whenever it is small enough to factor by trial division.
"""

from __future__ import annotations

import math
from decimal import Decimal, localcontext
from fractions import Fraction

_FACTOR_LIMIT = 10**12


def _split_square(m: int) -> tuple[int, int]:
    """Return (s, n) with m == s*s*n and n square-free (when m is small)."""
    if m > _FACTOR_LIMIT:
        r = math.isqrt(m)
        return (r, 1) if r * r == m else (1, m)
    s, n, p = 1, m, 2
    while p * p <= n:
        while n % (p * p) == 0:
            n //= p * p
            s *= p
        p += 1 if p == 2 else 2
    return s, n


def _sqrt_float(q: Fraction) -> float:
    # correctly rounded sqrt of a rational
    with localcontext() as ctx:
        ctx.prec = 60
        return float((Decimal(q.numerator) / Decimal(q.denominator)).sqrt())


class Surd:
    """Immutable linear combination of i^e * sqrt(n) terms with rational weights."""

    __slots__ = ("_terms",)

    def __init__(self, terms: dict[tuple[int, int], Fraction] | None = None):
        clean = {}
        for key, c in (terms or {}).items():
            if c != 0 and key[0] != 0:
                clean[key] = Fraction(c)
        self._terms = dict(sorted(clean.items()))

    @classmethod
    def rational(cls, q) -> Surd:
        return cls({(1, 0): Fraction(q)})

    @classmethod
    def sqrt(cls, q) -> Surd:
        q = Fraction(q)
        if q < 0:
            raise ValueError("sqrt of a negative rational")
        s, n = _split_square(q.numerator * q.denominator)
        return cls({(n, 0): Fraction(s, q.denominator)})

    @classmethod
    def inv_sqrt(cls, q) -> Surd:
        q = Fraction(q)
        if q == 0:
            raise ZeroDivisionError("1/sqrt(0)")
        return cls.sqrt(1 / q)

    @classmethod
    def imag_unit(cls) -> Surd:
        return cls({(1, 1): Fraction(1)})

    @property
    def terms(self) -> dict[tuple[int, int], Fraction]:
        return dict(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __add__(self, other):
        if not isinstance(other, Surd):
            return NotImplemented
        out = dict(self._terms)
        for key, c in other._terms.items():
            out[key] = out.get(key, Fraction(0)) + c
        return Surd(out)

    __radd__ = __add__

    def __neg__(self):
        return Surd({k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Surd):
            return NotImplemented
        out: dict[tuple[int, int], Fraction] = {}
        for (n1, e1), c1 in self._terms.items():
            for (n2, e2), c2 in other._terms.items():
                s, n = _split_square(n1 * n2)
                c = c1 * c2 * s
                e = e1 + e2
                if e == 2:
                    c, e = -c, 0
                out[(n, e)] = out.get((n, e), Fraction(0)) + c
        return Surd(out)

    __rmul__ = __mul__

    def conjugate(self) -> Surd:
        return Surd({(n, e): (-c if e else c) for (n, e), c in self._terms.items()})

    def __complex__(self):
        re = im = 0.0
        for (n, e), c in self._terms.items():
            mag = _sqrt_float(c * c * n)
            val = -mag if c < 0 else mag
            if e:
                im += val
            else:
                re += val
        return complex(re, im)

    def __eq__(self, other):
        return isinstance(other, Surd) and self._terms == other._terms

    def __hash__(self):
        return hash(tuple(self._terms.items()))

    def __repr__(self):
        return f"Surd({self.format() or '0'})"

    def format_terms(self) -> list[tuple[bool, str]]:
        """Return ``(negative, magnitude_text)`` per term, in canonical order.

        Magnitude text is valid amplitude syntax: ``1``, ``3``, ``1/sqrt(2)``,
        ``sqrt(2/3)``, optionally prefixed by ``i*``.
        """
        out = []
        for (n, e), c in self._terms.items():
            q = c * c * n
            a, b = q.numerator, q.denominator
            ra = math.isqrt(a)
            if b == 1 and ra * ra == a:
                mag = str(ra)
            elif a == 1:
                mag = f"1/sqrt({b})"
            elif b == 1:
                mag = f"sqrt({a})"
            else:
                mag = f"sqrt({a}/{b})"
            if e:
                mag = "i*" + mag
            out.append((c < 0, mag))
        return out

    def format(self) -> str:
        parts = []
        for k, (neg, mag) in enumerate(self.format_terms()):
            if k == 0:
                parts.append(("-" if neg else "") + mag)
            else:
                parts.append(("- " if neg else "+ ") + mag)
        return " ".join(parts)


ZERO = Surd()
ONE = Surd.rational(1)
