"""Commutative polynomials in k variables, truncated at a total degree.

Coefficients may be Fractions (exact) or floats/complex; all operations keep the type.
"""
from __future__ import annotations

from fractions import Fraction


class TruncPoly:
    __slots__ = ("terms", "D", "k")

    def __init__(self, terms, D: int, k: int):
        self.terms = {tuple(e): c for e, c in dict(terms).items() if c != 0 and sum(e) <= D}
        self.D = D
        self.k = k

    @classmethod
    def zero(cls, D, k):
        return cls({}, D, k)

    @classmethod
    def const(cls, c, D, k):
        return cls({(0,) * k: c}, D, k)

    @classmethod
    def monomial(cls, e, c, D, k):
        return cls({tuple(e): c}, D, k)

    def __add__(self, o):
        t = dict(self.terms)
        for e, c in o.terms.items():
            t[e] = t.get(e, 0) + c
        return TruncPoly(t, self.D, self.k)

    def __sub__(self, o):
        return self + o.scale(-1)

    def scale(self, c):
        return TruncPoly({e: v * c for e, v in self.terms.items()}, self.D, self.k)

    def __mul__(self, o):
        t = {}
        D = self.D
        for e1, c1 in self.terms.items():
            d1 = sum(e1)
            for e2, c2 in o.terms.items():
                if d1 + sum(e2) > D:
                    continue
                e = tuple(x + y for x, y in zip(e1, e2))
                t[e] = t.get(e, 0) + c1 * c2
        return TruncPoly(t, D, self.k)

    def constant_term(self):
        return self.terms.get((0,) * self.k, 0)

    def _series(self, coeffs):
        """sum_j coeffs[j] * self^j for j >= 1; self must have no constant term."""
        if self.constant_term() != 0:
            raise ValueError("series needs a polynomial without constant term")
        result = TruncPoly.zero(self.D, self.k)
        power = TruncPoly.const(1, self.D, self.k)
        for j in range(1, self.D + 1):
            power = power * self
            if not power.terms:
                break
            result = result + power.scale(coeffs(j))
        return result

    def exp(self):
        fact = [1]
        for j in range(1, self.D + 1):
            fact.append(fact[-1] * j)
        return TruncPoly.const(1, self.D, self.k) + self._series(lambda j: Fraction(1, fact[j]))

    def neg_log1m(self):
        """-log(1 - self) = sum_j self^j / j."""
        return self._series(lambda j: Fraction(1, j))

    def log(self):
        """log of a polynomial with constant term 1."""
        if self.constant_term() != 1:
            raise ValueError("log needs constant term 1")
        u = self - TruncPoly.const(1, self.D, self.k)
        return u._series(lambda j: Fraction((-1) ** (j + 1), j))

    def xd(self, j):
        """x_j d/dx_j."""
        return TruncPoly({e: c * e[j] for e, c in self.terms.items() if e[j]}, self.D, self.k)

    def coefficient(self, e):
        return self.terms.get(tuple(e), 0)

    def min_coefficient(self):
        return min((c for c in self.terms.values()), default=0)

    def evaluate(self, point) -> complex:
        total = 0
        for e, c in self.terms.items():
            v = c
            for x, p in zip(point, e):
                v *= x ** p
            total += v
        return total

    def __eq__(self, other):
        return isinstance(other, TruncPoly) and self.terms == other.terms and self.D == other.D

    def __repr__(self):
        return f"TruncPoly({self.terms!r}, D={self.D})"
