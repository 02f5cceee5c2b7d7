"""Truncated twisted torus algebra: series, products, brackets and algebra maps.

Elements are finite sums  c * s^m * x_a  keyed by (charge a, s-multidegree m),
truncated at total s-degree |m| <= N.  The product is x_a x_b = (-1)^<a,b> x_{a+b}
and the bracket [x_a, x_b] = (-1)^<a,b> <a,b> x_{a+b}.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Iterable

from .lattice import Charge, Lattice, neg, split_parts


class GaussianRational:
    """Exact complex number with rational real and imaginary parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @staticmethod
    def make(re, im):
        if im == 0:
            return Fraction(re)
        return GaussianRational(re, im)

    def _parts(other):
        if isinstance(other, GaussianRational):
            return other.re, other.im
        if isinstance(other, (int, Fraction)):
            return Fraction(other), Fraction(0)
        return NotImplemented

    def __add__(self, other):
        p = GaussianRational._parts(other)
        if p is NotImplemented:
            return NotImplemented
        return GaussianRational.make(self.re + p[0], self.im + p[1])

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other):
        p = GaussianRational._parts(other)
        if p is NotImplemented:
            return NotImplemented
        return GaussianRational.make(self.re - p[0], self.im - p[1])

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        p = GaussianRational._parts(other)
        if p is NotImplemented:
            return NotImplemented
        a, b = p
        return GaussianRational.make(self.re * a - self.im * b, self.re * b + self.im * a)

    __rmul__ = __mul__

    def __truediv__(self, other):
        p = GaussianRational._parts(other)
        if p is NotImplemented:
            return NotImplemented
        a, b = p
        d = a * a + b * b
        return GaussianRational.make((self.re * a + self.im * b) / d, (self.im * a - self.re * b) / d)

    def __rtruediv__(self, other):
        return GaussianRational(other) / self

    def __eq__(self, other):
        p = GaussianRational._parts(other)
        if p is NotImplemented:
            return NotImplemented
        return self.re == p[0] and self.im == p[1]

    def __hash__(self):
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"({self.re}+{self.im}i)"


I_EXACT = GaussianRational(0, 1)


def to_exact(c):
    if isinstance(c, (GaussianRational, Fraction, int)):
        return c if not isinstance(c, int) else Fraction(c)
    if isinstance(c, complex):
        return GaussianRational.make(Fraction(c.real), Fraction(c.imag))
    return Fraction(c)


def parts(c) -> tuple:
    """(re, im) as Fractions for exact coefficients."""
    if isinstance(c, GaussianRational):
        return c.re, c.im
    return Fraction(c), Fraction(0)


class AlgebraError(ValueError):
    pass


class TruncSeries:
    """Element of the truncated algebra.  ``exact`` selects rational coefficients."""

    __slots__ = ("lattice", "order", "terms", "exact")

    def __init__(self, lattice: Lattice, order: int, terms=None, exact: bool = True):
        self.lattice = lattice
        self.order = int(order)
        self.exact = exact
        self.terms = {}
        if terms:
            for (a, m), c in dict(terms).items():
                a = tuple(a)
                m = tuple(m)
                if sum(m) > self.order:
                    continue
                c = to_exact(c) if exact else complex(c)
                if c != 0:
                    self.terms[(a, m)] = self.terms.get((a, m), 0) + c
            self.terms = {k: v for k, v in self.terms.items() if v != 0}

    # construction -------------------------------------------------------
    @classmethod
    def _raw(cls, lattice, order, terms, exact):
        s = cls.__new__(cls)
        s.lattice = lattice
        s.order = order
        s.terms = terms
        s.exact = exact
        return s

    @classmethod
    def zero(cls, lattice, order, exact=True):
        return cls._raw(lattice, order, {}, exact)

    @classmethod
    def monomial(cls, lattice, order, a: Charge, m=None, coeff=1, exact=True):
        n = lattice.rank
        m = tuple(m) if m is not None else (0,) * n
        return cls(lattice, order, {(tuple(a), m): coeff}, exact)

    @classmethod
    def one(cls, lattice, order, exact=True):
        return cls.monomial(lattice, order, (0,) * lattice.rank, exact=exact)

    @classmethod
    def x(cls, lattice, order, a: Charge, coeff=1, exact=True):
        """The monomial s^{[a]+ + [a]-} x_a (each charge carries its s-monomial)."""
        p, q = split_parts(a)
        return cls.monomial(lattice, order, a, tuple(u + v for u, v in zip(p, q)), coeff, exact)

    def _new(self, terms):
        return TruncSeries._raw(self.lattice, self.order, terms, self.exact)

    def _check(self, other):
        if not isinstance(other, TruncSeries):
            raise TypeError("expected TruncSeries")
        if other.order != self.order or other.lattice != self.lattice:
            raise AlgebraError("order or lattice mismatch")

    def _coerce(self, c):
        return to_exact(c) if self.exact else complex(c)

    # vector space -------------------------------------------------------
    def __add__(self, other):
        self._check(other)
        t = dict(self.terms)
        for k, v in other.terms.items():
            w = t.get(k, 0) + v
            if w == 0:
                t.pop(k, None)
            else:
                t[k] = w
        return self._new(t)

    def __neg__(self):
        return self._new({k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        c = self._coerce(c)
        if c == 0:
            return self._new({})
        return self._new({k: v * c for k, v in self.terms.items()})

    def __eq__(self, other):
        if not isinstance(other, TruncSeries):
            return NotImplemented
        return self.order == other.order and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(sorted(self.terms.items()))

    def is_zero(self) -> bool:
        return not self.terms

    def coeff(self, a: Charge, m) -> object:
        return self.terms.get((tuple(a), tuple(m)), 0)

    def min_sdegree(self) -> int:
        return min((sum(m) for (_, m) in self.terms), default=self.order + 1)

    def truncate(self, order: int):
        return TruncSeries._raw(self.lattice, order,
                                {k: v for k, v in self.terms.items() if sum(k[1]) <= order}, self.exact)

    def homogeneous(self, d: int):
        return self._new({k: v for k, v in self.terms.items() if sum(k[1]) == d})

    def to_float(self):
        return TruncSeries._raw(self.lattice, self.order,
                                {k: complex(v) for k, v in self.terms.items()}, False)

    def to_exact(self):
        return TruncSeries(self.lattice, self.order, self.terms, exact=True)

    def max_abs(self) -> float:
        return max((abs(complex(v)) for v in self.terms.values()), default=0.0)

    def distance(self, other) -> float:
        return (self - other).max_abs()

    # products -----------------------------------------------------------
    def _product(self, other, with_pairing: bool):
        self._check(other)
        N = self.order
        pm = self.lattice.pairing_matrix
        n = self.lattice.rank
        out = {}
        b_items = [((b, mb, sum(mb)), cb) for (b, mb), cb in other.terms.items()]
        for (a, ma), ca in self.terms.items():
            da = sum(ma)
            # row vector a^T P, reused across the inner loop
            ap = [sum(a[i] * pm[i][j] for i in range(n)) for j in range(n)]
            for (b, mb, db), cb in b_items:
                if da + db > N:
                    continue
                p = sum(ap[j] * b[j] for j in range(n))
                if with_pairing:
                    if p == 0:
                        continue
                    c = ca * cb * (-p if p % 2 else p)
                else:
                    c = ca * cb
                    if p % 2:
                        c = -c
                key = (tuple(x + y for x, y in zip(a, b)), tuple(x + y for x, y in zip(ma, mb)))
                w = out.get(key, 0) + c
                if w == 0:
                    out.pop(key, None)
                else:
                    out[key] = w
        return self._new(out)

    def __mul__(self, other):
        if isinstance(other, TruncSeries):
            return self._product(other, False)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def bracket(self, other):
        return self._product(other, True)

    def power(self, k: int):
        if k < 0:
            return self.inverse().power(-k)
        result = TruncSeries.one(self.lattice, self.order, self.exact)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def inverse(self):
        """Inverse of c x_a (1 + J); raises if the s-degree zero part is not a single monomial."""
        low = [(a, c) for (a, m), c in self.terms.items() if sum(m) == 0]
        if len(low) != 1:
            raise AlgebraError("series is not invertible: s-degree zero part must be a single monomial")
        a, c = low[0]
        lead = TruncSeries.monomial(self.lattice, self.order, neg(a), coeff=1 / c, exact=self.exact)
        u = self * lead  # 1 + v with v in J
        v = u - TruncSeries.one(self.lattice, self.order, self.exact)
        inv_u = TruncSeries.one(self.lattice, self.order, self.exact)
        term = inv_u
        for _ in range(self.order):
            term = -(term * v)
            if term.is_zero():
                break
            inv_u = inv_u + term
        return inv_u * lead


def star_exp(a: TruncSeries) -> TruncSeries:
    """exp under the commutative product; requires a to lie in J."""
    if a.min_sdegree() < 1:
        raise AlgebraError("star_exp needs an element of J (all s-degrees >= 1)")
    result = TruncSeries.one(a.lattice, a.order, a.exact)
    term = result
    for k in range(1, a.order + 1):
        term = (term * a).scale(Fraction(1, k) if a.exact else 1.0 / k)
        if term.is_zero():
            break
        result = result + term
    return result


def star_log(u: TruncSeries) -> TruncSeries:
    """log of 1 + v for v in J."""
    one = TruncSeries.one(u.lattice, u.order, u.exact)
    v = u - one
    if v.min_sdegree() < 1:
        raise AlgebraError("star_log needs an element of 1 + J")
    result = TruncSeries.zero(u.lattice, u.order, u.exact)
    term = one
    for k in range(1, u.order + 1):
        term = term * v
        if term.is_zero():
            break
        c = Fraction((-1) ** (k + 1), k) if u.exact else (-1) ** (k + 1) / k
        result = result + term.scale(c)
    return result


def binomial_power(v: TruncSeries, e) -> TruncSeries:
    """(1 + v)^e for v in J and rational (or complex) exponent e."""
    if v.min_sdegree() < 1:
        raise AlgebraError("binomial_power needs v in J")
    one = TruncSeries.one(v.lattice, v.order, v.exact)
    result = one
    term = one
    coeff = Fraction(1) if v.exact else 1.0
    e = Fraction(e) if v.exact else complex(e)
    for k in range(1, v.order + 1):
        coeff = coeff * (e - (k - 1)) / k
        term = term * v
        if term.is_zero() or coeff == 0:
            break
        result = result + term.scale(coeff)
    return result


def metric_pair(a: Charge, series: TruncSeries, g0=1) -> dict:
    """g(x_a, series) as a map s-multidegree -> coefficient."""
    a = tuple(a)
    return {m: g0 * c for (b, m), c in series.terms.items() if b == a}


# serialization ---------------------------------------------------------

def series_to_records(series: TruncSeries) -> list:
    recs = []
    for (a, m), c in sorted(series.terms.items()):
        z = complex(c)
        rec = {"charge": list(a), "sdeg": list(m), "re": z.real, "im": z.imag}
        if series.exact:
            re, im = parts(c)
            rec["re_q"] = str(re)
            rec["im_q"] = str(im)
        recs.append(rec)
    return recs


def series_from_records(lattice: Lattice, order: int, recs: Iterable, exact: bool = True) -> TruncSeries:
    terms = {}
    for r in recs:
        if exact:
            c = GaussianRational.make(Fraction(r["re_q"]), Fraction(r["im_q"]))
        else:
            c = complex(r["re"], r["im"])
        terms[(tuple(r["charge"]), tuple(r["sdeg"]))] = c
    return TruncSeries(lattice, order, terms, exact)


# algebra maps ----------------------------------------------------------

AUTOMORPHISM = "automorphism"
DERIVATION = "derivation"


class AlgebraMap:
    """Automorphism or derivation fixed by its images of the generators x_{g_i}."""

    def __init__(self, kind: str, images: list):
        if kind not in (AUTOMORPHISM, DERIVATION):
            raise ValueError(f"unknown kind {kind!r}")
        if not images:
            raise ValueError("need one image per generator")
        self.kind = kind
        self.images = list(images)
        s0 = self.images[0]
        self.lattice = s0.lattice
        self.order = s0.order
        self.exact = s0.exact
        if len(self.images) != self.lattice.rank:
            raise ValueError("need one image per generator")
        for s in self.images:
            s0._check(s)
        self._powers = {}
        self._inverse_images = None
        if kind == AUTOMORPHISM:
            for i, img in enumerate(self.images):
                low = [(a, c) for (a, m), c in img.terms.items() if sum(m) == 0]
                if len(low) != 1 or low[0][0] != self.lattice.basis(i):
                    raise AlgebraError(f"image of generator {i} is not x_g(unit + J)")

    @classmethod
    def identity(cls, lattice, order, exact=True):
        return cls(AUTOMORPHISM, [TruncSeries.monomial(lattice, order, g, exact=exact)
                                  for g in lattice.generators()])

    @classmethod
    def ad(cls, a: TruncSeries):
        return cls(DERIVATION, [a.bracket(TruncSeries.monomial(a.lattice, a.order, g, exact=a.exact))
                                for g in a.lattice.generators()])

    @classmethod
    def diagonal(cls, lattice, order, values, exact=False):
        """Derivation x_a -> (sum a_i values_i) x_a, e.g. the central charge."""
        return cls(DERIVATION, [TruncSeries.monomial(lattice, order, g, coeff=values[i], exact=exact)
                                for i, g in enumerate(lattice.generators())])

    def _power(self, i: int, k: int) -> TruncSeries:
        key = (i, k)
        p = self._powers.get(key)
        if p is None:
            if k == 0:
                p = TruncSeries.one(self.lattice, self.order, self.exact)
            elif k == 1:
                p = self.images[i]
            elif k == -1:
                p = self.images[i].inverse()
            else:
                step = 1 if k > 0 else -1
                p = self._power(i, k - step) * self._power(i, step)
            self._powers[key] = p
        return p

    def image_of_charge(self, a: Charge) -> TruncSeries:
        """Image of x_a (without s-factors)."""
        lat = self.lattice
        if self.kind == AUTOMORPHISM:
            out = TruncSeries.monomial(lat, self.order, (0,) * lat.rank, coeff=lat.sign(a), exact=self.exact)
            for i, k in enumerate(a):
                if k:
                    out = out * self._power(i, k)
            return out
        xa = TruncSeries.monomial(lat, self.order, a, exact=self.exact)
        acc = TruncSeries.zero(lat, self.order, self.exact)
        for i, k in enumerate(a):
            if k:
                xinv = TruncSeries.monomial(lat, self.order, neg(lat.basis(i)), exact=self.exact)
                acc = acc + (xinv * self.images[i]).scale(k)
        return xa * acc

    def apply(self, series: TruncSeries) -> TruncSeries:
        if series.lattice != self.lattice or series.order != self.order:
            raise AlgebraError("order or lattice mismatch")
        out = {}
        cache = {}
        for (a, m), c in series.terms.items():
            img = cache.get(a)
            if img is None:
                img = cache[a] = self.image_of_charge(a)
            dm = sum(m)
            for (b, mb), cb in img.terms.items():
                if dm + sum(mb) > self.order:
                    continue
                key = (b, tuple(x + y for x, y in zip(m, mb)))
                w = out.get(key, 0) + c * cb
                if w == 0:
                    out.pop(key, None)
                else:
                    out[key] = w
        exact = self.exact and series.exact
        return TruncSeries._raw(self.lattice, self.order, out, exact)

    def __call__(self, series):
        return self.apply(series)

    def inverse(self) -> "AlgebraMap":
        """Two-sided inverse of an automorphism, order by order in the s-adic filtration."""
        if self.kind != AUTOMORPHISM:
            raise AlgebraError("only automorphisms are inverted")
        # Y^{-1}(x) = sum_k (id - Y)^k x, exact because id - Y raises the s-degree
        imgs = []
        for g in self.lattice.generators():
            x = TruncSeries.monomial(self.lattice, self.order, g, exact=self.exact)
            total = x
            term = x
            for _ in range(self.order):
                term = term - self.apply(term)
                if term.is_zero():
                    break
                total = total + term
            imgs.append(total)
        return AlgebraMap(AUTOMORPHISM, imgs)

    def distance(self, other: "AlgebraMap") -> float:
        return max(a.distance(b) for a, b in zip(self.images, other.images))

    def __eq__(self, other):
        if not isinstance(other, AlgebraMap):
            return NotImplemented
        return self.kind == other.kind and self.images == other.images

    def to_float(self):
        return AlgebraMap(self.kind, [s.to_float() for s in self.images])


def compose(f: AlgebraMap, g: AlgebraMap) -> AlgebraMap:
    """f after g; both must be automorphisms."""
    if f.kind != AUTOMORPHISM or g.kind != AUTOMORPHISM:
        raise AlgebraError("compose supports automorphism after automorphism; use conjugate for derivations")
    return AlgebraMap(AUTOMORPHISM, [f.apply(img) for img in g.images])


def conjugate(g: AlgebraMap, d: AlgebraMap, g_inverse: AlgebraMap | None = None) -> AlgebraMap:
    """The derivation g o d o g^{-1}."""
    if g.kind != AUTOMORPHISM or d.kind != DERIVATION:
        raise AlgebraError("conjugate needs an automorphism and a derivation")
    gi = g_inverse or g.inverse()
    return AlgebraMap(DERIVATION, [g.apply(d.apply(img)) for img in gi.images])


def exp_derivation(d: AlgebraMap) -> AlgebraMap:
    """exp(d) for a derivation raising the s-degree."""
    if d.kind != DERIVATION:
        raise AlgebraError("exp_derivation needs a derivation")
    imgs = []
    for g in d.lattice.generators():
        x = TruncSeries.monomial(d.lattice, d.order, g, exact=d.exact)
        total = x
        term = x
        for k in range(1, d.order + 1):
            term = d.apply(term).scale(Fraction(1, k) if d.exact else 1.0 / k)
            if term.is_zero():
                break
            total = total + term
        imgs.append(total)
    return AlgebraMap(AUTOMORPHISM, imgs)
