"""Charge-decorated rooted trees: canonical forms, enumeration, weights, and the
tree coefficients of products in the enveloping algebra."""
from __future__ import annotations

import itertools
import math
from collections import Counter
from fractions import Fraction
from functools import cached_property
from typing import Iterable

from .lattice import Charge, Lattice, add, degree


class DecoratedTree:
    """Rooted tree with charge decorations, stored in canonical form.

    The canonical key is (root charge, sorted tuple of child keys); two trees are
    isomorphic iff their keys agree.
    """

    __slots__ = ("key", "__dict__")

    def __init__(self, label: Charge, children: Iterable["DecoratedTree"] = ()):
        kids = tuple(sorted(children, key=lambda t: t.key))
        self.key = (tuple(label), tuple(c.key for c in kids))
        self.__dict__["_children"] = kids

    @classmethod
    def from_key(cls, key) -> "DecoratedTree":
        label, kids = key
        return cls(label, [cls.from_key(k) for k in kids])

    @classmethod
    def from_parents(cls, labels: list, parents: list) -> "DecoratedTree":
        """Build from vertex labels and a parent array (root has parent -1)."""
        kids = {i: [] for i in range(len(labels))}
        root = None
        for v, p in enumerate(parents):
            if p < 0:
                root = v
            else:
                kids[p].append(v)

        def build(v):
            return cls(labels[v], [build(w) for w in kids[v]])

        return build(root)

    @property
    def label(self) -> Charge:
        return self.key[0]

    @property
    def children(self) -> tuple:
        return self._children

    def __eq__(self, other):
        return isinstance(other, DecoratedTree) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __lt__(self, other):
        return self.key < other.key

    def __repr__(self):
        return f"DecoratedTree({self.key!r})"

    @cached_property
    def size(self) -> int:
        return 1 + sum(c.size for c in self.children)

    @cached_property
    def total_degree(self) -> int:
        return degree(self.label) + sum(c.total_degree for c in self.children)

    @cached_property
    def charge_sum(self) -> Charge:
        s = self.label
        for c in self.children:
            s = add(s, c.charge_sum)
        return s

    @cached_property
    def depth(self) -> int:
        """Number of vertices on the longest root-to-leaf path."""
        return 1 + max((c.depth for c in self.children), default=0)

    @cached_property
    def aut_order(self) -> int:
        order = 1
        for c, m in Counter(self.children).items():
            order *= math.factorial(m) * c.aut_order ** m
        return order

    def vertices(self) -> list:
        out = [self.label]
        for c in self.children:
            out.extend(c.vertices())
        return out

    def edges(self) -> list:
        """(parent label, child label) pairs."""
        out = []
        for c in self.children:
            out.append((self.label, c.label))
            out.extend(c.edges())
        return out

    def negated(self) -> "DecoratedTree":
        return DecoratedTree(tuple(-x for x in self.label), [c.negated() for c in self.children])

    def to_json(self) -> dict:
        return {"charge": list(self.label), "children": [c.to_json() for c in self.children]}


def aut_order(tree: DecoratedTree) -> int:
    return tree.aut_order


class Forest:
    """Multiset of connected trees."""

    __slots__ = ("trees",)

    def __init__(self, trees: Iterable[DecoratedTree] = ()):
        self.trees = tuple(sorted(trees, key=lambda t: t.key))

    def __eq__(self, other):
        return isinstance(other, Forest) and self.trees == other.trees

    def __hash__(self):
        return hash(tuple(t.key for t in self.trees))

    def __repr__(self):
        return f"Forest({[t.key for t in self.trees]!r})"

    def __len__(self):
        return len(self.trees)

    @property
    def total_degree(self) -> int:
        return sum(t.total_degree for t in self.trees)

    @property
    def size(self) -> int:
        return sum(t.size for t in self.trees)

    @property
    def depth(self) -> int:
        return max((t.depth for t in self.trees), default=0)

    @property
    def charge_sum(self) -> Charge:
        s = None
        for t in self.trees:
            s = t.charge_sum if s is None else add(s, t.charge_sum)
        return s

    def vertices(self) -> list:
        return [v for t in self.trees for v in t.vertices()]

    @property
    def symmetry(self) -> int:
        """Order of the permutations of identical components."""
        out = 1
        for m in Counter(self.trees).values():
            out *= math.factorial(m)
        return out


def _multisets(items: list, total: int, start: int = 0):
    """Nondecreasing index sequences into items (each with .total_degree) summing to total."""
    if total == 0:
        yield ()
        return
    for i in range(start, len(items)):
        d = items[i].total_degree
        if d <= total:
            for rest in _multisets(items, total - d, i):
                yield (i,) + rest


def _trees_by_degree(support: list, N: int) -> list:
    """levels[d] = canonical trees with total degree exactly d."""
    support = sorted(set(tuple(a) for a in support))
    for a in support:
        if degree(a) < 1:
            raise ValueError("support charges must have degree >= 1")
    levels = [[] for _ in range(N + 1)]
    for d in range(1, N + 1):
        pool = [t for lv in levels[1:d] for t in lv]
        pool.sort(key=lambda t: t.key)
        found = []
        for a in support:
            r = d - degree(a)
            if r < 0:
                continue
            for idx in _multisets(pool, r):
                found.append(DecoratedTree(a, [pool[i] for i in idx]))
        found.sort(key=lambda t: t.key)
        levels[d] = found
    return levels


def enumerate_trees(support: Iterable, N: int, connected: bool = True):
    """Deterministic stream of isomorphism classes with total degree <= N, by degree."""
    levels = _trees_by_degree(list(support), N)
    if connected:
        for d in range(1, N + 1):
            yield from levels[d]
        return
    trees = [t for d in range(1, N + 1) for t in levels[d]]
    yield Forest()
    for d in range(1, N + 1):
        for idx in _multisets(trees, d):
            yield Forest([trees[i] for i in idx])


SIGNED = "signed"
ABSOLUTE = "absolute"


def weight_coefficient(tree: DecoratedTree, table, lattice: Lattice, mode: str = SIGNED) -> Fraction:
    """Scalar c with W_T = c * alpha_T (alpha_T the root charge).

    table maps charges to DT(a) in signed mode, or to the nonnegative vertex
    weights (Mobius transform of |Omega|) in absolute mode.
    """
    def value(a):
        v = table.get(a) if isinstance(table, dict) else table(a)
        if v is None:
            raise KeyError(f"missing table value for {a}")
        return Fraction(v) if not isinstance(v, float) else v

    c = value(tree.label) / tree.aut_order
    for p, q in tree.edges():
        e = lattice.pairing(p, q)
        if mode == ABSOLUTE:
            e = abs(e)
        c *= e * value(q)
        if c == 0:
            return c
    return c


def weight(tree: DecoratedTree, table, lattice: Lattice, mode: str = SIGNED) -> tuple:
    """W_T as a rational vector in the charge lattice."""
    c = weight_coefficient(tree, table, lattice, mode)
    return tuple(c * x for x in tree.label)


def pair_weight(beta: Charge, tree, table, lattice: Lattice, mode: str = SIGNED):
    """<beta, W_T>; absolute mode gives |<beta, a_T>| times the absolute coefficient.

    Forests multiply their components and divide by the symmetry of identical components.
    """
    if isinstance(tree, Forest):
        out = Fraction(1)
        for t in tree.trees:
            out *= pair_weight(beta, t, table, lattice, mode)
        return out / tree.symmetry
    e = lattice.pairing(beta, tree.label)
    if mode == ABSOLUTE:
        e = abs(e)
    return e * weight_coefficient(tree, table, lattice, mode)


# tree coefficients of products in the enveloping algebra ------------------

AWAY_FROM_FIRST = "away_from_first"
INCREASING = "increasing"


def labelled_trees(k: int):
    """All labelled trees on {0..k-1} as edge lists (Pruefer decoding)."""
    if k == 1:
        yield []
        return
    if k == 2:
        yield [(0, 1)]
        return
    for seq in itertools.product(range(k), repeat=k - 2):
        deg = [1] * k
        for v in seq:
            deg[v] += 1
        edges = []
        seq = list(seq)
        for v in seq:
            leaf = min(i for i in range(k) if deg[i] == 1)
            edges.append((leaf, v))
            deg[leaf] -= 1
            deg[v] -= 1
        u, w = [i for i in range(k) if deg[i] == 1]
        edges.append((u, w))
        yield edges


def _orient_away(edges, k, root=0):
    adj = {i: [] for i in range(k)}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    out, seen, stack = [], {root}, [root]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                out.append((u, v))
                stack.append(v)
    return out


def c_coefficient(alphas: list, lattice: Lattice, convention: str = AWAY_FROM_FIRST) -> Fraction:
    """Coefficient of x_{a_1+...+a_k} in the degree one part of x_{a_1} ... x_{a_k}."""
    k = len(alphas)
    if k < 1:
        raise ValueError("need at least one charge")
    total = Fraction(0)
    for edges in labelled_trees(k):
        if convention == AWAY_FROM_FIRST:
            oriented = _orient_away(edges, k)
        elif convention == INCREASING:
            oriented = [(min(u, v), max(u, v)) for u, v in edges]
        else:
            raise ValueError(f"unknown convention {convention!r}")
        term = 1
        for i, j in oriented:
            p = lattice.pairing(alphas[i], alphas[j])
            term *= -p if p % 2 else p
            if term == 0:
                break
        total += term
    return total / 2 ** (k - 1)


def bch_coefficient(alphas: list, lattice: Lattice) -> Fraction:
    """Multilinear part of log(e^{X_1} ... e^{X_k}) evaluated at X_i = x_{a_i}.

    Independent route: word coefficients of the logarithm, turned into Lie
    brackets by the Dynkin-Specht-Wever projection.
    """
    k = len(alphas)
    total = Fraction(0)
    for perm in itertools.permutations(range(k)):
        descents = sum(1 for i in range(k - 1) if perm[i] > perm[i + 1])
        c = Fraction(0)
        for m in range(descents + 1, k + 1):
            c += Fraction((-1) ** (m + 1), m) * math.comb(k - 1 - descents, m - 1 - descents)
        if c == 0:
            continue
        acc_charge = alphas[perm[0]]
        acc = 1
        for i in perm[1:]:
            p = lattice.pairing(acc_charge, alphas[i])
            acc *= -p if p % 2 else p
            if acc == 0:
                break
            acc_charge = add(acc_charge, alphas[i])
        total += c * acc
    return total / k
