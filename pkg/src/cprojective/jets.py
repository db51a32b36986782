"""Truncated derivative arrays ("jets") and exact calculus on them.

A Jet holds the value and all partial-derivative arrays of a tensor-valued
quantity up to a fixed order at one point: terms[k] has the component shape
followed by k symmetric derivative axes.  Products, contractions, matrix
inverses, determinants and smooth scalar functions are propagated through
exact Leibniz / Faa di Bruno recursions, so the only error anywhere is float
rounding.  This is what lets curvature, Schouten and splitting-operator
chains reach fourth and fifth derivatives of a defining function without
symbolic blowup or finite-difference noise.
"""

from __future__ import annotations

import itertools
import math
import string

import numpy as np


class Jet:
    __slots__ = ("n", "comp_shape", "terms")

    def __init__(self, n, comp_shape, terms):
        self.n = n
        self.comp_shape = tuple(comp_shape)
        self.terms = list(terms)

    @property
    def order(self):
        return len(self.terms) - 1

    @staticmethod
    def constant(n, array, order):
        array = np.asarray(array, dtype=float)
        terms = [array] + [np.zeros(array.shape + (n,) * k) for k in range(1, order + 1)]
        return Jet(n, array.shape, terms)

    def truncated(self, order):
        if order > self.order:
            raise ValueError(f"jet of order {self.order} cannot provide order {order}")
        return Jet(self.n, self.comp_shape, self.terms[: order + 1])

    def copy(self):
        return Jet(self.n, self.comp_shape, [t.copy() for t in self.terms])

    def __add__(self, other):
        other = _coerce(other, self)
        k = min(self.order, other.order)
        return Jet(self.n, self.comp_shape,
                   [self.terms[i] + other.terms[i] for i in range(k + 1)])

    def __sub__(self, other):
        other = _coerce(other, self)
        k = min(self.order, other.order)
        return Jet(self.n, self.comp_shape,
                   [self.terms[i] - other.terms[i] for i in range(k + 1)])

    def __neg__(self):
        return Jet(self.n, self.comp_shape, [-t for t in self.terms])

    def scaled(self, c):
        return Jet(self.n, self.comp_shape, [c * t for t in self.terms])


def _coerce(v, like):
    if isinstance(v, Jet):
        return v
    return Jet.constant(like.n, np.broadcast_to(np.asarray(v, dtype=float), like.comp_shape),
                        like.order)


def sym_last(arr, k):
    """Symmetrize over the last k axes."""
    if k <= 1:
        return arr
    base = arr.ndim - k
    total = np.zeros_like(arr)
    perms = list(itertools.permutations(range(k)))
    for p in perms:
        axes = tuple(range(base)) + tuple(base + p[i] for i in range(k))
        total += np.transpose(arr, axes)
    return total / len(perms)


_LETTERS = string.ascii_letters


def _derivative_letters(used, count):
    pool = [c for c in _LETTERS if c not in used]
    if len(pool) < count:
        raise ValueError("einsum letter pool exhausted")
    return "".join(pool[:count])


def jmul(spec, a: Jet, b: Jet, order=None):
    """Leibniz product: einsum over component axes, exact derivative bookkeeping.

    spec is a plain einsum spec for the component axes, e.g. 'ci,ibd->cbd'.
    """
    if order is None:
        order = min(a.order, b.order)
    ins, out = spec.split("->")
    in_a, in_b = ins.split(",")
    used = set(spec) - {",", "-", ">"}
    terms = []
    for k in range(order + 1):
        dk = _derivative_letters(used, k)
        acc = None
        for j in range(k + 1):
            da, db = dk[:j], dk[j:]
            piece = np.einsum(f"{in_a}{da},{in_b}{db}->{out}{dk}",
                              a.terms[j], b.terms[k - j])
            piece = math.comb(k, j) * sym_last(piece, k)
            acc = piece if acc is None else acc + piece
        terms.append(acc)
    comp_shape = terms[0].shape
    return Jet(a.n, comp_shape, terms)


def jcontract(spec, a: Jet):
    """Single-operand einsum on component axes (derivative axes ride along)."""
    ins, out = spec.split("->")
    used = set(spec) - {",", "-", ">"}
    terms = []
    for k in range(a.order + 1):
        dk = _derivative_letters(used, k)
        terms.append(np.einsum(f"{ins}{dk}->{out}{dk}", a.terms[k]))
    return Jet(a.n, terms[0].shape, terms)


def jpartial(a: Jet):
    """Coordinate derivative: one order lower, a new leading component axis."""
    if a.order < 1:
        raise ValueError("need at least a first-order jet to differentiate")
    base = len(a.comp_shape)
    terms = [np.moveaxis(a.terms[k + 1], base, 0) for k in range(a.order)]
    return Jet(a.n, (a.n,) + a.comp_shape, terms)


def jtranspose(a: Jet, perm):
    """Permute component axes."""
    terms = []
    for k in range(a.order + 1):
        axes = tuple(perm) + tuple(len(perm) + i for i in range(k))
        terms.append(np.transpose(a.terms[k], axes))
    return Jet(a.n, terms[0].shape[: len(perm)], terms)


def jinv_matrix(g: Jet):
    """Inverse of a jet-valued square matrix, via d(G . G^{-1}) = 0."""
    g0 = g.terms[0]
    h0 = np.linalg.inv(g0)
    terms = [h0]
    for k in range(1, g.order + 1):
        acc = np.zeros(h0.shape + (g.n,) * k)
        for j in range(1, k + 1):
            # (D^j G)[a,i,...] (D^{k-j} H)[i,b,...] with derivative axes appended
            piece = np.tensordot(g.terms[j], terms[k - j], axes=([1], [0]))
            # axes now: a, d1..dj, b, e1..e_{k-j}  -> move b after a
            piece = np.moveaxis(piece, 1 + j, 1)
            piece = math.comb(k, j) * sym_last(piece, k)
            acc += piece
        term = -np.einsum("ai,ib...->ab...", h0, acc)
        terms.append(term)
    return Jet(g.n, g.comp_shape, terms)


def _scalar_mul(a: Jet, b: Jet, order=None):
    return jmul(",->", a, b, order)


def jdet(g: Jet):
    """Determinant of a jet-valued square matrix via elimination with pivoting."""
    size = g.comp_shape[0]
    rows = [[_entry(g, i, j) for j in range(size)] for i in range(size)]
    sign = 1.0
    det = None
    for col in range(size):
        pivot_row = max(range(col, size), key=lambda r: abs(rows[r][col].terms[0]))
        if abs(rows[pivot_row][col].terms[0]) == 0.0:
            return Jet.constant(g.n, 0.0, g.order)
        if pivot_row != col:
            rows[col], rows[pivot_row] = rows[pivot_row], rows[col]
            sign = -sign
        pivot = rows[col][col]
        det = pivot if det is None else _scalar_mul(det, pivot)
        inv_pivot = jrecip(pivot)
        for r in range(col + 1, size):
            factor = _scalar_mul(rows[r][col], inv_pivot)
            for c in range(col + 1, size):
                rows[r][c] = rows[r][c] - _scalar_mul(factor, rows[col][c])
    return det.scaled(sign)


def _entry(g: Jet, i, j):
    return Jet(g.n, (), [g.terms[k][i, j] for k in range(g.order + 1)])


# -- smooth scalar functions via Faa di Bruno ----------------------------------

def _partitions(k):
    """Integer partitions of k as non-increasing tuples."""
    if k == 0:
        yield ()
        return
    def rec(remaining, maximum):
        if remaining == 0:
            yield ()
            return
        for first in range(min(remaining, maximum), 0, -1):
            for rest in rec(remaining - first, first):
                yield (first,) + rest
    yield from rec(k, k)


def _partition_multiplicity(lam):
    k = sum(lam)
    m = math.factorial(k)
    for part in lam:
        m //= math.factorial(part)
    counts = {}
    for part in lam:
        counts[part] = counts.get(part, 0) + 1
    for c in counts.values():
        m //= math.factorial(c)
    return m


def jcompose(u: Jet, fderivs):
    """f(u) for scalar jets, given [f(u0), f'(u0), ..., f^{(K)}(u0)]."""
    if u.comp_shape != ():
        raise ValueError("jcompose needs a scalar jet")
    order = u.order
    terms = [np.array(fderivs[0])]
    for k in range(1, order + 1):
        acc = np.zeros((u.n,) * k)
        for lam in _partitions(k):
            block = u.terms[lam[0]]
            for part in lam[1:]:
                block = np.multiply.outer(block, u.terms[part])
            block = sym_last(block, k)
            acc = acc + fderivs[len(lam)] * _partition_multiplicity(lam) * block
        terms.append(acc)
    return Jet(u.n, (), terms)


def jrecip(u: Jet):
    u0 = float(u.terms[0])
    if u0 == 0.0:
        raise ZeroDivisionError("jet reciprocal at a zero value")
    derivs = [(-1.0) ** b * math.factorial(b) / u0 ** (b + 1) for b in range(u.order + 1)]
    return jcompose(u, derivs)


def jpow(u: Jet, p: float):
    u0 = float(u.terms[0])
    derivs = []
    coeff = 1.0
    for b in range(u.order + 1):
        derivs.append(coeff * u0 ** (p - b))
        coeff *= p - b
    return jcompose(u, derivs)


def jsqrt(u: Jet):
    return jpow(u, 0.5)


def jexp(u: Jet):
    e = math.exp(float(u.terms[0]))
    return jcompose(u, [e] * (u.order + 1))


def jlog(u: Jet):
    u0 = float(u.terms[0])
    if u0 <= 0.0:
        raise ValueError("jet log of a non-positive value")
    derivs = [math.log(u0)]
    derivs += [(-1.0) ** (b - 1) * math.factorial(b - 1) / u0 ** b
               for b in range(1, u.order + 1)]
    return jcompose(u, derivs)


def jabs_pow(u: Jet, p: float):
    """|u|^p for u bounded away from zero (sign taken from the value)."""
    if float(u.terms[0]) < 0.0:
        return jpow(-u, p)
    return jpow(u, p)
