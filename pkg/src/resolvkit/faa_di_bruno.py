"""Composite-series coefficients by combinatorial enumeration.

The coefficient of u^gamma in f(g(u)) is a finite sum over decompositions

    gamma = |k_1| delta_1 + ... + |k_l| delta_l,

with pairwise distinct nonzero exponent vectors ``delta_i`` and nonzero
multiplier vectors ``k_i``; each decomposition contributes the multinomial
alpha!/(k_1! ... k_l!) with alpha = k_1 + ... + k_l, times f_alpha and the
products of chosen g-coefficients.  This module enumerates decompositions
canonically (deltas in graded-lex order), computes the composite coefficient,
and evaluates the dominating generating function obtained by replacing every
coefficient with lambda^{|alpha|}.

Everything is exact; coefficient tables are plain dicts from exponent tuples
to Fractions.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import factorial

from .series import Jet, Multiindex, grlex_key, substitute

CoefficientTable = dict  # Multiindex -> Fraction


@dataclass(frozen=True)
class Decomposition:
    """One way of writing gamma as sum |k_i| * delta_i, deltas sorted grlex."""

    target: Multiindex
    pairs: tuple[tuple[Multiindex, Multiindex], ...]  # (delta_i, k_i)

    @property
    def alpha(self) -> Multiindex:
        p = len(self.pairs[0][1])
        out = [0] * p
        for _, k in self.pairs:
            for j, kj in enumerate(k):
                out[j] += kj
        return tuple(out)

    def multinomial(self) -> int:
        return multinomial_coefficient(self.alpha, [k for _, k in self.pairs])


def _box(gamma: Multiindex):
    """All nonzero multiindices <= gamma componentwise, in graded-lex order."""
    ranges = [range(g + 1) for g in gamma]
    out = [d for d in product(*ranges) if any(d)]
    out.sort(key=grlex_key)
    return out


@lru_cache(maxsize=None)
def _weighted_partitions(gamma: Multiindex, max_total_weight: int | None):
    """Tuples ((delta, w), ...) with strictly increasing deltas, w >= 1.

    Each tuple satisfies sum w * delta = gamma; ``max_total_weight`` prunes
    branches whose weight sum already exceeds the bound (used when the outer
    series has bounded degree).
    """
    deltas = _box(gamma)

    def rec(remaining, start, weight_left):
        if not any(remaining):
            return [()]
        out = []
        for idx in range(start, len(deltas)):
            d = deltas[idx]
            if any(a > b for a, b in zip(d, remaining)):
                continue
            w = 1
            scaled = d
            while all(a <= b for a, b in zip(scaled, remaining)):
                if weight_left is not None and w > weight_left:
                    break
                rest = tuple(b - a for a, b in zip(scaled, remaining))
                wl = None if weight_left is None else weight_left - w
                for tail in rec(rest, idx + 1, wl):
                    out.append(((d, w),) + tail)
                w += 1
                scaled = tuple(a + b for a, b in zip(scaled, d))
        return out

    return tuple(rec(gamma, 0, max_total_weight))


def _compositions(total: int, parts: int):
    """All tuples in N^parts with the given sum, lexicographic order."""
    if parts == 1:
        return [(total,)]
    out = []
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            out.append((first,) + rest)
    return out


@lru_cache(maxsize=None)
def _nonzero_compositions(total: int, parts: int):
    return tuple(k for k in _compositions(total, parts) if any(k))


def enumerate_decompositions(
    gamma, p: int, max_total_weight: int | None = None
) -> list[Decomposition]:
    """Complete duplicate-free list of decompositions of gamma.

    Multipliers k_i run over nonzero vectors in N^p; deltas within one
    decomposition are pairwise distinct and listed in graded-lex order, so the
    output order is deterministic.
    """
    gamma = tuple(int(g) for g in gamma)
    if not any(gamma):
        raise ValueError("decompositions are defined for nonzero gamma only")
    if p < 1:
        raise ValueError("p must be at least 1")
    out = []
    for shape in _weighted_partitions(gamma, max_total_weight):
        choices = [_nonzero_compositions(w, p) for _, w in shape]
        for ks in product(*choices):
            pairs = tuple((d, k) for (d, _), k in zip(shape, ks))
            out.append(Decomposition(target=gamma, pairs=pairs))
    return out


def multinomial_coefficient(alpha, ks) -> int:
    """alpha! / (k_1! ... k_l!) for multiindices with sum k_i = alpha."""
    alpha = tuple(int(a) for a in alpha)
    ks = [tuple(int(x) for x in k) for k in ks]
    sums = [sum(k[j] for k in ks) for j in range(len(alpha))]
    if tuple(sums) != alpha:
        raise ValueError(f"multiindices {ks} do not sum to {alpha}")
    num = 1
    for a in alpha:
        num *= factorial(a)
    den = 1
    for k in ks:
        for x in k:
            den *= factorial(x)
    assert num % den == 0
    return num // den


def _table_max_degree(table) -> int:
    return max((sum(a) for a in table), default=0)


def compose_coefficient(f_table, g_tables, gamma) -> Fraction:
    """The gamma-coefficient of f(g) from coefficient tables alone.

    ``f_table`` maps N^p exponents to the coefficients of the outer series
    (centered at g(0)); ``g_tables`` is one table per component of the inner
    map, each with zero constant term.  Exactly matches the coefficient
    extracted from :func:`resolvkit.series.substitute` on the same data.
    """
    gamma = tuple(int(g) for g in gamma)
    p = len(g_tables)
    for t in g_tables:
        zero = (0,) * len(gamma)
        if t.get(zero, Fraction(0)) != 0:
            raise ValueError("inner components must have zero constant term")
    if not any(gamma):
        return Fraction(f_table.get((0,) * p, Fraction(0)))
    max_w = _table_max_degree(f_table)
    total = Fraction(0)
    for dec in enumerate_decompositions(gamma, p, max_total_weight=max_w):
        alpha = dec.alpha
        fa = f_table.get(alpha)
        if not fa:
            continue
        term = Fraction(fa)
        ok = True
        for delta, k in dec.pairs:
            for j, kj in enumerate(k):
                if kj == 0:
                    continue
                gj = g_tables[j].get(delta)
                if not gj:
                    ok = False
                    break
                term *= Fraction(gj) ** kj
            if not ok:
                break
        if not ok:
            continue
        total += dec.multinomial() * term
    return total


def majorant_coefficient(lam, n: int, p: int, gamma) -> Fraction:
    """Coefficient of the dominating series: sum of multinomials * lambda^|alpha|.

    The gamma = 0 coefficient is 1 by convention.  Coefficientwise this equals
    the expansion of F(G, ..., G) with G(u) = prod 1/(1-u_i) - 1 and
    F(z) = prod 1/(1 - lambda z_j).
    """
    lam = Fraction(lam)
    if lam <= 0:
        raise ValueError("lambda must be positive")
    gamma = tuple(int(g) for g in gamma)
    if len(gamma) != n:
        raise ValueError("gamma length must equal n")
    if not any(gamma):
        return Fraction(1)
    total = Fraction(0)
    for dec in enumerate_decompositions(gamma, p):
        total += dec.multinomial() * lam ** sum(dec.alpha)
    return total


def majorant_series(lam, n: int, p: int, trunc: int) -> Jet:
    """Closed-form oracle: F(G, ..., G) expanded as a jet in n variables."""
    lam = Fraction(lam)
    one = Jet.constant(1, n, trunc)
    geo = one
    for i in range(n):
        gi = Jet.zero(n, trunc)
        for e in range(trunc + 1):
            gi = gi + Jet.monomial(
                tuple(e if j == i else 0 for j in range(n)), 1, trunc
            )
        geo = geo * gi
    G = geo - one
    # F(z) = prod_j 1/(1 - lam z_j) as a jet in p variables
    F = Jet.constant(1, p, trunc)
    for j in range(p):
        fj = Jet.zero(p, trunc)
        for e in range(trunc + 1):
            fj = fj + Jet.monomial(
                tuple(e if i == j else 0 for i in range(p)), lam**e, trunc
            )
        F = F * fj
    return substitute(F, [G] * p)


def jet_to_table(f: Jet) -> CoefficientTable:
    """Coefficient table of a jet (plain dict copy)."""
    return {a: c for a, c in f.terms()}
