"""Blow-up charts, transforms along them, and crossings bookkeeping.

A blow-up center here is always a coordinate subspace {x_i = 0, i in I}.  The
preimage is covered by one chart per index i in I, with the substitution

    x_i = y_i,   x_j = y_i y_j (j in I, j != i),   x_j = y_j (j not in I).

The chart substitution is degree-nondecreasing monomial by monomial, so a
pullback keeps its truncation; dividing out the exceptional coordinate y_i
costs one certified degree per power, as everywhere else in the library.

Codimension-one centers are permitted: the chart map degenerates to the
identity, but the exceptional coordinate and the transforms still make sense.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .series import (
    Jet,
    OrderResult,
    PolyMap,
    ShapeError,
    compose_maps,
    grlex_key,
)


@dataclass(frozen=True)
class Center:
    """A coordinate-subspace center {x_i = 0, i in indices} in n variables."""

    indices: tuple[int, ...]
    nvars: int

    def __post_init__(self):
        idx = tuple(sorted(set(int(i) for i in self.indices)))
        if not idx:
            raise ShapeError("a center needs at least one coordinate index")
        if idx[0] < 0 or idx[-1] >= self.nvars:
            raise ShapeError(f"center indices {idx} out of range for {self.nvars} variables")
        object.__setattr__(self, "indices", idx)

    @property
    def codim(self) -> int:
        return len(self.indices)

    @property
    def is_identity_blowup(self) -> bool:
        return self.codim == 1


@dataclass(frozen=True)
class ChartMap:
    """One chart of the blow-up along a center; chart_index is in the center."""

    center: Center
    chart_index: int

    def __post_init__(self):
        if self.chart_index not in self.center.indices:
            raise ShapeError(
                f"chart index {self.chart_index} is not a center index {self.center.indices}"
            )

    @property
    def nvars(self) -> int:
        return self.center.nvars

    @property
    def exceptional_index(self) -> int:
        return self.chart_index

    def pullback(self, f: Jet) -> Jet:
        """f composed with the chart substitution, at the same truncation."""
        if f.nvars != self.nvars:
            raise ShapeError("jet frame does not match the chart")
        i = self.chart_index
        others = [j for j in self.center.indices if j != i]
        out = {}
        for alpha, c in f.terms():
            beta = list(alpha)
            beta[i] = alpha[i] + sum(alpha[j] for j in others)
            if sum(beta) > f.trunc:
                continue
            key = tuple(beta)
            prev = out.get(key)
            out[key] = c if prev is None else prev + c
        return Jet(f.nvars, f.trunc, out)

    def components(self, trunc: int) -> PolyMap:
        """The chart substitution as an exact polynomial map (parent of child)."""
        n = self.nvars
        i = self.chart_index
        comps = []
        for j in range(n):
            if j == i or j not in self.center.indices:
                comps.append(Jet.variable(j, n, trunc))
            else:
                comps.append(Jet.variable(i, n, trunc) * Jet.variable(j, n, trunc))
        return PolyMap(comps)


def order_along_center(f: Jet, center: Center) -> OrderResult:
    """Min over stored terms of the total exponent on the center coordinates."""
    return f.order_along(center.indices)


def blowup_pullback(f: Jet, chart: ChartMap) -> Jet:
    return chart.pullback(f)


def weak_transform(f: Jet, chart: ChartMap, d: int) -> Jet:
    """Pullback divided by the d-th power of the exceptional coordinate.

    ``d`` must be the order of f along the center; the division is verified
    exactly and fails loudly if d exceeds the factorable power.
    """
    expected = order_along_center(f, chart.center)
    if not expected.is_finite or expected.value != d:
        raise ValueError(
            f"declared multiplicity {d} does not match the order along the center ({expected})"
        )
    g = chart.pullback(f)
    out = g
    for _ in range(d):
        out = out.divide_by_coordinate(chart.exceptional_index)
    return out


def strict_transform_hypersurface(g: Jet, chart: ChartMap) -> tuple[int, Jet]:
    """Factor the maximal exceptional power from the pullback.

    For hypersurfaces this coincides with the weak transform; returns the
    factored exponent together with the transform.
    """
    if g.is_zero():
        raise ValueError("strict transform of the zero jet is undefined")
    pulled = chart.pullback(g)
    return pulled.factor_coordinate_power(chart.exceptional_index)


def equimultiple_generators(g: Jet, d: int) -> list[Jet]:
    """All partials D^alpha g with |alpha| < d; they cut out the d-fold locus."""
    if d < 1:
        raise ValueError("multiplicity must be at least 1")
    if d > g.trunc:
        raise ValueError("multiplicity exceeds the certified truncation")
    from itertools import product

    out = []
    alphas = [
        a
        for a in product(range(d), repeat=g.nvars)
        if sum(a) < d
    ]
    alphas.sort(key=grlex_key)
    for alpha in alphas:
        h = g
        for i, e in enumerate(alpha):
            h = h.nth_partial(i, e)
        out.append(h)
    return out


@dataclass(frozen=True)
class CenterOrderReport:
    ok: bool
    center_order: OrderResult
    sample_orders: tuple
    achieved_at: int | None  # index of a sample achieving equality


def center_order_consistency(g: Jet, center: Center, samples) -> CenterOrderReport:
    """Check order-along-center <= pointwise order on the center, with equality.

    Every sample must lie on the center; the pointwise order at a sample is
    the order at the origin after recentering.  Equality must be achieved at
    at least one sample (generic rational samples achieve it).
    """
    mu_c = order_along_center(g, center)
    orders = []
    achieved = None
    for k, pt in enumerate(samples):
        pt = list(pt)
        if any(pt[i] != 0 for i in center.indices):
            raise ValueError(f"sample {pt} is not on the center")
        local = g.recenter(pt).order()
        orders.append(local)
        if mu_c.is_finite and local.is_finite:
            if local.value < mu_c.value:
                return CenterOrderReport(False, mu_c, tuple(orders), None)
            if local.value == mu_c.value and achieved is None:
                achieved = k
    ok = (not mu_c.is_finite) or achieved is not None
    return CenterOrderReport(ok, mu_c, tuple(orders), achieved)


@dataclass(frozen=True)
class DerivativeTransformReport:
    ok: bool
    results: tuple  # (j, case, holds)


def check_derivative_transforms(f: Jet, center: Center, i: int, e: int) -> DerivativeTransformReport:
    """Exact identities relating derivatives of f to derivatives of its transform.

    In chart i, with h = (f o sigma) / y_i^e (valid when the order of f along
    the center is at least e >= 1):

      j not in center:   (df/dx_j o sigma) / y_i^{e-1} = y_i d/dy_j h
      j in center, != i: (df/dx_j o sigma) / y_i^{e-1} = d/dy_j h
      j = i:             (df/dx_i o sigma) / y_i^{e-1}
                             = e h + y_i d/dy_i h - sum_{j in center, != i} y_j d/dy_j h

    All three are checked as exact jet equalities at the common truncation.
    """
    if e < 1:
        raise ValueError("the transform identities need e >= 1")
    mu = order_along_center(f, center)
    if not mu.is_finite or mu.value < e:
        raise ValueError(f"order along center ({mu}) is below e = {e}")
    chart = ChartMap(center, i)
    n = f.nvars
    pulled = chart.pullback(f)
    h = pulled
    for _ in range(e):
        h = h.divide_by_coordinate(i)
    results = []
    ok = True
    for j in range(n):
        lhs = chart.pullback(f.partial(j))
        for _ in range(e - 1):
            lhs = lhs.divide_by_coordinate(i)
        if j == i:
            rhs = h.scale(e).with_truncation(h.trunc - 1) + Jet.variable(
                i, n, h.trunc - 1
            ) * h.partial(i)
            for k in center.indices:
                if k != i:
                    rhs = rhs - Jet.variable(k, n, h.trunc - 1) * h.partial(k)
            case = "chart-index"
        elif j in center.indices:
            rhs = h.partial(j)
            case = "in-center"
        else:
            rhs = Jet.variable(i, n, h.trunc - 1) * h.partial(j)
            case = "off-center"
        T = min(lhs.trunc, rhs.trunc)
        holds = lhs.with_truncation(T) == rhs.with_truncation(T)
        ok = ok and holds
        results.append((j, case, holds))
    return DerivativeTransformReport(ok, tuple(results))


# -- exceptional bookkeeping ---------------------------------------------------

ORIGIN_STRICT = "strict-transform"
ORIGIN_NEW = "new"


@dataclass(frozen=True)
class LedgerEntry:
    """One tracked exceptional hypersurface in current chart coordinates."""

    eid: int
    jet: Jet
    origin: str  # ORIGIN_STRICT or ORIGIN_NEW

    def __post_init__(self):
        o = self.jet.order()
        if o.is_finite and o.value > 1:
            raise ValueError(
                f"exceptional entry {self.eid} is not smooth at the origin (order {o})"
            )

    @property
    def through_origin(self) -> bool:
        return self.jet.constant_term == 0 and not self.jet.is_zero()


class ExceptionalLedger:
    """Immutable ordered collection of exceptional hypersurfaces.

    Entry ids are never reused along a resolution path: the ledger carries a
    watermark that survives even when every entry departs from a chart.
    """

    __slots__ = ("entries", "watermark")

    def __init__(self, entries=(), watermark=0):
        entries = tuple(entries)
        object.__setattr__(self, "entries", entries)
        top = max((e.eid for e in entries), default=-1) + 1
        object.__setattr__(self, "watermark", max(watermark, top))

    def __setattr__(self, name, value):
        raise AttributeError("ExceptionalLedger is immutable")

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def through_origin(self):
        return [e for e in self.entries if e.through_origin]

    def with_entry(self, entry: LedgerEntry) -> "ExceptionalLedger":
        return ExceptionalLedger(self.entries + (entry,), self.watermark)

    def map_jets(self, fn) -> "ExceptionalLedger":
        """Apply a coordinate transformation to every defining jet."""
        return ExceptionalLedger(
            (LedgerEntry(e.eid, fn(e.jet), e.origin) for e in self.entries),
            self.watermark,
        )

    def next_id(self) -> int:
        return self.watermark


@dataclass(frozen=True)
class MarkedFunction:
    """A jet with an assigned multiplicity mark (required vanishing order)."""

    jet: Jet
    mark: int

    def __post_init__(self):
        if self.mark < 1:
            raise ValueError("marks start at 1")


@dataclass(frozen=True)
class CrossingsReport:
    ok: bool
    assignments: tuple  # (position, coordinate) for entries through the origin
    reason: str | None = None


def normal_crossings_check(jets, extra: Jet | None = None) -> CrossingsReport:
    """Certify that the given hypersurfaces cross normally at the origin.

    Entries not vanishing at the origin are skipped (no constraint there).
    Every entry through the origin must have order exactly one and the
    gradients at the origin must be linearly independent; that is exactly the
    existence of a coordinate system where each becomes a coordinate
    hyperplane.  The report carries a pivot assignment for readability.
    """
    family = list(jets)
    if extra is not None:
        family.append(extra)
    rows = []
    tags = []
    for pos, f in enumerate(family):
        if f.is_zero():
            return CrossingsReport(False, (), f"entry {pos} vanishes identically to truncation")
        if f.constant_term != 0:
            continue
        o = f.order()
        if o.value != 1:
            return CrossingsReport(False, (), f"entry {pos} has order {o.value} at the origin")
        rows.append(list(f.gradient_at_zero()))
        tags.append(pos)
    # exact rank computation with pivot tracking
    n = len(rows[0]) if rows else 0
    assignments = []
    work = [row[:] for row in rows]
    used_cols = set()
    for r in range(len(work)):
        pivot_col = next(
            (c for c in range(n) if c not in used_cols and work[r][c] != 0), None
        )
        if pivot_col is None:
            return CrossingsReport(
                False, tuple(assignments), f"gradients are dependent at entry {tags[r]}"
            )
        used_cols.add(pivot_col)
        assignments.append((tags[r], pivot_col))
        inv = Fraction(1) / work[r][pivot_col]
        for rr in range(len(work)):
            if rr != r and work[rr][pivot_col] != 0:
                fct = work[rr][pivot_col] * inv
                work[rr] = [a - fct * b for a, b in zip(work[rr], work[r])]
    return CrossingsReport(True, tuple(assignments), None)


def jacobian_determinant(charts, trunc: int) -> Jet:
    """Determinant of the Jacobian of a composite of chart maps, as a jet.

    ``charts`` lists the maps from first applied to last; a single chart on a
    center of codimension kappa gives (plus or minus) y_i^{kappa - 1}.
    """
    charts = list(charts)
    if not charts:
        raise ValueError("need at least one chart")
    composite = charts[0].components(trunc)
    for chart in charts[1:]:
        composite = compose_maps(composite, chart.components(trunc))
    return composite.jacobian_det()
