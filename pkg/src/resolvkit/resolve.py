"""Constructive desingularization of hypersurface germs, with audited trees.

The driver works on germs at chart origins, entirely in exact arithmetic.
One *phase* consists of: a coordinate preparation (a linear change making the
pure derivative of top order nonvanishing, then a shear moving the maximal
contact hypersurface onto {x_n = 0}), extraction of marked coefficient data on
the contact hypersurface, a reduction making all data monomial times unit
(recursively, in one fewer variable, lifted back up chart by chart), and a
loop of combinatorially chosen blow-ups that strictly decreases the scaled
exponent data until the local invariant pair drops.

Every zero test on a jet is only "zero up to the certified truncation"; each
such decision is recorded in the output tree as an auditable assumption.  The
tree carries enough per-node data (preparation, center, chart index) for an
independent replay: the verifier recomputes every leaf from the input and the
chart formulas alone, without reusing any driver state.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from itertools import combinations, product
from math import factorial

from .blowup import (
    Center,
    ChartMap,
    ExceptionalLedger,
    LedgerEntry,
    MarkedFunction,
    ORIGIN_NEW,
    ORIGIN_STRICT,
    normal_crossings_check,
    order_along_center,
)
from .series import (
    Jet,
    PolyMap,
    ShapeError,
    TruncationError,
    compose_maps,
    implicit_solve,
    linear_change,
    substitute,
)

RESOLVE = "resolve"
MONOMIALIZE = "monomialize"
RECTILINEARIZE = "rectilinearize"


class BudgetError(RuntimeError):
    """A blow-up budget (per path or per phase stretch) was exhausted."""


class AlgorithmError(AssertionError):
    """An internal invariant failed; the run aborts rather than guess."""


@dataclass(frozen=True)
class RunConfig:
    truncation: int = 24
    max_blowups: int = 64
    base_points: tuple = ()
    parallel: bool = False

    def __post_init__(self):
        if self.truncation < 4:
            raise ValueError("truncation must be at least 4")
        if self.max_blowups < 1:
            raise ValueError("max_blowups must be at least 1")


# -- scaled exponent vectors ----------------------------------------------------


@dataclass(frozen=True)
class OmegaScaled:
    """Rational exponent vector stored as naturals scaled by the phase factorial."""

    entries: tuple
    scale: int

    def __post_init__(self):
        if self.scale < 1 or any(e < 0 for e in self.entries):
            raise ValueError("scaled exponents must be natural numbers")

    @property
    def total(self) -> int:
        return sum(self.entries)

    def le(self, other: "OmegaScaled") -> bool:
        return all(a <= b for a, b in zip(self.entries, other.entries))

    def updated(self, center_positions, i: int) -> "OmegaScaled":
        """Exponent update in chart i: entry i becomes the center sum minus one."""
        s = sum(self.entries[j] for j in center_positions)
        new = s - self.scale
        if new < 0:
            raise AlgorithmError("exponent update went negative; data were not comparable")
        entries = list(self.entries)
        entries[i] = new
        return OmegaScaled(tuple(entries), self.scale)


def least_omega(omegas: dict):
    """Key and value of the componentwise least vector; aborts if none exists."""
    items = sorted(omegas.items(), key=lambda kv: (kv[1].entries, str(kv[0])))
    key, om = items[0]
    for _, o2 in items[1:]:
        if not om.le(o2):
            raise AlgorithmError(
                f"exponent data are not totally ordered: {om.entries} vs {o2.entries}"
            )
    return key, om


def monomial_centers(omega: OmegaScaled) -> list:
    """Minimal index sets with scaled sum at least the scale, as ambient centers.

    Entries index the contact-hypersurface coordinates 0..m-1; the returned
    centers live in the ambient m+1 variables with the contact coordinate m
    adjoined.  Ordered by (size, indices); the first is the canonical pick.
    """
    m = len(omega.entries)
    out = []
    for size in range(1, m + 1):
        for I in combinations(range(m), size):
            s = sum(omega.entries[j] for j in I)
            if s >= omega.scale and all(s - omega.scale < omega.entries[i] for i in I):
                out.append(Center(tuple(I) + (m,), m + 1))
    if not out:
        raise ValueError("total exponent below one: the invariant pair already dropped")
    return out


# -- local models ----------------------------------------------------------------


@dataclass(frozen=True)
class LocalModel:
    """Snapshot of one germ: defining jet, exceptional ledger, invariants."""

    g: Jet
    ledger: ExceptionalLedger
    d: int
    s: int
    prepared: bool = False

    @property
    def nvars(self) -> int:
        return self.g.nvars


def _model(g: Jet, ledger: ExceptionalLedger, prepared=False) -> LocalModel:
    o = g.order()
    d = o.value if o.is_finite else 0
    s = len(ledger.through_origin())
    return LocalModel(g, ledger, d, s, prepared)


@dataclass(frozen=True)
class Preparation:
    """Coordinate work preceding a phase: optional linear change, then a shear
    of the last variable by a series in the others."""

    matrix: tuple | None
    shear: Jet | None  # jet in the first n-1 variables

    @property
    def is_trivial(self) -> bool:
        return self.matrix is None and self.shear is None

    def as_map(self, n: int, trunc: int) -> PolyMap:
        """Parent coordinates as functions of the prepared coordinates."""
        t = trunc if self.shear is None else min(trunc, self.shear.trunc)
        comps = [Jet.variable(j, n, t) for j in range(n)]
        if self.shear is not None:
            comps[n - 1] = comps[n - 1] + self.shear.with_truncation(t).insert_var(n - 1)
        if self.matrix is not None:
            lin = PolyMap.from_matrix(self.matrix, t)
            comps = [substitute(l, comps) for l in lin.components]
        return PolyMap(comps)


def _apply_prep(jet: Jet, prep: Preparation) -> Jet:
    if prep.matrix is not None:
        jet = linear_change(jet, prep.matrix)
    if prep.shear is not None:
        n = jet.nvars
        phi = prep.shear.insert_var(n - 1)
        t = min(jet.trunc, phi.trunc)
        comps = [Jet.variable(j, n, t) for j in range(n - 1)]
        comps.append(Jet.variable(n - 1, n, t) + phi.with_truncation(t))
        jet = substitute(jet, comps)
    return jet


def _apply_prep_model(model: LocalModel, prep: Preparation) -> LocalModel:
    g = _apply_prep(model.g, prep)
    ledger = model.ledger.map_jets(lambda jet: _apply_prep(jet, prep))
    return _model(g, ledger, prepared=True)


def _direction_candidates(n: int, cap: int):
    """Deterministic order: current last variable, the other standard
    directions, then integer vectors of increasing max-norm."""
    yield tuple(1 if j == n - 1 else 0 for j in range(n))
    for i in range(n - 1):
        yield tuple(1 if j == i else 0 for j in range(n))
    for bound in range(1, cap + 1):
        for v in product(range(-bound, bound + 1), repeat=n):
            if max(abs(a) for a in v) != bound:
                continue
            nz = next((a for a in v if a != 0), 0)
            if nz < 0:
                continue
            if sum(1 for a in v if a != 0) == 1:
                continue
            yield v


def _form_value(form_coeffs, v) -> Fraction:
    total = Fraction(0)
    for alpha, c in form_coeffs.items():
        term = Fraction(c)
        for a, e in zip(v, alpha):
            if e:
                term *= Fraction(a) ** e
        total += term
    return total


def _rank(vectors) -> int:
    work = [list(map(Fraction, v)) for v in vectors]
    n = len(work[0]) if work else 0
    rank = 0
    used = set()
    for row in work:
        piv = next((c for c in range(n) if c not in used and row[c] != 0), None)
        if piv is None:
            continue
        used.add(piv)
        rank += 1
        inv = Fraction(1) / row[piv]
        for other in work:
            if other is not row and other[piv] != 0:
                f = other[piv] * inv
                for c in range(n):
                    other[c] -= f * row[c]
    return rank


def _complete_basis(target, n: int):
    """Matrix whose last column is the target direction, completed greedily by
    standard basis vectors in ascending index order."""
    chosen = []
    target_col = [Fraction(a) for a in target]
    for j in range(n):
        if len(chosen) == n - 1:
            break
        trial = chosen + [[Fraction(1 if r == j else 0) for r in range(n)], target_col]
        if _rank(trial) == len(trial):
            chosen.append([Fraction(1 if r == j else 0) for r in range(n)])
    cols = chosen + [target_col]
    if len(cols) != n:
        raise AlgorithmError("failed to complete the direction to a basis")
    return tuple(tuple(cols[c][r] for c in range(n)) for r in range(n))


def prepare_local_model(g: Jet, ledger: ExceptionalLedger, d: int | None = None):
    """Arrange coordinates so the pure order-d derivative in the last variable
    is a unit and the contact hypersurface is exactly {x_n = 0}.

    Returns ``(model, preparation)``.  The direction search is deterministic;
    when the contact solution is the zero jet no shear is applied and no
    certified degrees are spent.
    """
    if g.is_zero():
        raise ValueError("cannot prepare the zero jet")
    o = g.order()
    d = o.value if d is None else d
    n = g.nvars
    if d < 1:
        raise ValueError("preparation needs a vanishing germ")
    if d >= g.trunc:
        raise TruncationError(f"order {d} is too close to the certified degree {g.trunc}")
    form = {a: c for a, c in g.terms() if sum(a) == d}
    direction = None
    for v in _direction_candidates(n, cap=d + 2):
        if _form_value(form, v) != 0:
            direction = v
            break
    if direction is None:
        raise AlgorithmError("no direction found for a nonzero form")
    matrix = None
    if direction != tuple(1 if j == n - 1 else 0 for j in range(n)):
        matrix = _complete_basis(direction, n)
        step = Preparation(matrix, None)
        g = _apply_prep(g, step)
        ledger = ledger.map_jets(lambda jet: _apply_prep(jet, step))
    z = g.nth_partial(n - 1, d - 1)
    phi = implicit_solve(z, n - 1)
    shear = None
    if not phi.is_zero():
        shear = phi
        step = Preparation(None, shear)
        g = _apply_prep(g, step)
        ledger = ledger.map_jets(lambda jet: _apply_prep(jet, step))
    z2 = g.nth_partial(n - 1, d - 1)
    u = z2.divide_by_coordinate(n - 1)
    if u.constant_term == 0:
        raise AlgorithmError("contact normalization failed to produce a unit")
    return _model(g, ledger, prepared=True), Preparation(matrix, shear)


def coefficient_data(model: LocalModel, d: int | None = None):
    """Marked restrictions to the contact hypersurface {x_n = 0}.

    Returns ``(cs, bs)``: cs[q] is the restriction of the q-th pure derivative
    of g with mark d - q for q = 0..d-2 (None when zero up to truncation), and
    bs[eid] the restriction of each through-origin exceptional with mark 1.
    """
    if not model.prepared:
        raise ValueError("coefficient data needs a prepared model")
    d = model.d if d is None else d
    n = model.nvars
    cs = {}
    for q in range(0, max(0, d - 1)):
        jet = model.g.nth_partial(n - 1, q).restrict_set_zero(n - 1)
        cs[q] = None if jet.is_zero() else MarkedFunction(jet, d - q)
    bs = {}
    for entry in model.ledger.through_origin():
        jet = entry.jet.restrict_set_zero(n - 1)
        bs[entry.eid] = None if jet.is_zero() else MarkedFunction(jet, 1)
    return cs, bs


def pair_locus_description(model: LocalModel) -> list:
    """Marked generators cutting out the equimultiple locus of the invariant
    pair inside the contact hypersurface."""
    cs, bs = coefficient_data(model)
    gens = [mf for _, mf in sorted(cs.items()) if mf is not None]
    gens += [mf for _, mf in sorted(bs.items()) if mf is not None]
    return gens


def geometric_smoothness(model: LocalModel) -> bool:
    """True when every contact coefficient vanishes up to the truncation."""
    cs, _ = coefficient_data(model)
    return all(mf is None for mf in cs.values())


def _phase_for(model: LocalModel) -> "_PhaseState":
    d = model.d
    cs, bs = coefficient_data(model, d)
    active_c = tuple(q for q, mf in sorted(cs.items()) if mf is not None)
    old_ids = tuple(e.eid for e in model.ledger.through_origin())
    return _PhaseState(
        d=d,
        scale=factorial(d),
        front_entry=None,
        old_ids=old_ids,
        c_keys=active_c,
        start_pair=(d, len(old_ids)),
    )


def to_monomial_case(model: LocalModel, config: RunConfig | None = None):
    """Bring the marked data of a prepared model into monomial form.

    When every datum is already monomial times unit with pairwise comparable
    exponents, the model is returned unchanged with its scaled exponent
    vectors.  Otherwise the product of the powered data and their pairwise
    differences is monomialized by a recursive lower-dimensional run whose
    blow-ups are lifted back into the ambient frame; one transformed model is
    returned per resulting chart.
    """
    config = config or RunConfig()
    if not model.prepared:
        raise ValueError("the model must be prepared first")
    phase = _phase_for(model)
    data = _collect_data(model, phase)
    if not data:
        raise ValueError("all marked data vanish; there is nothing to monomialize")
    if _all_monomial_comparable(data):
        return [(model, _omega_of(data, phase))]
    assumptions = []
    prod_jet = _reduction_product(data, phase.scale, assumptions)
    sub_ctx = _Ctx(config=config, mode=MONOMIALIZE)
    sub_children = _run_germ(prod_jet, ExceptionalLedger(), sub_ctx, 0)
    sub_children = _absorb_in_drafts(sub_children, sub_ctx)
    out = []

    def walk(nodes, umodel):
        for sd in nodes:
            if sd.kind == KIND_LEAF:
                data2 = _collect_data(umodel, phase)
                if not data2:
                    out.append((umodel, {}))
                    continue
                if not _all_monomial_comparable(data2):
                    raise AlgorithmError(
                        "reduction finished but the data are not monomial and comparable"
                    )
                out.append((umodel, _omega_of(data2, phase)))
                continue
            child_model, _ = _lift_transform(sd, umodel)
            walk(sd.children, child_model)

    walk(sub_children, model)
    return out


def monomial_step(model: LocalModel, omegas: dict):
    """Blow up the canonical combinatorial center once.

    Returns ``(center, results)`` where results holds one entry per chart:
    ``(chart_index, child_model, updated_omegas)``; the contact chart (where
    the invariant pair always drops) carries ``None`` instead of updates.
    """
    if not model.prepared:
        raise ValueError("the model must be prepared first")
    _, omega = least_omega(omegas)
    center = monomial_centers(omega)[0]
    n = model.nvars
    m = n - 1
    d = model.d
    positions = [i for i in center.indices if i != m]
    results = []
    for i in center.indices:
        chart = ChartMap(center, i)
        mu = order_along_center(model.g, center)
        if not mu.is_finite or mu.value != d:
            raise AlgorithmError("the chosen center is not equimultiple for the hypersurface")
        g2 = chart.pullback(model.g)
        for _ in range(d):
            g2 = g2.divide_by_coordinate(i)
        ledger2 = _transform_ledger(model.ledger, chart)
        ledger2 = _new_exceptional(ledger2, i, n, g2.trunc)
        child = _model(g2, ledger2, prepared=True)
        updated = None
        if i != m:
            updated = {k: om.updated(positions, i) for k, om in omegas.items()}
        results.append((i, child, updated))
    return center, results


# -- tree -------------------------------------------------------------------------

KIND_COVERING = "CoveringPiece"
KIND_BLOWUP = "BlowupChart"
KIND_LEAF = "Leaf"


class Node:
    __slots__ = (
        "kind",
        "children",
        "base_point",
        "prep",
        "center",
        "chart_index",
        "identity",
        "pair",
        "s_total",
        "omega",
        "assumptions",
        "budget",
        "leaf",
        "model",
        "nid",
        "parent_id",
        "blowup_index",
    )

    def __init__(self, kind, **kw):
        self.kind = kind
        self.children = list(kw.get("children", ()))
        self.base_point = kw.get("base_point")
        self.prep = kw.get("prep")
        self.center = kw.get("center")
        self.chart_index = kw.get("chart_index")
        self.identity = kw.get("identity", False)
        self.pair = kw.get("pair")
        self.s_total = kw.get("s_total")
        self.omega = kw.get("omega")
        self.assumptions = list(kw.get("assumptions", ()))
        self.budget = kw.get("budget")
        self.leaf = kw.get("leaf")
        self.model = kw.get("model")
        self.nid = None
        self.parent_id = None
        self.blowup_index = 0


class ResolutionTree:
    """Finished run: nodes in depth-first order with parent links."""

    def __init__(self, mode, config, input_jets, var_names, roots):
        self.mode = mode
        self.config = config
        self.input_jets = tuple(input_jets)
        self.var_names = tuple(var_names)
        self.nodes = []
        self._flatten(roots)

    def _flatten(self, roots):
        self.nodes = []

        def walk(node, parent_id, blowups):
            node.nid = len(self.nodes)
            node.parent_id = parent_id
            if node.kind == KIND_BLOWUP and not node.identity:
                blowups += 1
            node.blowup_index = blowups
            self.nodes.append(node)
            for child in node.children:
                walk(child, node.nid, blowups)

        for root in roots:
            walk(root, None, 0)

    def roots(self):
        return [n for n in self.nodes if n.parent_id is None]

    def leaves(self):
        return [n for n in self.nodes if n.kind == KIND_LEAF]

    def node_by_id(self, nid: int):
        for n in self.nodes:
            if n.nid == nid:
                return n
        raise KeyError(f"no node with id {nid}")

    def path_to(self, nid: int):
        out = []
        node = self.node_by_id(nid)
        while node is not None:
            out.append(node)
            node = self.node_by_id(node.parent_id) if node.parent_id is not None else None
        return list(reversed(out))

    @property
    def blowup_count(self) -> int:
        """Number of blow-up events: sibling chart nodes count once."""
        events = {
            n.parent_id for n in self.nodes if n.kind == KIND_BLOWUP and not n.identity
        }
        return len(events)

    @property
    def assumptions(self):
        return [(n.nid, a) for n in self.nodes for a in n.assumptions]

    @property
    def all_leaves_passed(self) -> bool:
        return all(n.leaf and n.leaf.get("passed") for n in self.leaves())

    def smooth_after(self) -> int:
        """Blow-ups needed before the strict transform has order at most one
        at every chart origin from there on (maximized over leaves)."""
        best = 0
        for leaf in self.leaves():
            k = None
            for node in self.path_to(leaf.nid):
                if node.pair is not None and node.pair[0] <= 1:
                    k = node.blowup_index
                    break
            if k is None:
                k = leaf.blowup_index + 1
            best = max(best, k)
        return best

    # -- serialization ------------------------------------------------------

    def composed_map_to(self, nid: int) -> PolyMap:
        """Input coordinates as explicit formulas in the node's coordinates."""
        n = self.input_jets[0].nvars
        composed = PolyMap.identity(n, self.input_jets[0].trunc)
        for node in self.path_to(nid):
            step = _node_step_map(node, n, composed.trunc)
            if step is not None:
                composed = compose_maps(composed, step)
        return composed

    def to_json_dict(self) -> dict:
        nodes = []
        for n in self.nodes:
            nd = _node_json(n)
            if n.kind == KIND_LEAF:
                nd["composed_map"] = [
                    _jet_json(c) for c in self.composed_map_to(n.nid).components
                ]
            nodes.append(nd)
        return {
            "format": "resolvkit-tree/1",
            "mode": self.mode,
            "config": {
                "truncation": self.config.truncation,
                "max_blowups": self.config.max_blowups,
                "parallel": self.config.parallel,
            },
            "variables": list(self.var_names),
            "input": [_jet_json(j) for j in self.input_jets],
            "nodes": nodes,
            "summary": {
                "blowup_count": self.blowup_count,
                "leaf_count": len(self.leaves()),
                "smooth_after": self.smooth_after(),
                "all_leaves_passed": self.all_leaves_passed,
                "assumption_count": len(self.assumptions),
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=1)

    def to_dot(self) -> str:
        lines = ["digraph resolution {", "  node [shape=box, fontsize=10];"]
        for n in self.nodes:
            if n.kind == KIND_LEAF:
                ok = bool(n.leaf and n.leaf.get("passed"))
                color = "palegreen" if ok else "lightcoral"
                lines.append(
                    f'  n{n.nid} [label="leaf {n.nid}\\npair={n.pair}", '
                    f"style=filled, fillcolor={color}];"
                )
            elif n.kind == KIND_BLOWUP:
                tag = "identity " if n.identity else ""
                ctr = "coordinate change" if n.center is None else f"center={list(n.center)} chart={n.chart_index}"
                lines.append(
                    f'  n{n.nid} [label="{tag}blow-up {n.nid}\\n{ctr}\\npair={n.pair}"];'
                )
            else:
                base = None if n.base_point is None else [str(x) for x in n.base_point]
                lines.append(f'  n{n.nid} [label="piece {n.nid}\\nbase={base}"];')
        for n in self.nodes:
            if n.parent_id is not None:
                lines.append(f"  n{n.parent_id} -> n{n.nid};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _jet_json(j: Jet) -> dict:
    return {
        "nvars": j.nvars,
        "trunc": j.trunc,
        "terms": [[list(a), str(c)] for a, c in j.terms()],
    }


def _jet_from_json(d) -> Jet:
    return Jet(d["nvars"], d["trunc"], {tuple(a): Fraction(c) for a, c in d["terms"]})


def _node_json(n: Node) -> dict:
    prep = None
    if n.prep is not None and not n.prep.is_trivial:
        prep = {
            "matrix": None
            if n.prep.matrix is None
            else [[str(x) for x in row] for row in n.prep.matrix],
            "shear": None if n.prep.shear is None else _jet_json(n.prep.shear),
        }
    leaf = None
    if n.leaf is not None:
        leaf = {k: v for k, v in n.leaf.items() if k not in ("strict_transform", "ledger")}
        leaf["strict_transform"] = _jet_json(n.leaf["strict_transform"])
        leaf["ledger"] = [
            {"eid": e.eid, "origin": e.origin, "jet": _jet_json(e.jet)}
            for e in n.leaf["ledger"]
        ]
    return {
        "id": n.nid,
        "parent": n.parent_id,
        "kind": n.kind,
        "base_point": None if n.base_point is None else [str(x) for x in n.base_point],
        "prep": prep,
        "center_indices": None if n.center is None else list(n.center),
        "chart_index": n.chart_index,
        "identity": n.identity,
        "invariant_pair": None if n.pair is None else list(n.pair),
        "s_total": n.s_total,
        "omega_scaled": n.omega,
        "assumptions": list(n.assumptions),
        "budget": n.budget,
        "blowup_index": n.blowup_index,
        "leaf_checks": leaf,
    }


def tree_from_json_dict(data: dict) -> "ResolutionTree":
    """Rebuild a tree object from its JSON form for re-auditing."""
    cfg = RunConfig(
        truncation=data["config"]["truncation"],
        max_blowups=data["config"]["max_blowups"],
        parallel=data["config"]["parallel"],
    )
    tree = ResolutionTree.__new__(ResolutionTree)
    tree.mode = data["mode"]
    tree.config = cfg
    tree.input_jets = tuple(_jet_from_json(j) for j in data["input"])
    tree.var_names = tuple(data["variables"])
    tree.nodes = []
    for nd in data["nodes"]:
        node = Node(nd["kind"])
        node.nid = nd["id"]
        node.parent_id = nd["parent"]
        node.base_point = (
            None
            if nd["base_point"] is None
            else tuple(Fraction(x) for x in nd["base_point"])
        )
        if nd["prep"] is not None:
            mat = nd["prep"]["matrix"]
            node.prep = Preparation(
                None
                if mat is None
                else tuple(tuple(Fraction(x) for x in row) for row in mat),
                None if nd["prep"]["shear"] is None else _jet_from_json(nd["prep"]["shear"]),
            )
        node.center = None if nd["center_indices"] is None else tuple(nd["center_indices"])
        node.chart_index = nd["chart_index"]
        node.identity = nd["identity"]
        node.pair = None if nd["invariant_pair"] is None else tuple(nd["invariant_pair"])
        node.s_total = nd["s_total"]
        node.omega = nd["omega_scaled"]
        node.assumptions = list(nd["assumptions"])
        node.budget = nd["budget"]
        node.blowup_index = nd["blowup_index"]
        if nd["leaf_checks"] is not None:
            leaf = dict(nd["leaf_checks"])
            leaf["strict_transform"] = _jet_from_json(leaf["strict_transform"])
            leaf["ledger"] = [
                LedgerEntry(e["eid"], _jet_from_json(e["jet"]), e["origin"])
                for e in leaf["ledger"]
            ]
            node.leaf = leaf
        tree.nodes.append(node)
    for node in tree.nodes:
        node.children = [m for m in tree.nodes if m.parent_id == node.nid]
    return tree


# -- the driver ---------------------------------------------------------------------


@dataclass
class _Ctx:
    config: RunConfig
    mode: str


@dataclass(frozen=True)
class _PhaseState:
    d: int  # strict-transform multiplicity at phase start (0 when the front
    # is an exceptional equation)
    scale: int
    front_entry: int | None
    old_ids: tuple
    c_keys: tuple
    start_pair: tuple
    stretch_limit: int = 0
    stretch_step: int = 0


def _new_exceptional(ledger: ExceptionalLedger, chart_var: int, nvars: int, trunc: int):
    return ledger.with_entry(
        LedgerEntry(ledger.next_id(), Jet.variable(chart_var, nvars, trunc), ORIGIN_NEW)
    )


def _transform_ledger(ledger: ExceptionalLedger, chart: ChartMap):
    """Strict transforms through one chart; departed entries are dropped."""
    entries = []
    for e in ledger:
        pulled = chart.pullback(e.jet)
        if pulled.is_zero():
            raise AlgorithmError(f"exceptional entry {e.eid} vanished under pullback")
        power, core = pulled.factor_coordinate_power(chart.exceptional_index)
        if power > 1:
            raise AlgorithmError(f"exceptional entry {e.eid} is not smooth along the center")
        if core.constant_term != 0:
            continue
        entries.append(LedgerEntry(e.eid, core, ORIGIN_STRICT))
    return ExceptionalLedger(entries, ledger.watermark)


def _pair_at(model: LocalModel, phase: _PhaseState | None):
    if phase is None:
        return (model.d, model.s)
    through = {e.eid for e in model.ledger.through_origin()}
    return (model.d, len([i for i in phase.old_ids if i in through]))


def _check_path_budget(ctx: _Ctx, depth: int):
    if depth > ctx.config.max_blowups:
        raise BudgetError(
            f"a path exceeded the configured blow-up budget ({ctx.config.max_blowups})"
        )


def _run_children(tasks, ctx: _Ctx):
    if ctx.config.parallel and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=len(tasks)) as ex:
            futures = [ex.submit(t) for t in tasks]
            return [f.result() for f in futures]
    return [t() for t in tasks]


def _leaf_node(model: LocalModel, passed: bool, extra=None, assumptions=()):
    checks = {
        "strict_order": model.g.order().value,
        "crossings_ok": passed,
        "passed": passed,
        "strict_transform": model.g,
        "ledger": list(model.ledger),
    }
    if extra:
        checks.update(extra)
    return Node(
        KIND_LEAF,
        pair=(model.d, model.s),
        s_total=model.s,
        leaf=checks,
        model=model,
        assumptions=assumptions,
    )


def _continue(model: LocalModel, ctx: _Ctx, depth: int):
    """Decide what happens at this chart origin; returns the child drafts."""
    g = model.g
    if g.is_zero():
        return [
            _leaf_node(
                model,
                passed=True,
                extra={"degenerate_zero": True},
                assumptions=[f"input treated as 0 (certified to degree {g.trunc})"],
            )
        ]
    d = model.d
    through = model.ledger.through_origin()
    if d == 0:
        rep = normal_crossings_check([e.jet for e in through])
        if rep.ok:
            return [_leaf_node(model, passed=True)]
        return _phase(model, ctx, depth, front_entry=max(e.eid for e in through))
    if d == 1:
        rep = normal_crossings_check([e.jet for e in through], extra=g)
        if rep.ok:
            return [_leaf_node(model, passed=True)]
        return _phase(model, ctx, depth, front_entry=None)
    return _phase(model, ctx, depth, front_entry=None)


def _phase(model: LocalModel, ctx: _Ctx, depth: int, front_entry: int | None):
    """One full phase: preparation, data, reduction, monomial-case loop."""
    if front_entry is None:
        d_front = model.d
        _check_trunc(model.g, d_front + 2)
        prepped, prep = prepare_local_model(model.g, model.ledger, d_front)
    else:
        d_front = 1
        front = next(e.jet for e in model.ledger if e.eid == front_entry)
        _check_trunc(front, 3)
        pm, prep = prepare_local_model(front, model.ledger, 1)
        g2 = model.g if prep.is_trivial else _apply_prep(model.g, prep)
        prepped = _model(g2, pm.ledger, prepared=True)
    scale = factorial(d_front) if front_entry is None else 1
    assumptions = []
    if front_entry is None:
        cs, bs = coefficient_data(prepped, d_front)
    else:
        cs = {}
        bs = {}
        n = prepped.nvars
        for entry in prepped.ledger.through_origin():
            if entry.eid == front_entry:
                continue
            jet = entry.jet.restrict_set_zero(n - 1)
            bs[entry.eid] = None if jet.is_zero() else MarkedFunction(jet, 1)
    for q, mf in sorted(cs.items()):
        if mf is None:
            assumptions.append(
                f"contact coefficient q={q} treated as 0 "
                f"(certified to degree {prepped.g.trunc - q})"
            )
    for eid, mf in sorted(bs.items()):
        if mf is None:
            t = next(e.jet.trunc for e in prepped.ledger if e.eid == eid)
            assumptions.append(
                f"exceptional restriction id={eid} treated as 0 (certified to degree {t})"
            )
    active_c = tuple(q for q, mf in sorted(cs.items()) if mf is not None)
    active_b = tuple(eid for eid, mf in sorted(bs.items()) if mf is not None)
    old_ids = tuple(
        e.eid for e in prepped.ledger.through_origin() if e.eid != front_entry
    )
    phase = _PhaseState(
        d=prepped.d if front_entry is None else 0,
        scale=scale,
        front_entry=front_entry,
        old_ids=old_ids,
        c_keys=active_c,
        start_pair=(prepped.d, len(old_ids)),
    )
    if not active_c and not active_b:
        return _finish_phase_no_data(prepped, prep, phase, ctx, depth, assumptions)
    data = _collect_data(prepped, phase)
    if _all_monomial_comparable(data):
        omegas = _omega_of(data, phase)
        return _monomial_loop(prepped, prep, phase, omegas, ctx, depth, assumptions)
    return _reduce_then_loop(prepped, prep, phase, data, ctx, depth, assumptions)


def _check_trunc(g: Jet, need: int):
    if g.trunc < need:
        raise TruncationError(
            f"certified degree {g.trunc} is too small (need at least {need})"
        )


def _collect_data(prepped: LocalModel, phase: _PhaseState):
    """Re-derive the active marked data from the current model (ground truth)."""
    n = prepped.nvars
    d = phase.d if phase.front_entry is None else 1
    data = {}
    for q in phase.c_keys:
        jet = prepped.g.nth_partial(n - 1, q).restrict_set_zero(n - 1)
        if jet.is_zero():
            raise AlgorithmError(
                "a contact coefficient vanished mid-phase; certified degrees exhausted"
            )
        data[("c", q)] = MarkedFunction(jet, d - q)
    through = {e.eid: e for e in prepped.ledger.through_origin()}
    for eid in phase.old_ids:
        if eid not in through or eid == phase.front_entry:
            continue
        jet = through[eid].jet.restrict_set_zero(n - 1)
        if jet.is_zero():
            continue  # tangent entry: handled by the contact blow-up at the end
        data[("b", eid)] = MarkedFunction(jet, 1)
    return data


def _all_monomial_comparable(data) -> bool:
    exps = []
    for mf in data.values():
        dec = mf.jet.monomial_unit_decompose()
        if dec is None:
            return False
        exps.append(dec[0])
    for a in exps:
        for b in exps:
            if not (
                all(x <= y for x, y in zip(a, b)) or all(y <= x for x, y in zip(a, b))
            ):
                return False
    return True


def _omega_of(data, phase: _PhaseState):
    omegas = {}
    for key, mf in sorted(data.items()):
        dec = mf.jet.monomial_unit_decompose()
        if dec is None:
            raise AlgorithmError(f"datum {key} is not monomial times unit")
        alpha, _ = dec
        factor = phase.scale // mf.mark
        omegas[key] = OmegaScaled(tuple(e * factor for e in alpha), phase.scale)
    return omegas


def _omega_json(omegas, phase):
    return {
        "scale": phase.scale,
        "entries": {f"{k[0]}{k[1]}": list(v.entries) for k, v in sorted(omegas.items())},
    }


def _reduction_product(data, scale: int, assumptions):
    """Product of the powered data and their pairwise nonzero differences."""
    items = sorted(data.items())
    powered = []
    for key, mf in items:
        powered.append((key, mf.jet ** (scale // mf.mark)))
    t = min(pj.trunc for _, pj in powered)
    prod_jet = Jet.constant(1, powered[0][1].nvars, t)
    for _, pj in powered:
        prod_jet = prod_jet * pj.with_truncation(t)
    for i in range(len(powered)):
        for j in range(i + 1, len(powered)):
            diff = powered[i][1].with_truncation(t) - powered[j][1].with_truncation(t)
            if diff.is_zero():
                assumptions.append(
                    f"difference of data {powered[i][0]} and {powered[j][0]} "
                    f"treated as 0 (certified to degree {t})"
                )
                continue
            prod_jet = prod_jet * diff
    if prod_jet.is_zero():
        raise TruncationError(
            "the reduction product vanishes to the certified degree; "
            "increase the truncation"
        )
    return prod_jet


def _reduce_then_loop(prepped, prep, phase, data, ctx, depth, assumptions):
    """Monomialize the data by a lower-dimensional run, lifted chart by chart."""
    prod_jet = _reduction_product(data, phase.scale, assumptions)
    sub_ctx = _Ctx(config=ctx.config, mode=MONOMIALIZE)
    sub_children = _run_germ(prod_jet, ExceptionalLedger(), sub_ctx, depth)
    sub_children = _absorb_in_drafts(sub_children, sub_ctx)
    return _lift_walk(sub_children, prepped, prep, phase, ctx, depth, assumptions)


def _lift_prep(prep: Preparation | None):
    if prep is None or prep.is_trivial:
        return None
    matrix = None
    if prep.matrix is not None:
        m = len(prep.matrix)
        rows = [tuple(list(row) + [Fraction(0)]) for row in prep.matrix]
        rows.append(tuple([Fraction(0)] * m + [Fraction(1)]))
        matrix = tuple(rows)
    shear = None
    if prep.shear is not None:
        shear = prep.shear.insert_var(prep.shear.nvars)
    return Preparation(matrix, shear)


def _lift_transform(sd: Node, umodel: LocalModel):
    """Apply one lifted reduction step to the ambient model.

    Returns ``(child_model, lifted_prep)``; for pure coordinate-change nodes
    the child is the transformed model itself.
    """
    lifted_prep = _lift_prep(sd.prep)
    work = umodel if lifted_prep is None else _apply_prep_model(umodel, lifted_prep)
    if sd.center is None:
        return work, lifted_prep
    center = Center(tuple(sd.center), work.nvars)
    chart = ChartMap(center, sd.chart_index)
    mu = order_along_center(work.g, center)
    if mu.is_finite and mu.value != 0:
        raise AlgorithmError("a lifted center met the hypersurface equimultiply")
    g2 = chart.pullback(work.g)
    ledger2 = _transform_ledger(work.ledger, chart)
    ledger2 = _new_exceptional(ledger2, chart.exceptional_index, work.nvars, g2.trunc)
    return _model(g2, ledger2, prepared=True), lifted_prep


def _lift_walk(sub_nodes, umodel, prep, phase, ctx, depth, assumptions):
    """Mirror a reduction subtree in the ambient frame, then resume the phase."""
    out = []
    for sd in sub_nodes:
        if sd.kind == KIND_LEAF:
            data = _collect_data(umodel, phase)
            if not data:
                out.extend(
                    _finish_phase_no_data(umodel, prep, phase, ctx, depth, list(assumptions))
                )
                continue
            if not _all_monomial_comparable(data):
                raise AlgorithmError(
                    "reduction finished but the data are not monomial and comparable"
                )
            omegas = _omega_of(data, phase)
            out.extend(
                _monomial_loop(umodel, prep, phase, omegas, ctx, depth, list(assumptions))
            )
            continue
        if sd.kind != KIND_BLOWUP:
            raise AlgorithmError("unexpected node kind inside a reduction subtree")
        child_model, lifted_prep = _lift_transform(sd, umodel)
        node_prep = _merge_preps(prep, lifted_prep)
        identity = True if sd.center is None else Center(
            tuple(sd.center), umodel.nvars
        ).is_identity_blowup
        if sd.center is not None:
            _check_path_budget(ctx, depth + 1)
        node = Node(
            KIND_BLOWUP,
            prep=node_prep,
            center=None if sd.center is None else tuple(sd.center),
            chart_index=sd.chart_index,
            identity=identity,
            pair=_pair_at(child_model, phase),
            s_total=child_model.s,
            assumptions=list(assumptions) + list(sd.assumptions),
            model=child_model,
        )
        node.children = _lift_walk(
            sd.children,
            child_model,
            None,
            phase,
            ctx,
            depth + (0 if sd.center is None else 1),
            [],
        )
        out.append(node)
    return out


def _merge_preps(a: Preparation | None, b: Preparation | None):
    if a is None or a.is_trivial:
        return b
    if b is None or b.is_trivial:
        return a
    raise AlgorithmError("two coordinate preparations met at one node")


def _finish_phase_no_data(model, prep, phase, ctx, depth, assumptions):
    """No active data at this origin: either finished, or one contact blow-up."""
    n = model.nvars
    tangent = []
    for e in model.ledger.through_origin():
        if phase.front_entry is not None and e.eid == phase.front_entry:
            continue
        if e.jet.restrict_set_zero(n - 1).is_zero():
            tangent.append(e.eid)
    needs_contact = (phase.front_entry is None and phase.d >= 2) or bool(tangent)
    if phase.front_entry is not None and not tangent:
        # the endgame front must itself be absorbed to break the crossing
        through = [e for e in model.ledger.through_origin()]
        rep = normal_crossings_check([e.jet for e in through])
        needs_contact = not rep.ok
    if phase.front_entry is None and phase.d == 1 and not tangent:
        rep = normal_crossings_check(
            [e.jet for e in model.ledger.through_origin()], extra=model.g
        )
        needs_contact = not rep.ok
    if not needs_contact:
        children = _continue(model, ctx, depth)
        return _attach_prep(model, prep, phase, children, assumptions)
    center = Center((n - 1,), n)
    chart = ChartMap(center, n - 1)
    g = chart.pullback(model.g)
    divide = phase.d if phase.front_entry is None else 0
    for _ in range(divide):
        g = g.divide_by_coordinate(n - 1)
    ledger2 = _transform_ledger(model.ledger, chart)
    ledger2 = _new_exceptional(ledger2, n - 1, n, g.trunc)
    child_model = _model(g, ledger2)
    _check_path_budget(ctx, depth + 1)
    node = Node(
        KIND_BLOWUP,
        prep=prep,
        center=center.indices,
        chart_index=n - 1,
        identity=True,
        pair=_pair_at(child_model, phase),
        s_total=child_model.s,
        assumptions=assumptions,
        model=child_model,
    )
    node.children = _continue(child_model, ctx, depth + 1)
    return [node]


def _attach_prep(model, prep, phase, children, assumptions):
    """Record a preparation that produced no blow-up as a coordinate-change node."""
    if prep is None or prep.is_trivial:
        for ch in children:
            ch.assumptions = list(assumptions) + list(ch.assumptions)
        return children
    node = Node(
        KIND_BLOWUP,
        prep=prep,
        center=None,
        chart_index=None,
        identity=True,
        pair=_pair_at(model, phase),
        s_total=model.s,
        assumptions=assumptions,
        model=model,
    )
    node.children = children
    return [node]


def _monomial_loop(model, prep, phase, omegas, ctx, depth, assumptions):
    """Blow up combinatorial centers until the invariant pair drops."""
    _, omega = least_omega(omegas)
    if omega.total < omega.scale:
        raise AlgorithmError("monomial loop entered although the pair dropped")
    if phase.stretch_limit == 0:
        phase = replace(phase, stretch_limit=omega.total, stretch_step=0)
    if phase.stretch_step >= phase.stretch_limit:
        raise BudgetError(
            f"phase stretch exceeded its budget of {phase.stretch_limit} blow-ups"
        )
    center = monomial_centers(omega)[0]
    n = model.nvars
    m = n - 1
    positions = [i for i in center.indices if i != m]

    def make_task(i):
        def task():
            chart = ChartMap(center, i)
            g2 = chart.pullback(model.g)
            if phase.front_entry is None:
                mu = order_along_center(model.g, center)
                if not mu.is_finite or mu.value != phase.d:
                    raise AlgorithmError(
                        "the chosen center is not equimultiple for the hypersurface"
                    )
                for _ in range(phase.d):
                    g2 = g2.divide_by_coordinate(i)
            ledger2 = _transform_ledger(model.ledger, chart)
            ledger2 = _new_exceptional(ledger2, i, n, g2.trunc)
            child = _model(g2, ledger2, prepared=True)
            predicted = None
            if i != m:
                predicted = {k: om.updated(positions, i) for k, om in omegas.items()}
            return _monomial_child(
                child, chart, predicted, prep, phase, ctx, depth, assumptions, i
            )

        return task

    tasks = [make_task(i) for i in center.indices]
    return _run_children(tasks, ctx)


def _monomial_child(child, chart, predicted, prep, phase, ctx, depth, assumptions, i):
    _check_path_budget(ctx, depth + 1)
    n = child.nvars
    m = n - 1
    node = Node(
        KIND_BLOWUP,
        prep=prep,
        center=chart.center.indices,
        chart_index=i,
        identity=chart.center.is_identity_blowup,
        pair=_pair_at(child, phase),
        s_total=child.s,
        assumptions=assumptions,
        model=child,
        budget={"limit": phase.stretch_limit, "step": phase.stretch_step + 1},
    )
    if tuple(node.pair) > tuple(phase.start_pair):
        raise AlgorithmError(
            f"invariant pair increased: {phase.start_pair} -> {node.pair}"
        )
    if phase.front_entry is None and child.d > phase.d:
        raise AlgorithmError("the order increased across a blow-up")
    if phase.front_entry is None:
        front_persists = child.d == phase.d
    else:
        front_persists = any(
            e.eid == phase.front_entry for e in child.ledger.through_origin()
        )
    if i == m:
        if phase.front_entry is None and child.d >= max(phase.d, 1):
            raise AlgorithmError("the order failed to drop in the contact chart")
        node.children = _continue(child, ctx, depth + 1)
        return node
    if not front_persists:
        node.children = _continue(child, ctx, depth + 1)
        return node
    data = _collect_data(child, phase)
    if not data:
        node.children = _finish_phase_no_data(child, None, phase, ctx, depth + 1, [])
        return node
    omegas2 = _omega_of(data, phase)
    if predicted is not None:
        for key, om in omegas2.items():
            if key in predicted and predicted[key].entries != om.entries:
                raise AlgorithmError(
                    f"exponent bookkeeping mismatch at {key}: predicted "
                    f"{predicted[key].entries}, recomputed {om.entries}"
                )
    node.omega = _omega_json(omegas2, phase)
    _, om_min = least_omega(omegas2)
    if om_min.total < om_min.scale:
        # the pair dropped here even though the front persisted: only possible
        # when an old exceptional departed; re-derive from scratch
        through = {e.eid for e in child.ledger.through_origin()}
        if all(eid in through for eid in phase.old_ids):
            raise AlgorithmError("exponent data dropped but the pair persisted")
        node.children = _continue(child, ctx, depth + 1)
        return node
    dropped = set(phase.old_ids) - {e.eid for e in child.ledger.through_origin()}
    if dropped:
        new_phase = replace(
            phase,
            old_ids=tuple(x for x in phase.old_ids if x not in dropped),
            stretch_limit=0,
            stretch_step=0,
        )
        node.children = _monomial_loop(child, None, new_phase, omegas2, ctx, depth + 1, [])
        return node
    cont = replace(phase, stretch_step=phase.stretch_step + 1)
    node.children = _monomial_loop(child, None, cont, omegas2, ctx, depth + 1, [])
    return node


def _run_germ(g: Jet, ledger: ExceptionalLedger, ctx: _Ctx, depth: int):
    """Entry point for one germ at the origin of the current frame."""
    model = _model(g, ledger)
    if ctx.mode in (MONOMIALIZE, RECTILINEARIZE) and not g.is_zero() and not len(ledger):
        dec = g.monomial_unit_decompose()
        if dec is not None:
            alpha, _ = dec
            return [
                _leaf_node(model, passed=True, extra={"monomial_exponents": list(alpha)})
            ]
    return _continue(model, ctx, depth)


def _absorb_in_drafts(children, ctx: _Ctx):
    """Append contact blow-ups at draft leaves with a surviving strict transform.

    Used in monomialization runs: the final identity blow-up is centered on
    the smooth strict transform after a coordinate change that makes it a
    coordinate, leaving the pullback a monomial times a unit.
    """

    def visit(node):
        if node.kind != KIND_LEAF:
            node.children = [visit(ch) for ch in node.children]
            return node
        model = node.model
        if model is None or model.g.is_zero() or model.g.order().value != 1:
            return node
        through = model.ledger.through_origin()
        rep = normal_crossings_check([e.jet for e in through], extra=model.g)
        if not rep.ok:
            return node
        pivot = rep.assignments[-1][1]
        n = model.nvars
        matrix = None
        if pivot != n - 1:
            rows = []
            for r in range(n):
                row = [Fraction(0)] * n
                if r == pivot:
                    row[n - 1] = Fraction(1)
                elif r == n - 1:
                    row[pivot] = Fraction(1)
                else:
                    row[r] = Fraction(1)
                rows.append(tuple(row))
            matrix = tuple(rows)
        work = model if matrix is None else _apply_prep_model(model, Preparation(matrix, None))
        phi = implicit_solve(work.g, n - 1)
        prep = Preparation(matrix, None if phi.is_zero() else phi)
        work = model if prep.is_trivial else _apply_prep_model(model, prep)
        center = Center((n - 1,), n)
        chart = ChartMap(center, n - 1)
        g2 = chart.pullback(work.g).divide_by_coordinate(n - 1)
        if g2.constant_term == 0:
            raise AlgorithmError("absorbing the strict transform failed")
        ledger2 = _transform_ledger(work.ledger, chart)
        ledger2 = _new_exceptional(ledger2, n - 1, n, g2.trunc)
        child_model = _model(g2, ledger2)
        blow = Node(
            KIND_BLOWUP,
            prep=None if prep.is_trivial else prep,
            center=center.indices,
            chart_index=n - 1,
            identity=True,
            pair=(child_model.d, child_model.s),
            s_total=child_model.s,
            model=child_model,
            assumptions=node.assumptions,
        )
        blow.children = [_leaf_node(child_model, passed=True, extra={"absorbed": True})]
        return blow

    return [visit(ch) for ch in children]


def _root_nodes(g: Jet, ctx: _Ctx):
    n = g.nvars
    base_points = ctx.config.base_points or (tuple([0] * n),)
    roots = []
    for pt in base_points:
        pt = tuple(Fraction(p) for p in pt)
        if len(pt) != n:
            raise ShapeError("base point dimension mismatch")
        g0 = g if all(p == 0 for p in pt) else g.recenter(pt)
        piece = Node(KIND_COVERING, base_point=pt)
        model = _model(g0, ExceptionalLedger())
        piece.pair = (model.d, model.s)
        piece.s_total = model.s
        piece.model = model
        children = _run_germ(g0, ExceptionalLedger(), ctx, depth=0)
        if ctx.mode in (MONOMIALIZE, RECTILINEARIZE):
            children = _absorb_in_drafts(children, ctx)
        piece.children = children
        roots.append(piece)
    return roots


def _default_names(n):
    if n <= 3:
        return ["x", "y", "z"][:n]
    return [f"x{i + 1}" for i in range(n)]


def resolve_hypersurface(g: Jet, config: RunConfig | None = None, var_names=None) -> ResolutionTree:
    """Resolve the hypersurface germ g = 0: at every leaf origin the final
    strict transform has order at most one and crosses the accumulated
    exceptionals (and the Jacobian divisor) normally."""
    config = config or RunConfig()
    ctx = _Ctx(config=config, mode=RESOLVE)
    names = tuple(var_names) if var_names else tuple(_default_names(g.nvars))
    return ResolutionTree(RESOLVE, config, [g], names, _root_nodes(g, ctx))


def monomialize_principal(g: Jet, config: RunConfig | None = None, var_names=None) -> ResolutionTree:
    """Resolve and then absorb the smooth strict transform: the full pullback
    of g is a monomial times a unit in every leaf chart."""
    config = config or RunConfig()
    ctx = _Ctx(config=config, mode=MONOMIALIZE)
    names = tuple(var_names) if var_names else tuple(_default_names(g.nvars))
    return ResolutionTree(MONOMIALIZE, config, [g], names, _root_nodes(g, ctx))


def rectilinearize(gs, config: RunConfig | None = None, var_names=None) -> ResolutionTree:
    """Monomialize the product of the inputs; each input then pulls back to a
    monomial times a unit in every leaf chart, so its zero set becomes a union
    of coordinate hyperplanes there."""
    config = config or RunConfig()
    gs = list(gs)
    if not gs:
        raise ValueError("rectilinearize needs at least one input")
    prod_jet = gs[0]
    for g in gs[1:]:
        prod_jet = prod_jet * g
    ctx = _Ctx(config=config, mode=RECTILINEARIZE)
    names = tuple(var_names) if var_names else tuple(_default_names(prod_jet.nvars))
    return ResolutionTree(
        RECTILINEARIZE, config, [prod_jet] + gs, names, _root_nodes(prod_jet, ctx)
    )


# -- independent verification --------------------------------------------------------


@dataclass
class LeafAudit:
    leaf_id: int
    passed: bool
    strict_order: int | None
    crossings_ok: bool
    total_monomial: bool
    jacobian_ok: bool
    factors_ok: bool
    matches_stored: bool
    reasons: tuple


@dataclass
class VerifyReport:
    all_passed: bool
    leaves: tuple
    assumptions: tuple

    def lines(self):
        out = []
        for la in self.leaves:
            status = "PASS" if la.passed else "FAIL"
            out.append(
                f"leaf {la.leaf_id}: {status} (order={la.strict_order}, "
                f"crossings={la.crossings_ok}, total={la.total_monomial}, "
                f"jacobian={la.jacobian_ok})"
                + ("" if la.passed else f" reasons={list(la.reasons)}")
            )
        return out


def _node_step_map(node: Node, n: int, trunc: int) -> PolyMap | None:
    """Parent coordinates as functions of this node's coordinates."""
    if node.kind == KIND_COVERING:
        base = node.base_point or tuple([Fraction(0)] * n)
        comps = [
            Jet.variable(j, n, trunc) + Jet.constant(base[j], n, trunc) for j in range(n)
        ]
        return PolyMap(comps)
    if node.kind == KIND_LEAF:
        return None
    step = None
    if node.prep is not None and not node.prep.is_trivial:
        step = node.prep.as_map(n, trunc)
    if node.center is not None:
        chart = ChartMap(Center(tuple(node.center), n), node.chart_index)
        chart_map = chart.components(trunc if step is None else step.trunc)
        step = chart_map if step is None else compose_maps(step, chart_map)
    return step


def verify_resolution(tree: ResolutionTree) -> VerifyReport:
    """Replay the whole tree from the input and re-check every leaf.

    The replay uses only chart formulas, preparations, and base points stored
    on the nodes: strict transforms are recomputed by factoring maximal
    exceptional powers from pullbacks, ledgers are rebuilt entry by entry, and
    the composed map gives the total transform and the Jacobian determinant.
    The stored leaf snapshots must match the recomputation exactly.
    """
    from .series import mat_det

    g_input = tree.input_jets[0]
    factors = list(tree.input_jets[1:])
    n = g_input.nvars
    audits = []
    for leaf in tree.leaves():
        path = tree.path_to(leaf.nid)
        reasons = []
        strict = g_input
        ledger = ExceptionalLedger()
        composed = PolyMap.identity(n, g_input.trunc)
        peeled = []  # (path index, chart_index, codim, divided power)
        dets = Fraction(1)
        for idx, node in enumerate(path):
            step = _node_step_map(node, n, composed.trunc)
            if node.kind == KIND_COVERING:
                base = node.base_point or tuple([Fraction(0)] * n)
                strict = strict.recenter(base)
                composed = compose_maps(composed, step)
                continue
            if node.kind == KIND_LEAF:
                continue
            if node.prep is not None and not node.prep.is_trivial:
                prep = node.prep
                strict = _apply_prep(strict, prep)
                ledger = ledger.map_jets(lambda jet, p=prep: _apply_prep(jet, p))
                if prep.matrix is not None:
                    dets *= mat_det(prep.matrix)
            if node.center is not None:
                chart = ChartMap(Center(tuple(node.center), n), node.chart_index)
                pulled = chart.pullback(strict)
                if pulled.is_zero():
                    power, strict = 0, pulled
                else:
                    power, strict = pulled.factor_coordinate_power(chart.exceptional_index)
                ledger = _transform_ledger(ledger, chart)
                ledger = _new_exceptional(ledger, chart.exceptional_index, n, strict.trunc)
                peeled.append((idx, node.chart_index, len(chart.center.indices), power))
            if step is not None:
                composed = compose_maps(composed, step)
        # coordinate pullback of each blow-up's exceptional variable to the leaf
        suffix_after = [None] * len(path)
        tail = PolyMap.identity(n, composed.trunc)
        for idx in range(len(path) - 1, -1, -1):
            suffix_after[idx] = tail
            sm = _node_step_map(path[idx], n, tail.trunc)
            if sm is not None and path[idx].kind != KIND_COVERING:
                tail = compose_maps(sm, tail)
        # stored-vs-recomputed comparison
        stored = leaf.leaf or {}
        matches = True
        st = stored.get("strict_transform")
        if st is not None:
            t = min(st.trunc, strict.trunc)
            if st.with_truncation(t) != strict.with_truncation(t):
                matches = False
                reasons.append("stored strict transform differs from the replay")
        stored_ledger = stored.get("ledger")
        if stored_ledger is not None:
            if len(stored_ledger) != len(ledger):
                matches = False
                reasons.append("stored ledger size differs from the replay")
            else:
                for a, b in zip(stored_ledger, ledger):
                    t = min(a.jet.trunc, b.jet.trunc)
                    if a.eid != b.eid or a.jet.with_truncation(t) != b.jet.with_truncation(t):
                        matches = False
                        reasons.append(f"ledger entry {a.eid} differs from the replay")
                        break
        # leaf conditions (mode dependent: resolution wants a smooth strict
        # transform, monomialization wants the whole pullback monomial)
        monomial_mode = tree.mode in (MONOMIALIZE, RECTILINEARIZE)
        strict_order = strict.order().value
        if monomial_mode:
            order_ok = True
        else:
            order_ok = strict.is_zero() or strict_order <= 1
            if not order_ok:
                reasons.append(f"strict transform has order {strict_order}")
        grads_ok = True
        if not monomial_mode and strict_order == 1 and all(
            x == 0 for x in strict.gradient_at_zero()
        ):
            grads_ok = False
            reasons.append("strict transform of order one has zero gradient")
        through = [e.jet for e in ledger.through_origin()]
        if not monomial_mode and not strict.is_zero() and strict_order == 1:
            rep = normal_crossings_check(through, extra=strict)
        else:
            rep = normal_crossings_check(through)
        crossings_ok = rep.ok
        if not rep.ok:
            reasons.append(f"normal crossings failed: {rep.reason}")
        # total transform: must equal the strict transform times the peeled
        # exceptional powers, and be monomial times unit in monomial modes
        total = substitute(g_input, composed)
        rhs = strict
        for idx, chart_i, codim, power in peeled:
            if power == 0:
                continue
            pv = suffix_after[idx].components[chart_i]
            t = min(rhs.trunc, pv.trunc)
            rhs = rhs.with_truncation(t) * (pv.with_truncation(t) ** power)
        t = min(total.trunc, rhs.trunc)
        total_ok = total.with_truncation(t) == rhs.with_truncation(t)
        if not total_ok:
            reasons.append("total transform does not match strict times exceptionals")
        if monomial_mode and not total.is_zero():
            if total.monomial_unit_decompose() is None:
                total_ok = False
                reasons.append("total transform is not monomial times unit")
        # Jacobian determinant: chain-rule factorization over the charts
        det_jet = composed.jacobian_det()
        rhs = Jet.constant(dets, n, det_jet.trunc)
        for idx, chart_i, codim, _ in peeled:
            if codim <= 1:
                continue
            pv = suffix_after[idx].components[chart_i]
            t = min(rhs.trunc, pv.trunc)
            rhs = rhs.with_truncation(t) * (pv.with_truncation(t) ** (codim - 1))
        t = min(det_jet.trunc, rhs.trunc)
        jac_ok = det_jet.with_truncation(t) == rhs.with_truncation(t)
        if not jac_ok:
            reasons.append("Jacobian determinant does not match its chart factorization")
        else:
            for idx, chart_i, codim, _ in peeled:
                if codim <= 1:
                    continue
                core = suffix_after[idx].components[chart_i]
                for i in range(n):
                    _, core = core.factor_coordinate_power(i)
                if core.is_unit():
                    continue
                cores = []
                for e in ledger.through_origin():
                    ec = e.jet
                    for i in range(n):
                        _, ec = ec.factor_coordinate_power(i)
                    cores.append(ec)
                tt = min([core.trunc] + [c.trunc for c in cores]) if cores else core.trunc
                if not any(core.with_truncation(tt) == c.with_truncation(tt) for c in cores):
                    jac_ok = False
                    reasons.append("an exceptional factor of the Jacobian is not in the ledger")
                    break
        # per-factor checks for rectilinearization
        factors_ok = True
        if tree.mode == RECTILINEARIZE:
            for k, f in enumerate(factors):
                pf = substitute(f, composed)
                if pf.is_zero() or pf.monomial_unit_decompose() is None:
                    factors_ok = False
                    reasons.append(f"input factor {k} is not monomial times unit")
        passed = (
            order_ok
            and grads_ok
            and crossings_ok
            and total_ok
            and jac_ok
            and factors_ok
            and matches
        )
        audits.append(
            LeafAudit(
                leaf_id=leaf.nid,
                passed=passed,
                strict_order=strict_order,
                crossings_ok=crossings_ok,
                total_monomial=total_ok,
                jacobian_ok=jac_ok,
                factors_ok=factors_ok,
                matches_stored=matches,
                reasons=tuple(reasons),
            )
        )
    return VerifyReport(
        all_passed=all(a.passed for a in audits),
        leaves=tuple(audits),
        assumptions=tuple(tree.assumptions),
    )
