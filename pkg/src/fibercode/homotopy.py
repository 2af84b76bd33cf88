"""Chain maps, homotopy equivalences, and weight reduction.

Two chain complexes are treated as interchangeable codes when they are
homotopy equivalent through maps with small Lipschitz constants: the
equivalence transports minimum-distance bounds and decoders between
them. This module provides the equivalence algebra (chain maps,
homotopies, exact verification, Lipschitz measurement), the two
elementary rewrites that generate equivalences — combining the two
edges meeting at a degree-2 vertex, and collapsing an edge with two
endpoints — and the weight-reduction pipelines built by composing those
rewrites: one for classical codes, reducing every bit and check degree
to 2 or 3, and one for twisted circle bundles, where each rewrite is
lifted fiberwise after a gauge change that clears the twists at the
rewrite site.

Conventions. A classical code is a 1-complex with checks as 0-cells and
bits as 1-cells. A degree-raising homotopy on a complex with top degree
k is stored as k+1 matrices, h[j] mapping degree j to degree j+1; the
entry at j = k has zero rows. Weight reduction returns equivalences
whose forward map runs from the reduced complex to the original, and
the reverse-then-forward composite on the original side is exactly the
identity, so the original code can be decoded through the reduced one
with a zero homotopy term.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from fibercode.bundle import Bundle, PlainBase, build_bundle, gauge_transform
from fibercode.complexes import ChainComplex, transpose_complex
from fibercode.gf2 import Gf2Matrix, from_alist, to_alist

__all__ = [
    "ChainMap",
    "HomotopyEquivalence",
    "identity_equivalence",
    "verify_homotopy",
    "lipschitz",
    "combine_cells",
    "collapse_cell",
    "compose_equivalences",
    "transpose_equivalence",
    "reverse_equivalence",
    "weight_reduce_classical",
    "weight_reduce_bundle",
    "save_equivalence",
    "load_equivalence",
]


@dataclass(frozen=True)
class ChainMap:
    """Degree-preserving map between complexes commuting with boundaries."""

    source: ChainComplex
    target: ChainComplex
    maps: tuple[Gf2Matrix, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "maps", tuple(self.maps))
        k = self.source.top_degree
        if self.target.top_degree != k:
            raise ValueError("source and target must share the top degree")
        if len(self.maps) != k + 1:
            raise ValueError("need one matrix per degree")
        for j, m in enumerate(self.maps):
            if m.shape != (self.target.dims[j], self.source.dims[j]):
                raise ValueError(
                    f"map at degree {j} has shape {m.shape}, expected "
                    f"{(self.target.dims[j], self.source.dims[j])}"
                )
        for j in range(1, k + 1):
            lhs = self.target.boundary(j) @ self.maps[j]
            rhs = self.maps[j - 1] @ self.source.boundary(j)
            if lhs != rhs:
                raise ValueError(f"not a chain map at degree {j}")

    @classmethod
    def identity(cls, cx: ChainComplex) -> "ChainMap":
        return cls(cx, cx, tuple(Gf2Matrix.identity(d) for d in cx.dims))

    def __matmul__(self, other: "ChainMap") -> "ChainMap":
        """Composition self(other(.)): other runs first."""
        if other.target != self.source:
            raise ValueError("composition endpoints do not meet")
        return ChainMap(
            other.source,
            self.target,
            tuple(a @ b for a, b in zip(self.maps, other.maps)),
        )

    def apply(self, j: int, chain):
        return self.maps[j].mul_chain(chain)

    def lipschitz(self) -> tuple[int, ...]:
        """Per-degree max image weight of a basis cell (max column weight)."""
        return tuple(m.max_col_weight() for m in self.maps)

    def transpose_lipschitz(self) -> tuple[int, ...]:
        """Lipschitz constants of the transposed map, degree-aligned."""
        return tuple(m.max_row_weight() for m in self.maps)


def lipschitz(chain_map: ChainMap) -> tuple[int, ...]:
    return chain_map.lipschitz()


def _zero_homotopy(cx: ChainComplex) -> tuple[Gf2Matrix, ...]:
    k = cx.top_degree
    return tuple(
        Gf2Matrix.zeros(cx.dims[j + 1] if j < k else 0, cx.dims[j])
        for j in range(k + 1)
    )


@dataclass(frozen=True)
class HomotopyEquivalence:
    """Chain maps f: A -> B and g: B -> A inverse up to the homotopies.

    h_source[j]: A_j -> A_{j+1} witnesses gf + I = h d + d h on A and
    h_target does the same for fg on B. Shapes are enforced here; the
    defining identities are checked by verify(), which the rewrite
    constructors call before returning.
    """

    f: ChainMap
    g: ChainMap
    h_source: tuple[Gf2Matrix, ...]
    h_target: tuple[Gf2Matrix, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "h_source", tuple(self.h_source))
        object.__setattr__(self, "h_target", tuple(self.h_target))
        a, b = self.f.source, self.f.target
        if self.g.source != b or self.g.target != a:
            raise ValueError("g must run opposite to f")
        for cx, h in ((a, self.h_source), (b, self.h_target)):
            k = cx.top_degree
            if len(h) != k + 1:
                raise ValueError("need one homotopy matrix per degree")
            for j, m in enumerate(h):
                want = (cx.dims[j + 1] if j < k else 0, cx.dims[j])
                if m.shape != want:
                    raise ValueError(
                        f"homotopy at degree {j} has shape {m.shape}, "
                        f"expected {want}"
                    )

    @classmethod
    def identity(cls, cx: ChainComplex) -> "HomotopyEquivalence":
        one = ChainMap.identity(cx)
        zero = _zero_homotopy(cx)
        return cls(one, one, zero, zero)

    def verify(self) -> bool:
        """All four defining identities, checked as exact matrix equations."""
        a, b = self.f.source, self.f.target
        for cm in (self.f, self.g):
            k = cm.source.top_degree
            for j in range(1, k + 1):
                if cm.target.boundary(j) @ cm.maps[j] != cm.maps[j - 1] @ cm.source.boundary(j):
                    return False
        return _homotopy_holds(a, self.g, self.f, self.h_source) and _homotopy_holds(
            b, self.f, self.g, self.h_target
        )

    def lipschitz_report(self) -> dict[str, tuple[int, ...]]:
        """Measured constants for f, g and their transposes, per degree."""
        return {
            "f": self.f.lipschitz(),
            "g": self.g.lipschitz(),
            "f_transpose": self.f.transpose_lipschitz(),
            "g_transpose": self.g.transpose_lipschitz(),
        }

    def compose(self, other: "HomotopyEquivalence") -> "HomotopyEquivalence":
        """Chain self: A <-> B with other: B <-> C into A <-> C."""
        if other.f.source != self.f.target:
            raise ValueError("composition endpoints do not meet")
        k = self.f.source.top_degree
        f = other.f @ self.f
        g = self.g @ other.g
        h_source = []
        for j in range(k + 1):
            m = self.h_source[j]
            if j < k:
                m = m + self.g.maps[j + 1] @ other.h_source[j] @ self.f.maps[j]
            h_source.append(m)
        h_target = []
        for j in range(k + 1):
            m = other.h_target[j]
            if j < k:
                m = m + other.f.maps[j + 1] @ self.h_target[j] @ other.g.maps[j]
            h_target.append(m)
        return HomotopyEquivalence(f, g, tuple(h_source), tuple(h_target))


def _homotopy_holds(
    cx: ChainComplex,
    outer: ChainMap,
    inner: ChainMap,
    h: tuple[Gf2Matrix, ...],
) -> bool:
    """outer(inner(.)) + I == boundary h + h boundary on cx, exactly."""
    for j in range(cx.top_degree + 1):
        lhs = outer.maps[j] @ inner.maps[j] + Gf2Matrix.identity(cx.dims[j])
        rhs = cx.boundary(j + 1) @ h[j]
        if j > 0:
            rhs = rhs + h[j - 1] @ cx.boundary(j)
        if lhs != rhs:
            return False
    return True


def identity_equivalence(cx: ChainComplex) -> HomotopyEquivalence:
    return HomotopyEquivalence.identity(cx)


def verify_homotopy(equiv: HomotopyEquivalence) -> bool:
    return equiv.verify()


def compose_equivalences(
    first: HomotopyEquivalence, second: HomotopyEquivalence
) -> HomotopyEquivalence:
    return first.compose(second)


def transpose_equivalence(
    equiv: HomotopyEquivalence,
    source: ChainComplex | None = None,
    target: ChainComplex | None = None,
) -> HomotopyEquivalence:
    """Equivalence between the transposed complexes.

    Forward and reverse maps swap and transpose; each homotopy stays on
    its own side. Optional source/target supply existing complex objects
    (they must equal the computed transposes), preserving labels.
    """
    a, b = equiv.f.source, equiv.f.target
    ta = transpose_complex(a) if source is None else source
    tb = transpose_complex(b) if target is None else target
    k = a.top_degree

    def flip(h: tuple[Gf2Matrix, ...], cx: ChainComplex) -> tuple[Gf2Matrix, ...]:
        out = [h[k - 1 - j].transpose() for j in range(k)]
        out.append(Gf2Matrix.zeros(0, cx.dims[k]))
        return tuple(out)

    f = ChainMap(ta, tb, tuple(equiv.g.maps[k - j].transpose() for j in range(k + 1)))
    g = ChainMap(tb, ta, tuple(equiv.f.maps[k - j].transpose() for j in range(k + 1)))
    return HomotopyEquivalence(f, g, flip(equiv.h_source, ta), flip(equiv.h_target, tb))


def reverse_equivalence(equiv: HomotopyEquivalence) -> HomotopyEquivalence:
    """The same equivalence read in the other direction.

    Swapping the forward and reverse maps together with the two
    homotopies turns the four defining identities into each other, so
    the reversal of a valid equivalence is valid without recomputation.
    """
    return HomotopyEquivalence(equiv.g, equiv.f, equiv.h_target, equiv.h_source)


def _rebind(
    equiv: HomotopyEquivalence,
    source: ChainComplex,
    target: ChainComplex,
) -> HomotopyEquivalence:
    """Swap in caller-owned complex objects equal to the pipeline's."""
    if source != equiv.f.source or target != equiv.f.target:
        raise ValueError("replacement complexes differ from the originals")
    return HomotopyEquivalence(
        ChainMap(source, target, equiv.f.maps),
        ChainMap(target, source, equiv.g.maps),
        equiv.h_source,
        equiv.h_target,
    )


# -- elementary rewrites -------------------------------------------------------


def combine_cells(
    cx: ChainComplex, v: int
) -> tuple[ChainComplex, HomotopyEquivalence]:
    """Merge the two edges meeting at 0-cell v into one, removing v.

    The 0-cell must have exactly two 1-cells e1 < e2 in its coboundary.
    The merged edge keeps e1's slot and label; e2 and v disappear. The
    forward map sends e1 to the merged edge, e2 to zero, and v to the
    rest of e2's boundary; the reverse map opens the merged edge back up
    to e1 + e2; the homotopy pushes v along e2.
    """
    if cx.top_degree != 1:
        raise ValueError("cell combining works on 1-complexes")
    d1 = cx.boundary(1)
    n0, n1 = cx.dims
    if not 0 <= v < n0:
        raise ValueError(f"0-cell {v} out of range")
    cob = d1.row_support(v)
    if len(cob) != 2:
        raise ValueError(
            f"0-cell {v} has {len(cob)} coboundary cells, need exactly 2"
        )
    e1, e2 = cob

    keep0 = [a for a in range(n0) if a != v]
    keep1 = [e for e in range(n1) if e != e2]
    pos0 = {a: i for i, a in enumerate(keep0)}
    pos1 = {e: i for i, e in enumerate(keep1)}

    f0 = Gf2Matrix.from_col_support(
        [
            [pos0[x] for x in d1.col_support(e2) if x != v]
            if a == v
            else [pos0[a]]
            for a in range(n0)
        ],
        len(keep0),
    )
    f1 = Gf2Matrix.from_col_support(
        [[] if e == e2 else [pos1[e]] for e in range(n1)], len(keep1)
    )
    g0 = Gf2Matrix.from_col_support([[a] for a in keep0], n0)
    g1 = Gf2Matrix.from_col_support(
        [[e1, e2] if e == e1 else [e] for e in keep1], n1
    )
    h0 = Gf2Matrix.from_col_support(
        [[e2] if a == v else [] for a in range(n0)], n1
    )

    merged_boundary = f0 @ d1 @ g1
    labels = None
    if cx.labels is not None:
        labels = (
            tuple(cx.labels[0][a] for a in keep0),
            tuple(cx.labels[1][e] for e in keep1),
        )
    rewritten = ChainComplex((len(keep0), len(keep1)), (merged_boundary,), labels)

    equiv = HomotopyEquivalence(
        ChainMap(cx, rewritten, (f0, f1)),
        ChainMap(rewritten, cx, (g0, g1)),
        (h0, Gf2Matrix.zeros(0, n1)),
        _zero_homotopy(rewritten),
    )
    if not equiv.verify():
        raise RuntimeError("cell combine produced an invalid equivalence")
    return rewritten, equiv


def collapse_cell(
    cx: ChainComplex, e: int
) -> tuple[ChainComplex, HomotopyEquivalence]:
    """Contract 1-cell e, merging its two endpoint 0-cells.

    Dual of combine_cells: transpose the complex, combine at what is now
    a 0-cell, and transpose back. The merged 0-cell keeps the slot and
    label of the lower endpoint.
    """
    if cx.top_degree != 1:
        raise ValueError("cell collapsing works on 1-complexes")
    if not 0 <= e < cx.dims[1]:
        raise ValueError(f"1-cell {e} out of range")
    ends = cx.boundary(1).col_support(e)
    if len(ends) != 2:
        raise ValueError(
            f"1-cell {e} has {len(ends)} boundary cells, need exactly 2"
        )
    flipped, equiv_t = combine_cells(transpose_complex(cx), e)
    rewritten = transpose_complex(flipped)
    equiv = transpose_equivalence(equiv_t, source=cx, target=rewritten)
    if not equiv.verify():
        raise RuntimeError("cell collapse produced an invalid equivalence")
    return rewritten, equiv


# -- classical weight reduction --------------------------------------------------


@dataclass(frozen=True)
class _ReducedLayout:
    complex: ChainComplex
    bit_index: dict[tuple[int, int], int]
    check_index: dict[tuple[int, int], int]


@dataclass(frozen=True)
class _RewriteStep:
    kind: str  # "combine" | "collapse"
    site: int  # removed middle cell, indexed in the source complex
    merged: tuple[int, int]  # the two cells being merged, ascending
    equivalence: HomotopyEquivalence


def _reduced_layout(cx: ChainComplex) -> _ReducedLayout:
    """The degree-reduced rewrite of a classical code.

    Every bit b becomes one copy per check it meets, chained by
    auxiliary equality checks; every check c becomes one copy per bit,
    chained by auxiliary carry bits. Copies are labeled b{b}.c{c} and
    c{c}.b{b}; auxiliaries ac{b}.{j} (checks) and ab{c}.{k} (bits).
    """
    if cx.top_degree != 1:
        raise ValueError("weight reduction works on 1-complexes")
    d1 = cx.boundary(1)
    n0, n1 = cx.dims
    bit_checks = [d1.col_support(b) for b in range(n1)]
    check_bits = [d1.row_support(c) for c in range(n0)]
    if any(not s for s in bit_checks) or any(not s for s in check_bits):
        raise ValueError(
            "weight reduction needs every bit in some check and every "
            "check over some bit"
        )

    bit_index: dict[tuple[int, int], int] = {}
    bit_labels: list[str] = []
    aux_bit_index: dict[tuple[int, int], int] = {}
    for b in range(n1):
        for c in bit_checks[b]:
            bit_index[(b, c)] = len(bit_labels)
            bit_labels.append(f"b{b}.c{c}")
    for c in range(n0):
        for k in range(1, len(check_bits[c])):
            aux_bit_index[(c, k)] = len(bit_labels)
            bit_labels.append(f"ab{c}.{k}")

    check_index: dict[tuple[int, int], int] = {}
    check_labels: list[str] = []
    aux_check_index: dict[tuple[int, int], int] = {}
    for c in range(n0):
        for b in check_bits[c]:
            check_index[(c, b)] = len(check_labels)
            check_labels.append(f"c{c}.b{b}")
    for b in range(n1):
        for j in range(1, len(bit_checks[b])):
            aux_check_index[(b, j)] = len(check_labels)
            check_labels.append(f"ac{b}.{j}")

    cols: list[list[int]] = []
    for b in range(n1):
        checks = bit_checks[b]
        for i, c in enumerate(checks, start=1):
            sup = [check_index[(c, b)]]
            if i > 1:
                sup.append(aux_check_index[(b, i - 1)])
            if i < len(checks):
                sup.append(aux_check_index[(b, i)])
            cols.append(sup)
    for c in range(n0):
        bits = check_bits[c]
        for k in range(1, len(bits)):
            cols.append([check_index[(c, bits[k - 1])], check_index[(c, bits[k])]])

    reduced = ChainComplex(
        (len(check_labels), len(bit_labels)),
        (Gf2Matrix.from_col_support(cols, len(check_labels)),),
        (tuple(check_labels), tuple(bit_labels)),
    )
    return _ReducedLayout(reduced, bit_index, check_index)


def _reduction_pipeline(
    cx: ChainComplex,
) -> tuple[_ReducedLayout, list[_RewriteStep], HomotopyEquivalence]:
    """Rewrites taking the reduced complex back to the original.

    Combines remove the auxiliary equality checks of each bit, merging
    its copies; collapses remove the auxiliary carry bits of each check,
    merging its copies. The final complex must reproduce the original
    boundary matrix exactly.
    """
    layout = _reduced_layout(cx)
    d1 = cx.boundary(1)
    cur = layout.complex
    equiv = identity_equivalence(cur)
    steps: list[_RewriteStep] = []

    for b in range(cx.dims[1]):
        for j in range(1, len(d1.col_support(b))):
            site = cur.labels[0].index(f"ac{b}.{j}")
            merged = cur.boundary(1).row_support(site)
            nxt, step_eq = combine_cells(cur, site)
            steps.append(_RewriteStep("combine", site, merged, step_eq))
            equiv = equiv.compose(step_eq)
            cur = nxt
    for c in range(cx.dims[0]):
        for k in range(1, len(d1.row_support(c))):
            site = cur.labels[1].index(f"ab{c}.{k}")
            merged = cur.boundary(1).col_support(site)
            nxt, step_eq = collapse_cell(cur, site)
            steps.append(_RewriteStep("collapse", site, merged, step_eq))
            equiv = equiv.compose(step_eq)
            cur = nxt

    if cur.dims != cx.dims or cur.boundary(1) != d1:
        raise RuntimeError(
            "weight-reduction rewrites failed to rebuild the original complex"
        )
    equiv = _rebind(equiv, layout.complex, cx)
    if not equiv.verify():
        raise RuntimeError("composed reduction equivalence failed verification")
    return layout, steps, equiv


def weight_reduce_classical(code) -> tuple[ChainComplex, HomotopyEquivalence]:
    """Cap every bit and check degree at 3.

    Degrees land exactly in {2, 3} whenever every original bit and check
    touches at least two cells; a degree-1 original keeps one degree-1
    image (splitting never raises a cell's degree). Accepts a classical
    base code (anything with as_complex()) or a 1-complex. Returns the
    reduced complex and a verified equivalence whose forward map runs
    reduced -> original with the reverse-forward composite on the
    original side exactly the identity.
    """
    cx = code.as_complex() if hasattr(code, "as_complex") else code
    layout, _, equiv = _reduction_pipeline(cx)
    return layout.complex, equiv


# -- bundle weight reduction -----------------------------------------------------


def _star_zero_gauge(
    cur: Bundle, base: ChainComplex, step: _RewriteStep
) -> tuple[list[int], list[int]]:
    """Fiber rotations clearing every twist at the rewrite site.

    For a combine the site spans the stars of the two merging bits; for
    a collapse, the stars of the two merging checks. The site is a tree
    (the merging cells share only the removed middle cell), so rotations
    zeroing it always exist; a shared outer cell would make the site
    cyclic and is reported as a construction bug.
    """
    mf = cur.m_fiber
    d1 = base.boundary(1)
    tw = cur.twist_of
    rho_v = [0] * cur.n_vars
    rho_c = [0] * cur.n_checks

    def t(b: int, a: int) -> int:
        return tw.get((b, a), 0)

    if step.kind == "combine":
        v = step.site
        e1, e2 = step.merged
        for a in d1.col_support(e1):
            rho_c[a] = -t(e1, a) % mf
        rho_v[e2] = (t(e2, v) + rho_c[v]) % mf
        first = set(d1.col_support(e1))
        for a in d1.col_support(e2):
            if a in first:
                if (t(e2, a) + rho_c[a] - rho_v[e2]) % mf:
                    raise RuntimeError(
                        "merging bits share a check beyond the rewrite site"
                    )
            else:
                rho_c[a] = (rho_v[e2] - t(e2, a)) % mf
    else:
        e = step.site
        v1, v2 = step.merged
        for y in d1.row_support(v1):
            rho_v[y] = t(y, v1) % mf
        rho_c[v2] = (rho_v[e] - t(e, v2)) % mf
        first = set(d1.row_support(v1))
        for y in d1.row_support(v2):
            if y in first:
                if (t(y, v2) + rho_c[v2] - rho_v[y]) % mf:
                    raise RuntimeError(
                        "merging checks share a bit beyond the rewrite site"
                    )
            else:
                rho_v[y] = (t(y, v2) + rho_c[v2]) % mf
    return rho_v, rho_c


def _apply_gauge(
    cur: Bundle, rho_v: list[int], rho_c: list[int]
) -> tuple[Bundle, HomotopyEquivalence]:
    """Gauge change as an exact equivalence (permutation both ways)."""
    gauged, (u0, u1, u2) = gauge_transform(cur, rho_v, rho_c)
    equiv = HomotopyEquivalence(
        ChainMap(cur.complex, gauged.complex, (u0, u1, u2)),
        ChainMap(
            gauged.complex,
            cur.complex,
            (u0.transpose(), u1.transpose(), u2.transpose()),
        ),
        _zero_homotopy(cur.complex),
        _zero_homotopy(gauged.complex),
    )
    if not equiv.verify():
        raise RuntimeError("gauge change is not a chain isomorphism")
    return gauged, equiv


def _kron_id(mat: Gf2Matrix, mf: int) -> Gf2Matrix:
    """mat acting blockwise on cells carrying a fiber coordinate."""
    cols: list[list[int]] = []
    for j in range(mat.n_cols):
        sup = mat.col_support(j)
        for i in range(mf):
            cols.append([r * mf + i for r in sup])
    return Gf2Matrix.from_col_support(cols, mat.n_rows * mf)


def _lift_triple(
    f0: Gf2Matrix, f1: Gf2Matrix, mf: int
) -> tuple[Gf2Matrix, Gf2Matrix, Gf2Matrix]:
    """Lift base maps (f0 on checks, f1 on bits) to the three bundle degrees."""
    n1t, n0t = f1.n_rows, f0.n_rows
    cols: list[list[int]] = []
    for b in range(f1.n_cols):
        sup = f1.col_support(b)
        for u in range(mf):
            cols.append([r * mf + u for r in sup])
    off = n1t * mf
    for a in range(f0.n_cols):
        sup = f0.col_support(a)
        for i in range(mf):
            cols.append([off + r * mf + i for r in sup])
    lifted1 = Gf2Matrix.from_col_support(cols, (n1t + n0t) * mf)
    return (_kron_id(f0, mf), lifted1, _kron_id(f1, mf))


def _lift_homotopy(
    h0: Gf2Matrix, n_vars: int, n_checks: int, mf: int
) -> tuple[Gf2Matrix, Gf2Matrix, Gf2Matrix]:
    """Lift a base homotopy: c(a,u) -> h(h0 a, u) and v(a,i) -> q(h0 a, i)."""
    cols0: list[list[int]] = []
    for a in range(n_checks):
        sup = h0.col_support(a)
        for u in range(mf):
            cols0.append([r * mf + u for r in sup])
    lifted0 = Gf2Matrix.from_col_support(cols0, (n_vars + n_checks) * mf)
    cols1: list[list[int]] = [[] for _ in range(n_vars * mf)]
    for a in range(n_checks):
        sup = h0.col_support(a)
        for i in range(mf):
            cols1.append([r * mf + i for r in sup])
    lifted1 = Gf2Matrix.from_col_support(cols1, n_vars * mf)
    return (lifted0, lifted1, Gf2Matrix.zeros(0, n_vars * mf))


def _lift_rewrite(
    cur: Bundle, step: _RewriteStep
) -> tuple[Bundle, HomotopyEquivalence]:
    """Apply one base rewrite fiberwise to a bundle with a cleared site."""
    cls_eq = step.equivalence
    source_base = cls_eq.f.source
    target_base = cls_eq.f.target
    mf = cur.m_fiber

    if step.kind == "combine":
        removed_bit, removed_check = step.merged[1], step.site
        cleared_bits = set(step.merged)
        cleared_checks: set[int] = set()
    else:
        removed_bit, removed_check = step.site, step.merged[1]
        cleared_bits = set()
        cleared_checks = set(step.merged)
    for (b, a), t in cur.twist_of.items():
        if t % mf and (b in cleared_bits or a in cleared_checks):
            raise RuntimeError("gauge failed to clear the rewrite site")

    bit_pos = {}
    for b in range(source_base.dims[1]):
        if b != removed_bit:
            bit_pos[b] = len(bit_pos)
    check_pos = {}
    for a in range(source_base.dims[0]):
        if a != removed_check:
            check_pos[a] = len(check_pos)
    new_twists = {}
    for (b, a), t in cur.twist_of.items():
        if t % mf == 0:
            continue
        new_twists[(bit_pos[b], check_pos[a])] = t

    nxt = build_bundle(PlainBase.from_complex(target_base), mf, new_twists)
    nxt = Bundle(
        base_code=nxt.base_code,
        m_fiber=mf,
        twists=nxt.twists,
        complex=nxt.complex,
        ell=cur.ell
        if cur.ell is not None and all(t % cur.ell == 0 for t in new_twists.values())
        else None,
    )

    equiv = HomotopyEquivalence(
        ChainMap(
            cur.complex,
            nxt.complex,
            _lift_triple(cls_eq.f.maps[0], cls_eq.f.maps[1], mf),
        ),
        ChainMap(
            nxt.complex,
            cur.complex,
            _lift_triple(cls_eq.g.maps[0], cls_eq.g.maps[1], mf),
        ),
        _lift_homotopy(
            cls_eq.h_source[0], source_base.dims[1], source_base.dims[0], mf
        ),
        _zero_homotopy(nxt.complex),
    )
    if not equiv.verify():
        raise RuntimeError("lifted rewrite failed homotopy verification")
    return nxt, equiv


def _alignment_gauge(cur: Bundle, target: Bundle) -> tuple[list[int], list[int]]:
    """Rotations turning cur's twists into target's, solved over the
    Tanner graph; inconsistency around a cycle is a construction bug."""
    mf = cur.m_fiber
    if (cur.n_vars, cur.n_checks) != (target.n_vars, target.n_checks):
        raise RuntimeError("aligned bundles must share the base")

    def delta(b: int, a: int) -> int:
        return (target.twist_of.get((b, a), 0) - cur.twist_of.get((b, a), 0)) % mf

    rho_v: list[int | None] = [None] * cur.n_vars
    rho_c: list[int | None] = [None] * cur.n_checks
    var_checks = cur.var_checks
    check_vars = cur.base_code.adjacency
    for root in range(cur.n_vars):
        if rho_v[root] is not None:
            continue
        rho_v[root] = 0
        queue = [("v", root)]
        while queue:
            kind, x = queue.pop()
            if kind == "v":
                for a in var_checks[x]:
                    want = (rho_v[x] + delta(x, a)) % mf
                    if rho_c[a] is None:
                        rho_c[a] = want
                        queue.append(("c", a))
                    elif rho_c[a] != want:
                        raise RuntimeError(
                            "twists disagree around a base cycle; no gauge aligns them"
                        )
            else:
                for b in check_vars[x]:
                    want = (rho_c[x] - delta(b, x)) % mf
                    if rho_v[b] is None:
                        rho_v[b] = want
                        queue.append(("v", b))
                    elif rho_v[b] != want:
                        raise RuntimeError(
                            "twists disagree around a base cycle; no gauge aligns them"
                        )
    return [r or 0 for r in rho_v], [r or 0 for r in rho_c]


def weight_reduce_bundle(bundle: Bundle) -> tuple[Bundle, HomotopyEquivalence]:
    """Bundle over the degree-reduced base, with a verified equivalence.

    The reduced base carries each original twist on the edge between the
    matching bit and check copies and zero twists elsewhere. Each base
    rewrite is lifted fiberwise after a gauge change clearing the twists
    at its site; a final gauge change aligns the rebuilt twists with the
    original bundle, which must be reproduced exactly.
    """
    base_cx = bundle.base_complex
    layout, steps, _ = _reduction_pipeline(base_cx)
    mf = bundle.m_fiber

    reduced_twists = {}
    for (b, a), t in bundle.twist_of.items():
        if t % mf:
            reduced_twists[
                (layout.bit_index[(b, a)], layout.check_index[(a, b)])
            ] = t % mf
    built = build_bundle(PlainBase.from_complex(layout.complex), mf, reduced_twists)
    reduced_bundle = Bundle(
        base_code=built.base_code,
        m_fiber=mf,
        twists=built.twists,
        complex=built.complex,
        ell=bundle.ell,
    )

    cur = reduced_bundle
    equiv = identity_equivalence(reduced_bundle.complex)
    for step in steps:
        rho_v, rho_c = _star_zero_gauge(cur, step.equivalence.f.source, step)
        if any(rho_v) or any(rho_c):
            cur, gauge_eq = _apply_gauge(cur, rho_v, rho_c)
            equiv = equiv.compose(gauge_eq)
        cur, lift_eq = _lift_rewrite(cur, step)
        equiv = equiv.compose(lift_eq)

    rho_v, rho_c = _alignment_gauge(cur, bundle)
    if any(rho_v) or any(rho_c):
        cur, gauge_eq = _apply_gauge(cur, rho_v, rho_c)
        equiv = equiv.compose(gauge_eq)
    if cur.complex != bundle.complex:
        raise RuntimeError(
            "bundle weight reduction failed to rebuild the original complex"
        )
    equiv = _rebind(equiv, reduced_bundle.complex, bundle.complex)
    if not equiv.verify():
        raise RuntimeError("composed bundle equivalence failed verification")
    return reduced_bundle, equiv


# -- serialization ---------------------------------------------------------------


def save_equivalence(equiv: HomotopyEquivalence, directory: str | Path) -> Path:
    """Write an equivalence as alist matrices plus a manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files: dict[str, list[str]] = {}

    def dump(tag: str, matrices) -> None:
        names = []
        for j, mat in enumerate(matrices):
            name = f"{tag}{j}.alist"
            (directory / name).write_text(to_alist(mat))
            names.append(name)
        files[tag] = names

    dump("f", equiv.f.maps)
    dump("g", equiv.g.maps)
    dump("h_source", equiv.h_source)
    dump("h_target", equiv.h_target)
    dump("source_boundary", equiv.f.source.boundaries)
    dump("target_boundary", equiv.f.target.boundaries)
    manifest = {
        "source_dims": list(equiv.f.source.dims),
        "target_dims": list(equiv.f.target.dims),
        "files": files,
    }
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_equivalence(directory: str | Path) -> HomotopyEquivalence:
    """Read back a saved equivalence and verify it before returning."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    files = manifest["files"]

    def grab(tag: str) -> tuple[Gf2Matrix, ...]:
        return tuple(
            from_alist((directory / name).read_text()) for name in files[tag]
        )

    source = ChainComplex(manifest["source_dims"], grab("source_boundary"))
    target = ChainComplex(manifest["target_dims"], grab("target_boundary"))
    equiv = HomotopyEquivalence(
        ChainMap(source, target, grab("f")),
        ChainMap(target, source, grab("g")),
        grab("h_source"),
        grab("h_target"),
    )
    if not equiv.verify():
        raise ValueError("stored equivalence fails verification")
    return equiv
