"""Chain complexes over GF(2), homology, CSS extraction, serialization.

A complex of length k stores cell counts ``dims[0..k]`` and boundary
matrices ``del_j`` of shape dims[j-1] x dims[j] for j = 1..k, satisfying
del_j del_(j+1) = 0. Degree-j chains are BitChains of length dims[j].
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

from fibercode.gf2 import BitChain, Gf2Matrix, from_alist, to_alist

__all__ = [
    "ChainComplex",
    "CssCode",
    "cycle_complex",
    "transpose_complex",
    "css_from_complex",
    "coset_min_weight_exact",
    "serialize_complex",
    "parse_complex",
    "serialize_labels",
    "parse_labels",
]


class ChainComplex:
    """Finite chain complex over GF(2), immutable after construction."""

    __slots__ = ("dims", "boundaries", "labels")

    def __init__(
        self,
        dims: Sequence[int],
        boundaries: Sequence[Gf2Matrix],
        labels: Sequence[Sequence[str]] | None = None,
    ):
        dims = tuple(dims)
        boundaries = tuple(boundaries)
        if len(dims) < 1:
            raise ValueError("a complex needs at least degree 0")
        if len(boundaries) != len(dims) - 1:
            raise ValueError("need one boundary matrix per degree 1..k")
        for j, mat in enumerate(boundaries, start=1):
            if mat.shape != (dims[j - 1], dims[j]):
                raise ValueError(
                    f"boundary {j} has shape {mat.shape}, "
                    f"expected {(dims[j - 1], dims[j])}"
                )
        if labels is not None:
            labels = tuple(tuple(lab) for lab in labels)
            if len(labels) != len(dims) or any(
                len(lab) != d for lab, d in zip(labels, dims)
            ):
                raise ValueError("labels must match dims")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "boundaries", boundaries)
        object.__setattr__(self, "labels", labels)

    def __setattr__(self, name, value):  # pragma: no cover - guard
        raise AttributeError("ChainComplex is immutable")

    @property
    def top_degree(self) -> int:
        return len(self.dims) - 1

    def boundary(self, j: int) -> Gf2Matrix:
        """del_j for 1 <= j <= k; zero-shaped maps at the two ends."""
        if j < 0 or j > self.top_degree + 1:
            raise ValueError(f"degree {j} out of range")
        if j == 0:
            return Gf2Matrix.zeros(0, self.dims[0])
        if j == self.top_degree + 1:
            return Gf2Matrix.zeros(self.dims[self.top_degree], 0)
        return self.boundaries[j - 1]

    def validate(self) -> None:
        """Check del_j del_(j+1) = 0 at every degree; raise otherwise."""
        for j in range(1, self.top_degree):
            prod = self.boundary(j) @ self.boundary(j + 1)
            if not prod.is_zero():
                raise ValueError(f"del_{j} del_{j + 1} is nonzero")

    def betti(self, j: int) -> int:
        if not 0 <= j <= self.top_degree:
            raise ValueError(f"degree {j} out of range")
        ker = self.dims[j] - self.boundary(j).rank()
        return ker - self.boundary(j + 1).rank()

    # -- (co)cycle tests, one code path each -----------------------------

    def is_cycle(self, j: int, z: BitChain) -> bool:
        return self.boundary(j).mul_chain(z).is_zero()

    def is_boundary(self, j: int, z: BitChain) -> bool:
        return self.boundary(j + 1).solve(z) is not None

    def is_nontrivial_cycle(self, j: int, z: BitChain) -> bool:
        return (
            not z.is_zero()
            and self.is_cycle(j, z)
            and not self.is_boundary(j, z)
        )

    def is_cocycle(self, j: int, z: BitChain) -> bool:
        return self.boundary(j + 1).transpose().mul_chain(z).is_zero()

    def is_coboundary(self, j: int, z: BitChain) -> bool:
        return self.boundary(j).transpose().solve(z) is not None

    def is_nontrivial_cocycle(self, j: int, z: BitChain) -> bool:
        return (
            not z.is_zero()
            and self.is_cocycle(j, z)
            and not self.is_coboundary(j, z)
        )

    def homology_basis(self, j: int) -> list[BitChain]:
        """Cycles independent modulo boundaries, deterministically chosen."""
        cycles = self.boundary(j).kernel_basis()
        return _independent_mod(cycles, self.boundary(j + 1).transpose().rows, self.dims[j])

    def cohomology_basis(self, j: int) -> list[BitChain]:
        cocycles = self.boundary(j + 1).transpose().kernel_basis()
        return _independent_mod(cocycles, self.boundary(j).rows, self.dims[j])

    def label(self, j: int, i: int) -> str:
        if self.labels is None:
            return f"{j}:{i}"
        return self.labels[j][i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ChainComplex):
            return NotImplemented
        return self.dims == other.dims and self.boundaries == other.boundaries

    def __hash__(self) -> int:
        return hash((self.dims, self.boundaries))

    def __repr__(self) -> str:
        return f"ChainComplex(dims={self.dims})"


def _independent_mod(
    candidates: list[BitChain], span_rows: Iterable[int], length: int
) -> list[BitChain]:
    """Subset of candidates independent modulo the span of the given rows.

    Maintains an eliminator keyed by leading bit position; the reduction
    order is fixed, so the selection is deterministic.
    """
    eliminators: dict[int, int] = {}

    def reduce(bits: int) -> int:
        while bits:
            lead = bits.bit_length() - 1
            row = eliminators.get(lead)
            if row is None:
                return bits
            bits ^= row
        return 0

    def insert(bits: int) -> bool:
        bits = reduce(bits)
        if bits == 0:
            return False
        eliminators[bits.bit_length() - 1] = bits
        return True

    for row in span_rows:
        insert(row)
    picked = []
    for cand in candidates:
        if insert(cand.bits):
            picked.append(cand)
    return picked


def transpose_complex(cx: ChainComplex) -> ChainComplex:
    """Reverse the grading: cells of degree j become degree k - j."""
    k = cx.top_degree
    dims = tuple(reversed(cx.dims))
    boundaries = [cx.boundary(k + 1 - j).transpose() for j in range(1, k + 1)]
    labels = None
    if cx.labels is not None:
        labels = tuple(reversed(cx.labels))
    return ChainComplex(dims, boundaries, labels)


def cycle_complex(n: int) -> ChainComplex:
    """The circle graph with n vertices and n edges as a 1-complex."""
    if n < 1:
        raise ValueError("need at least one cell")
    boundary = Gf2Matrix.from_col_support(
        [(i, (i + 1) % n) for i in range(n)], n
    )
    labels = (
        tuple(f"v{i}" for i in range(n)),
        tuple(f"e{i}" for i in range(n)),
    )
    return ChainComplex((n, n), (boundary,), labels)


# -- CSS extraction ---------------------------------------------------------


@dataclass(frozen=True)
class CssCode:
    """A CSS code presented by its two parity check matrices.

    Rows of h_x are X-checks, rows of h_z are Z-checks, columns are qubits.
    """

    h_x: Gf2Matrix
    h_z: Gf2Matrix

    def __post_init__(self) -> None:
        if self.h_x.n_cols != self.h_z.n_cols:
            raise ValueError("check matrices disagree on qubit count")

    @property
    def n_qubits(self) -> int:
        return self.h_x.n_cols

    def k_logical(self) -> int:
        return self.n_qubits - self.h_x.rank() - self.h_z.rank()

    def validate(self) -> None:
        if not (self.h_x @ self.h_z.transpose()).is_zero():
            raise ValueError("h_x h_z^T is nonzero")

    def syndrome_of_x_error(self, e: BitChain) -> BitChain:
        """Z-check measurements triggered by an X error pattern."""
        return self.h_z.mul_chain(e)

    def syndrome_of_z_error(self, e: BitChain) -> BitChain:
        return self.h_x.mul_chain(e)

    def max_stabilizer_weight(self) -> int:
        return max(self.h_x.max_row_weight(), self.h_z.max_row_weight())


def css_from_complex(cx: ChainComplex, q: int) -> CssCode:
    """Qubits on q-cells, X-checks on (q-1)-cells, Z-checks on (q+1)-cells."""
    if not 0 <= q <= cx.top_degree:
        raise ValueError(f"degree {q} out of range")
    h_x = cx.boundary(q)
    h_z = cx.boundary(q + 1).transpose()
    return CssCode(h_x, h_z)


# -- exact coset minimum weight ---------------------------------------------


def coset_min_weight_exact(
    cx: ChainComplex,
    j: int,
    mode: str = "homology",
    budget: int = 26,
    max_weight: int | None = None,
) -> int | None:
    """Minimum weight of a nontrivial (co)cycle at degree j, by enumeration.

    Walks supports in increasing weight, so the first hit is the distance.
    Returns None when the relevant betti number vanishes. Refuses outright
    when dims[j] exceeds the budget; the caller must raise it consciously.
    """
    n = cx.dims[j]
    if n > budget:
        raise ValueError(
            f"{n} cells at degree {j} exceed the exhaustive budget {budget}; "
            "raise the budget explicitly to enumerate anyway"
        )
    if mode == "homology":
        closer = cx.boundary(j)
        trivializer = cx.boundary(j + 1)
        b = cx.betti(j)
    elif mode == "cohomology":
        closer = cx.boundary(j + 1).transpose()
        trivializer = cx.boundary(j).transpose()
        b = cx.betti(j)  # field coefficients: cohomology rank equals homology rank
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if b == 0:
        return None
    top = n if max_weight is None else min(max_weight, n)
    syndromes = [closer.mul_bits(1 << i) for i in range(n)]
    image_rows = _row_space_eliminators(trivializer.transpose().rows)
    for w in range(1, top + 1):
        for combo in itertools.combinations(range(n), w):
            acc = 0
            for i in combo:
                acc ^= syndromes[i]
            if acc:
                continue
            bits = 0
            for i in combo:
                bits |= 1 << i
            if not _in_row_space(image_rows, bits):
                return w
    raise RuntimeError(
        f"no nontrivial chain of weight <= {top} found although betti = {b}"
    )


def _row_space_eliminators(rows: Iterable[int]) -> dict[int, int]:
    eliminators: dict[int, int] = {}
    for bits in rows:
        while bits:
            lead = bits.bit_length() - 1
            row = eliminators.get(lead)
            if row is None:
                eliminators[lead] = bits
                break
            bits ^= row
    return eliminators


def _in_row_space(eliminators: dict[int, int], bits: int) -> bool:
    while bits:
        lead = bits.bit_length() - 1
        row = eliminators.get(lead)
        if row is None:
            return False
        bits ^= row
    return True


# -- serialization -----------------------------------------------------------

_COMPLEX_HEADER = "fibercode-complex v1"
_LABELS_HEADER = "fibercode-labels v1"


def serialize_complex(cx: ChainComplex) -> str:
    parts = [
        _COMPLEX_HEADER,
        f"degrees {cx.top_degree}",
        "dims " + " ".join(str(d) for d in cx.dims),
    ]
    for j in range(1, cx.top_degree + 1):
        parts.append(f"boundary {j}")
        parts.append(to_alist(cx.boundary(j)).rstrip("\n"))
    parts.append("end")
    return "\n".join(parts) + "\n"


def parse_complex(text: str) -> ChainComplex:
    lines = text.splitlines()
    if not lines or lines[0].strip() != _COMPLEX_HEADER:
        raise ValueError("not a fibercode complex file")
    if not lines[1].startswith("degrees "):
        raise ValueError("missing degrees line")
    k = int(lines[1].split()[1])
    if not lines[2].startswith("dims "):
        raise ValueError("missing dims line")
    dims = tuple(int(t) for t in lines[2].split()[1:])
    if len(dims) != k + 1:
        raise ValueError("dims line disagrees with degrees")
    boundaries = []
    pos = 3
    for j in range(1, k + 1):
        if lines[pos].strip() != f"boundary {j}":
            raise ValueError(f"expected boundary {j} at line {pos + 1}")
        pos += 1
        block = []
        while pos < len(lines) and not (
            lines[pos].startswith("boundary ") or lines[pos].strip() == "end"
        ):
            block.append(lines[pos])
            pos += 1
        mat = from_alist("\n".join(block))
        boundaries.append(mat)
    cx = ChainComplex(dims, boundaries)
    cx.validate()
    return cx


def serialize_labels(cx: ChainComplex) -> str:
    parts = [_LABELS_HEADER]
    for j in range(cx.top_degree + 1):
        parts.append(f"degree {j} {cx.dims[j]}")
        for i in range(cx.dims[j]):
            parts.append(cx.label(j, i))
    return "\n".join(parts) + "\n"


def parse_labels(text: str) -> tuple[tuple[str, ...], ...]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != _LABELS_HEADER:
        raise ValueError("not a fibercode labels file")
    out = []
    pos = 1
    while pos < len(lines):
        head = lines[pos].split()
        if len(head) != 3 or head[0] != "degree":
            raise ValueError(f"bad degree header at line {pos + 1}")
        count = int(head[2])
        block = lines[pos + 1 : pos + 1 + count]
        if len(block) != count:
            raise ValueError("truncated labels block")
        out.append(tuple(block))
        pos += 1 + count
    return tuple(out)
