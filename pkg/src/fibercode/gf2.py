"""GF(2) linear algebra on bit-packed integers.

Matrices store one Python int per row, bit j of row i being entry (i, j).
Everything is immutable after construction, so matrices and chains can be
shared freely between threads. Elimination is deterministic: pivots are
chosen scanning columns left to right and taking the first available row.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

__all__ = [
    "BitChain",
    "Gf2Matrix",
    "parity",
    "bits_from_support",
    "to_alist",
    "from_alist",
]


def parity(x: int) -> int:
    """Parity of the popcount of a nonnegative int."""
    return x.bit_count() & 1


def bits_from_support(support: Iterable[int]) -> int:
    """Pack an iterable of bit positions into an int mask."""
    bits = 0
    for i in support:
        bits |= 1 << i
    return bits


@dataclass(frozen=True)
class BitChain:
    """A GF(2) vector of fixed length, stored as a bit mask.

    Used for chains, cochains, syndromes and error patterns alike. The
    length is part of the value: operations refuse to mix lengths.
    """

    length: int
    bits: int = 0

    def __post_init__(self) -> None:
        if self.length < 0:
            raise ValueError("negative chain length")
        if self.bits < 0 or self.bits >> self.length:
            raise ValueError("bits outside of chain length")

    @classmethod
    def from_support(cls, length: int, support: Iterable[int]) -> "BitChain":
        bits = 0
        for i in support:
            if not 0 <= i < length:
                raise ValueError(f"support index {i} out of range")
            bits |= 1 << i
        return cls(length, bits)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(self.iter_support())

    def iter_support(self) -> Iterator[int]:
        bits = self.bits
        while bits:
            low = bits & -bits
            yield low.bit_length() - 1
            bits ^= low

    def weight(self) -> int:
        return self.bits.bit_count()

    def is_zero(self) -> bool:
        return self.bits == 0

    def get(self, i: int) -> int:
        if not 0 <= i < self.length:
            raise IndexError(i)
        return (self.bits >> i) & 1

    def flip(self, i: int) -> "BitChain":
        if not 0 <= i < self.length:
            raise IndexError(i)
        return BitChain(self.length, self.bits ^ (1 << i))

    def __xor__(self, other: "BitChain") -> "BitChain":
        if self.length != other.length:
            raise ValueError("length mismatch")
        return BitChain(self.length, self.bits ^ other.bits)

    def __and__(self, other: "BitChain") -> "BitChain":
        if self.length != other.length:
            raise ValueError("length mismatch")
        return BitChain(self.length, self.bits & other.bits)

    def __contains__(self, i: int) -> bool:
        return 0 <= i < self.length and (self.bits >> i) & 1 == 1

    def dot(self, other: "BitChain") -> int:
        """GF(2) inner product."""
        if self.length != other.length:
            raise ValueError("length mismatch")
        return parity(self.bits & other.bits)


class Gf2Matrix:
    """Immutable GF(2) matrix with bit-packed rows."""

    __slots__ = ("n_rows", "n_cols", "rows", "_rank")

    def __init__(self, rows: Sequence[int], n_cols: int):
        mask = (1 << n_cols) - 1
        for r in rows:
            if r < 0 or r & ~mask:
                raise ValueError("row bits outside of column range")
        object.__setattr__(self, "n_rows", len(rows))
        object.__setattr__(self, "n_cols", n_cols)
        object.__setattr__(self, "rows", tuple(rows))
        object.__setattr__(self, "_rank", None)

    def __setattr__(self, name, value):  # pragma: no cover - guard
        raise AttributeError("Gf2Matrix is immutable")

    # -- constructors ---------------------------------------------------

    @classmethod
    def zeros(cls, n_rows: int, n_cols: int) -> "Gf2Matrix":
        return cls([0] * n_rows, n_cols)

    @classmethod
    def identity(cls, n: int) -> "Gf2Matrix":
        return cls([1 << i for i in range(n)], n)

    @classmethod
    def from_row_support(
        cls, supports: Sequence[Iterable[int]], n_cols: int
    ) -> "Gf2Matrix":
        return cls([bits_from_support(s) for s in supports], n_cols)

    @classmethod
    def from_col_support(
        cls, supports: Sequence[Iterable[int]], n_rows: int
    ) -> "Gf2Matrix":
        """Build from per-column row-index supports (mod-2 accumulation)."""
        rows = [0] * n_rows
        for j, sup in enumerate(supports):
            for i in sup:
                rows[i] ^= 1 << j
        return cls(rows, len(supports))

    @classmethod
    def from_dense(cls, entries: Sequence[Sequence[int]], n_cols: int | None = None) -> "Gf2Matrix":
        if n_cols is None:
            n_cols = len(entries[0]) if entries else 0
        rows = []
        for row in entries:
            bits = 0
            for j, v in enumerate(row):
                if v & 1:
                    bits |= 1 << j
            rows.append(bits)
        return cls(rows, n_cols)

    # -- basic accessors -------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    def row(self, i: int) -> int:
        return self.rows[i]

    def row_support(self, i: int) -> tuple[int, ...]:
        return tuple(BitChain(self.n_cols, self.rows[i]).iter_support())

    def col_support(self, j: int) -> tuple[int, ...]:
        mask = 1 << j
        return tuple(i for i, r in enumerate(self.rows) if r & mask)

    def entry(self, i: int, j: int) -> int:
        return (self.rows[i] >> j) & 1

    def is_zero(self) -> bool:
        return all(r == 0 for r in self.rows)

    def density(self) -> int:
        """Total number of nonzero entries."""
        return sum(r.bit_count() for r in self.rows)

    def max_row_weight(self) -> int:
        return max((r.bit_count() for r in self.rows), default=0)

    def max_col_weight(self) -> int:
        counts = [0] * self.n_cols
        for r in self.rows:
            while r:
                low = r & -r
                counts[low.bit_length() - 1] += 1
                r ^= low
        return max(counts, default=0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Gf2Matrix):
            return NotImplemented
        return (
            self.n_cols == other.n_cols
            and self.rows == other.rows
        )

    def __hash__(self) -> int:
        return hash((self.n_cols, self.rows))

    def __repr__(self) -> str:
        return f"Gf2Matrix({self.n_rows}x{self.n_cols})"

    # -- algebra ---------------------------------------------------------

    def transpose(self) -> "Gf2Matrix":
        cols = [0] * self.n_cols
        for i, r in enumerate(self.rows):
            bit = 1 << i
            while r:
                low = r & -r
                cols[low.bit_length() - 1] |= bit
                r ^= low
        return Gf2Matrix(cols, self.n_rows)

    def __add__(self, other: "Gf2Matrix") -> "Gf2Matrix":
        if self.shape != other.shape:
            raise ValueError("shape mismatch")
        return Gf2Matrix(
            [a ^ b for a, b in zip(self.rows, other.rows)], self.n_cols
        )

    def __matmul__(self, other: "Gf2Matrix") -> "Gf2Matrix":
        if self.n_cols != other.n_rows:
            raise ValueError(
                f"shape mismatch: {self.shape} @ {other.shape}"
            )
        out = []
        orows = other.rows
        for r in self.rows:
            acc = 0
            while r:
                low = r & -r
                acc ^= orows[low.bit_length() - 1]
                r ^= low
            out.append(acc)
        return Gf2Matrix(out, other.n_cols)

    def mul_bits(self, x: int) -> int:
        """Apply the matrix to a column vector given as a bit mask."""
        acc = 0
        for i, r in enumerate(self.rows):
            if (r & x).bit_count() & 1:
                acc |= 1 << i
        return acc

    def mul_chain(self, c: BitChain) -> BitChain:
        if c.length != self.n_cols:
            raise ValueError("length mismatch")
        return BitChain(self.n_rows, self.mul_bits(c.bits))

    # -- elimination -----------------------------------------------------

    def _rref(self) -> tuple[list[int], list[tuple[int, int]]]:
        """Reduced row echelon form.

        Returns (rows, pivots) where pivots is a list of (row, col) pairs
        in increasing column order. Deterministic: the pivot for a column
        is the first remaining row with a 1 there.
        """
        rows = list(self.rows)
        pivots: list[tuple[int, int]] = []
        pivot_row = 0
        n_rows = self.n_rows
        for col in range(self.n_cols):
            mask = 1 << col
            src = -1
            for r in range(pivot_row, n_rows):
                if rows[r] & mask:
                    src = r
                    break
            if src < 0:
                continue
            rows[pivot_row], rows[src] = rows[src], rows[pivot_row]
            piv = rows[pivot_row]
            for r in range(n_rows):
                if r != pivot_row and rows[r] & mask:
                    rows[r] ^= piv
            pivots.append((pivot_row, col))
            pivot_row += 1
            if pivot_row == n_rows:
                break
        return rows, pivots

    def rank(self) -> int:
        if self._rank is None:
            _, pivots = self._rref()
            object.__setattr__(self, "_rank", len(pivots))
        return self._rank

    def solve(self, b: BitChain) -> BitChain | None:
        """One solution of M x = b with free variables set to zero.

        Returns None when the system is inconsistent.
        """
        if b.length != self.n_rows:
            raise ValueError("rhs length mismatch")
        # Augment with b as an extra column and reduce.
        aug_col = 1 << self.n_cols
        rows = [
            r | (aug_col if (b.bits >> i) & 1 else 0)
            for i, r in enumerate(self.rows)
        ]
        aug = Gf2Matrix(rows, self.n_cols + 1)
        red, pivots = aug._rref()
        x = 0
        for r, c in pivots:
            if c == self.n_cols:
                return None  # pivot in the augmented column: inconsistent
            if red[r] & aug_col:
                x |= 1 << c
        return BitChain(self.n_cols, x)

    def kernel_basis(self) -> list[BitChain]:
        """Basis of the right null space, one vector per free column."""
        red, pivots = self._rref()
        pivot_cols = {c: r for r, c in pivots}
        basis = []
        for f in range(self.n_cols):
            if f in pivot_cols:
                continue
            v = 1 << f
            fmask = 1 << f
            for c, r in pivot_cols.items():
                if red[r] & fmask:
                    v |= 1 << c
            basis.append(BitChain(self.n_cols, v))
        return basis

    def row_space_contains(self, c: BitChain) -> bool:
        """Whether c is a GF(2) combination of the rows."""
        if c.length != self.n_cols:
            raise ValueError("length mismatch")
        return self.transpose().solve(c) is not None


# -- alist serialization --------------------------------------------------


def to_alist(mat: Gf2Matrix) -> str:
    """Serialize a parity-check style matrix in alist format.

    First line is "cols rows". Index lists are 1-based and zero-padded to
    the maximum weight, matching the classic Gallager/MacKay layout.
    """
    n, m = mat.n_cols, mat.n_rows
    col_lists = [list(mat.col_support(j)) for j in range(n)]
    row_lists = [list(mat.row_support(i)) for i in range(m)]
    mcw = max((len(c) for c in col_lists), default=0)
    mrw = max((len(r) for r in row_lists), default=0)
    lines = [
        f"{n} {m}",
        f"{mcw} {mrw}",
        " ".join(str(len(c)) for c in col_lists),
        " ".join(str(len(r)) for r in row_lists),
    ]
    for c in col_lists:
        padded = [i + 1 for i in c] + [0] * (mcw - len(c))
        lines.append(" ".join(str(i) for i in padded))
    for r in row_lists:
        padded = [j + 1 for j in r] + [0] * (mrw - len(r))
        lines.append(" ".join(str(j) for j in padded))
    return "\n".join(lines) + "\n"


def from_alist(text: str) -> Gf2Matrix:
    """Parse an alist produced by to_alist (padding zeros ignored)."""
    tokens = text.split()
    pos = 0

    def take(k: int) -> list[int]:
        nonlocal pos
        out = [int(t) for t in tokens[pos : pos + k]]
        if len(out) != k:
            raise ValueError("truncated alist")
        pos += k
        return out

    n, m = take(2)
    mcw, mrw = take(2)
    col_degs = take(n)
    row_degs = take(m)
    rows = [0] * m
    for j in range(n):
        entries = take(mcw) if mcw else []
        live = [e - 1 for e in entries if e > 0]
        if len(live) != col_degs[j]:
            raise ValueError(f"column {j} degree mismatch")
        for i in live:
            if not 0 <= i < m:
                raise ValueError("row index out of range")
            rows[i] |= 1 << j
    # Row lists are redundant; read them and cross-check.
    for i in range(m):
        entries = take(mrw) if mrw else []
        live = sorted(e - 1 for e in entries if e > 0)
        if len(live) != row_degs[i]:
            raise ValueError(f"row {i} degree mismatch")
        expect = sorted(
            BitChain(n, rows[i]).iter_support()
        )
        if live != expect:
            raise ValueError(f"row {i} list inconsistent with columns")
    return Gf2Matrix(rows, n)
