"""alist interchange format for sparse parity-check matrices.

Layout (MacKay's convention, 1-based indices):

    line 1: n m
    line 2: max_col_degree max_row_degree
    line 3: n column degrees
    line 4: m row degrees
    next n lines: per-column check indices, zero-padded to max_col_degree
    next m lines: per-row variable indices, zero-padded to max_row_degree

Zero entries in the index lines are padding and are ignored on load.
"""

from __future__ import annotations

from typing import BinaryIO

import numpy as np

from .matrix import ParityCheckMatrix

__all__ = ["AlistParseError", "save_alist", "load_alist"]


class AlistParseError(ValueError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"alist line {line_no}: {reason}")
        self.line_no = line_no


def save_alist(matrix: ParityCheckMatrix, sink: BinaryIO) -> None:
    """Write a matrix in alist form (deterministic byte output)."""
    col_deg = matrix.column_degrees()
    row_deg = matrix.row_degrees()
    max_col = int(col_deg.max())
    max_row = int(row_deg.max()) if matrix.m else 0
    out = [
        f"{matrix.n} {matrix.m}",
        f"{max_col} {max_row}",
        " ".join(str(int(d)) for d in col_deg),
        " ".join(str(int(d)) for d in row_deg),
    ]
    for i in range(matrix.n):
        entries = [str(int(c) + 1) for c in matrix.col_adj(i)]
        entries += ["0"] * (max_col - len(entries))
        out.append(" ".join(entries))
    for j in range(matrix.m):
        entries = [str(int(v) + 1) for v in matrix.row_adj(j)]
        entries += ["0"] * (max_row - len(entries))
        out.append(" ".join(entries))
    sink.write(("\n".join(out) + "\n").encode("ascii"))


def _ints(line: str, line_no: int) -> list[int]:
    try:
        return [int(tok) for tok in line.split()]
    except ValueError:
        raise AlistParseError(line_no, f"non-integer token in {line.strip()!r}") from None


def load_alist(source: BinaryIO) -> ParityCheckMatrix:
    """Parse an alist stream; errors name the offending line (1-based)."""
    text = source.read().decode("ascii", errors="replace")
    lines = [ln for ln in text.splitlines()]
    # drop trailing blank lines but keep interior ones so numbering is honest
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise AlistParseError(1, "empty stream")

    def need(idx: int) -> str:
        if idx >= len(lines):
            raise AlistParseError(idx + 1, "unexpected end of stream")
        return lines[idx]

    head = _ints(need(0), 1)
    if len(head) != 2:
        raise AlistParseError(1, "expected 'n m'")
    n, m = head
    if not 0 < m < n:
        raise AlistParseError(1, f"invalid dimensions n={n}, m={m}")
    caps = _ints(need(1), 2)
    if len(caps) != 2:
        raise AlistParseError(2, "expected 'max_col_degree max_row_degree'")
    col_deg = _ints(need(2), 3)
    if len(col_deg) != n:
        raise AlistParseError(3, f"expected {n} column degrees, got {len(col_deg)}")
    row_deg = _ints(need(3), 4)
    if len(row_deg) != m:
        raise AlistParseError(4, f"expected {m} row degrees, got {len(row_deg)}")

    col_lists: list[list[int]] = []
    for i in range(n):
        line_no = 5 + i
        entries = [x for x in _ints(need(4 + i), line_no) if x != 0]
        if len(entries) != col_deg[i]:
            raise AlistParseError(
                line_no,
                f"column {i}: {len(entries)} entries but declared degree {col_deg[i]}",
            )
        for x in entries:
            if not 1 <= x <= m:
                raise AlistParseError(line_no, f"check index {x} outside [1, {m}]")
        col_lists.append(entries)

    rows: list[np.ndarray] = []
    for j in range(m):
        line_no = 5 + n + j
        entries = [x for x in _ints(need(4 + n + j), line_no) if x != 0]
        if len(entries) != row_deg[j]:
            raise AlistParseError(
                line_no,
                f"row {j}: {len(entries)} entries but declared degree {row_deg[j]}",
            )
        for x in entries:
            if not 1 <= x <= n:
                raise AlistParseError(line_no, f"variable index {x} outside [1, {n}]")
        rows.append(np.asarray(entries, dtype=np.int64) - 1)

    try:
        matrix = ParityCheckMatrix.from_check_adjacency(n, m, rows)
    except ValueError as exc:
        raise AlistParseError(5 + n, str(exc)) from exc

    # cross-check the column section against the row section
    for i in range(n):
        declared = sorted(x - 1 for x in col_lists[i])
        if declared != list(matrix.col_adj(i)):
            raise AlistParseError(5 + i, f"column {i} adjacency disagrees with row section")
    return matrix
