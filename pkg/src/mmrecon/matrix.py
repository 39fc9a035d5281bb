"""Sparse GF(2) parity-check matrices and PEG construction.

A matrix is stored as dual CSR adjacency (check side and variable side)
because decoding walks both directions every iteration. Instances are
immutable after construction and safe to share across decoder threads.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels

__all__ = [
    "ConstructionError",
    "DegreeProfile",
    "ParityCheckMatrix",
    "MatrixEnsemble",
    "peg_construct",
    "build_ensemble",
    "code_rate",
]


class ConstructionError(ValueError):
    """Raised when a matrix cannot be built as requested."""


@dataclass(frozen=True)
class DegreeProfile:
    """Target column degrees: one uniform value or an explicit per-column list."""

    column_degree: int | None = None
    column_degrees: tuple[int, ...] | None = None

    def __post_init__(self):
        if (self.column_degree is None) == (self.column_degrees is None):
            raise ValueError("give exactly one of column_degree or column_degrees")
        if self.column_degree is not None and self.column_degree < 2:
            raise ValueError(f"column degree must be >= 2, got {self.column_degree}")
        if self.column_degrees is not None and any(d < 2 for d in self.column_degrees):
            raise ValueError("all column degrees must be >= 2")

    @classmethod
    def regular(cls, degree: int) -> "DegreeProfile":
        return cls(column_degree=degree)

    def resolve(self, n: int, m: int) -> np.ndarray:
        """Per-column degree array, validated against the target shape."""
        if self.column_degree is not None:
            deg = np.full(n, self.column_degree, dtype=np.int32)
        else:
            if len(self.column_degrees) != n:
                raise ConstructionError(
                    f"profile lists {len(self.column_degrees)} degrees for n={n} columns"
                )
            deg = np.asarray(self.column_degrees, dtype=np.int32)
        if int(deg.max()) > m:
            raise ConstructionError(
                f"column degree {int(deg.max())} exceeds m={m}: parallel edges would be forced"
            )
        if int(deg.sum()) > n * m:
            raise ConstructionError("edge budget exceeds n*m")
        return deg


class ParityCheckMatrix:
    """Bipartite Tanner graph over GF(2) with dual (check/variable) adjacency."""

    __slots__ = ("n", "m", "chk_ptr", "chk_var", "var_ptr", "var_chk")

    def __init__(self, n, m, chk_ptr, chk_var, var_ptr, var_chk):
        self.n = int(n)
        self.m = int(m)
        self.chk_ptr = chk_ptr
        self.chk_var = chk_var
        self.var_ptr = var_ptr
        self.var_chk = var_chk
        for a in (chk_ptr, chk_var, var_ptr, var_chk):
            a.setflags(write=False)

    @classmethod
    def from_check_adjacency(cls, n: int, m: int, rows: list[np.ndarray]) -> "ParityCheckMatrix":
        """Build and validate from per-check variable index lists."""
        if not 0 < m < n:
            raise ValueError(f"need 0 < m < n, got m={m}, n={n}")
        if len(rows) != m:
            raise ValueError(f"{len(rows)} adjacency rows for m={m} checks")
        deg = np.array([len(r) for r in rows], dtype=np.int64)
        chk_ptr = np.zeros(m + 1, dtype=np.int64)
        np.cumsum(deg, out=chk_ptr[1:])
        chk_var = np.empty(chk_ptr[-1], dtype=np.int32)
        for j, r in enumerate(rows):
            rr = np.sort(np.asarray(r, dtype=np.int32))
            if rr.size and (rr[0] < 0 or rr[-1] >= n):
                raise ValueError(f"check {j}: variable index out of range [0, {n})")
            if rr.size > 1 and np.any(rr[1:] == rr[:-1]):
                raise ValueError(f"check {j}: parallel edge")
            chk_var[chk_ptr[j]:chk_ptr[j + 1]] = rr
        # transpose: sort edges by (variable, check); check order per variable
        # is ascending since chk_var is grouped by check already
        order = np.argsort(chk_var, kind="stable")
        col_deg = np.bincount(chk_var, minlength=n)
        if np.any(col_deg == 0):
            bad = int(np.argmin(col_deg))
            raise ValueError(f"variable {bad} has degree 0")
        var_ptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(col_deg, out=var_ptr[1:])
        check_of_edge = np.repeat(np.arange(m, dtype=np.int32), deg)
        var_chk = check_of_edge[order]
        return cls(n, m, chk_ptr, chk_var, var_ptr, var_chk)

    @property
    def edge_count(self) -> int:
        return int(self.chk_var.shape[0])

    def row_adj(self, j: int) -> np.ndarray:
        """Sorted variable indices of check j."""
        return self.chk_var[self.chk_ptr[j]:self.chk_ptr[j + 1]]

    def col_adj(self, i: int) -> np.ndarray:
        """Sorted check indices of variable i."""
        return self.var_chk[self.var_ptr[i]:self.var_ptr[i + 1]]

    def row_degrees(self) -> np.ndarray:
        return np.diff(self.chk_ptr)

    def column_degrees(self) -> np.ndarray:
        return np.diff(self.var_ptr)

    def to_dense(self) -> np.ndarray:
        """Dense uint8 image; test-sized matrices only."""
        h = np.zeros((self.m, self.n), dtype=np.uint8)
        for j in range(self.m):
            h[j, self.row_adj(j)] = 1
        return h

    def girth(self) -> int:
        """Shortest cycle length, 0 if the graph is a forest."""
        node_ptr = np.concatenate([self.var_ptr, self.var_ptr[-1] + self.chk_ptr[1:]])
        node_adj = np.concatenate([self.var_chk + np.int32(self.n), self.chk_var])
        return _kernels.graph_girth(node_ptr, node_adj.astype(np.int32), self.n, self.n + self.m)

    def content_hash(self) -> str:
        """SHA-256 over the canonical (n, m, edge list) encoding."""
        h = hashlib.sha256()
        h.update(np.array([self.n, self.m], dtype="<i8").tobytes())
        h.update(self.chk_ptr.astype("<i8").tobytes())
        h.update(self.chk_var.astype("<i4").tobytes())
        return h.hexdigest()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ParityCheckMatrix):
            return NotImplemented
        return (
            self.n == other.n
            and self.m == other.m
            and np.array_equal(self.chk_ptr, other.chk_ptr)
            and np.array_equal(self.chk_var, other.chk_var)
        )

    def __hash__(self) -> int:
        return hash(self.content_hash())

    def __repr__(self) -> str:
        return f"ParityCheckMatrix(n={self.n}, m={self.m}, edges={self.edge_count})"


@dataclass(frozen=True)
class MatrixEnsemble:
    """Ordered set of u parity-check matrices over one variable-node set."""

    matrices: tuple[ParityCheckMatrix, ...]

    def __post_init__(self):
        if len(self.matrices) < 1:
            raise ValueError("ensemble needs at least one matrix")
        n, m = self.matrices[0].n, self.matrices[0].m
        for k, h in enumerate(self.matrices):
            if (h.n, h.m) != (n, m):
                raise ValueError(
                    f"matrix {k} has shape ({h.m}, {h.n}), expected ({m}, {n})"
                )
        for a in range(len(self.matrices)):
            for b in range(a + 1, len(self.matrices)):
                if self.matrices[a] == self.matrices[b]:
                    raise ValueError(f"matrices {a} and {b} have identical edge sets")

    @property
    def u(self) -> int:
        return len(self.matrices)

    @property
    def n(self) -> int:
        return self.matrices[0].n

    @property
    def m(self) -> int:
        return self.matrices[0].m

    def prefix(self, u: int) -> "MatrixEnsemble":
        """Sub-ensemble of the first u matrices."""
        if not 1 <= u <= self.u:
            raise ValueError(f"u={u} outside [1, {self.u}]")
        return MatrixEnsemble(self.matrices[:u])

    def content_hashes(self) -> list[str]:
        return [h.content_hash() for h in self.matrices]


def peg_construct(n: int, m: int, profile: DegreeProfile, seed: int) -> ParityCheckMatrix:
    """Progressive-edge-growth construction; deterministic for a fixed seed."""
    if not 0 < m < n:
        raise ConstructionError(f"need 0 < m < n, got m={m}, n={n}")
    col_deg = profile.resolve(n, m)
    edges = int(col_deg.sum())
    cap = max(8, (edges + m - 1) // m + 4)
    while True:
        cn_adj = np.full((m, cap), -1, dtype=np.int32)
        cn_deg = np.zeros(m, dtype=np.int32)
        vn_adj = np.full((n, int(col_deg.max())), -1, dtype=np.int32)
        vn_deg = np.zeros(n, dtype=np.int32)
        status = _kernels.peg_build(n, m, col_deg, cn_adj, cn_deg, vn_adj, vn_deg, seed & 0xFFFFFFFFFFFFFFFF)
        if status == 0:
            break
        if status == -1:
            cap *= 2
            continue
        raise ConstructionError("PEG found no attachable check node")
    rows = [cn_adj[j, :cn_deg[j]] for j in range(m)]
    return ParityCheckMatrix.from_check_adjacency(n, m, rows)


def build_ensemble(
    n: int,
    m: int,
    profile: DegreeProfile,
    u: int,
    base_seed: int,
    workers: int | None = None,
) -> MatrixEnsemble:
    """u PEG matrices from seeds base_seed..base_seed+u-1.

    Members are constructed in parallel (they are independent); duplicate
    edge sets raise rather than silently retrying, so seed choice stays
    with the caller.
    """
    if u < 1:
        raise ValueError(f"u must be >= 1, got {u}")
    seeds = [base_seed + k for k in range(u)]
    if u == 1 or (workers is not None and workers <= 1):
        mats = [peg_construct(n, m, profile, s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=workers or min(u, 4)) as pool:
            mats = list(pool.map(lambda s: peg_construct(n, m, profile, s), seeds))
    return MatrixEnsemble(tuple(mats))


def code_rate(matrix: ParityCheckMatrix) -> float:
    """R = 1 - m/n."""
    return 1.0 - matrix.m / matrix.n
