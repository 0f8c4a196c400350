"""Encoding a k x k source block to 2k node vectors and getting it back.

Nodes 1..k are systematic and store the columns x_1..x_k of the source
matrix X uncoded.  Nodes k+1..2k store the columns y_1..y_k of

    Y = delta * V_hat X^t U + epsilon * X P        (forward map F)

and the inverse view treats Y as the information:

    X = delta' * U_hat Y^t V + epsilon' * Y Q      (dual map G)

With the parameter conditions of :mod:`mscr.params`, G(F(X)) = X for every
block, and any k node vectors determine X (the MDS property); `collect`
realizes that by solving a k^2 x k^2 linear system.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .galois import FieldElement
from .linalg import DimensionMismatch, Matrix
from .params import CodeParams

__all__ = [
    "DuplicateNodes",
    "InconsistentContents",
    "IndexOutOfRange",
    "NodeContent",
    "ParityBlock",
    "SourceBlock",
    "collect",
    "collection_matrix",
    "dual_encode",
    "encode",
    "encode_matrix",
    "node_contents",
    "z_column",
]


class DuplicateNodes(ValueError):
    """The same node id appears twice in a collection request."""


class InconsistentContents(ValueError):
    """Provided node contents are not in the image of the code."""


class IndexOutOfRange(IndexError):
    """A 1-based column index falls outside 1..k."""


@dataclass(frozen=True)
class SourceBlock:
    """One data chunk: column j is the content of systematic node j."""

    x: Matrix


@dataclass(frozen=True)
class ParityBlock:
    """Encoded chunk: column j is the content of parity node k+j."""

    y: Matrix


@dataclass(frozen=True)
class NodeContent:
    """The k symbols stored by one node (ids are 1-based, 1..2k)."""

    node_id: int
    vector: tuple[FieldElement, ...]


def _check_block(m: Matrix, params: CodeParams) -> None:
    if m.shape != (params.k, params.k) or m.spec != params.field:
        raise DimensionMismatch(
            f"block shape {m.shape} does not fit k={params.k} over {params.field!r}")


def encode(block: SourceBlock, params: CodeParams) -> ParityBlock:
    """Forward map: parity matrix Y from source matrix X."""
    x = block.x
    _check_block(x, params)
    aligned = (params.v_hat @ x.transpose() @ params.u).scalar_mul(params.delta)
    mixed = (x @ params.p).scalar_mul(params.epsilon)
    return ParityBlock(aligned + mixed)


def dual_encode(block: ParityBlock, params: CodeParams) -> SourceBlock:
    """Inverse map: source matrix X from parity matrix Y."""
    y = block.y
    _check_block(y, params)
    aligned = (params.u_hat @ y.transpose() @ params.v).scalar_mul(params.delta_prime)
    mixed = (y @ params.q).scalar_mul(params.epsilon_prime)
    return SourceBlock(aligned + mixed)


def z_column(x: Matrix, mix: Matrix, j: int) -> tuple[FieldElement, ...]:
    """Column j (1-based) of x @ mix, built as the combination sum_l mix[l][j] x_l.

    Used for both mixing directions: (X, P) gives z_j, (Y, Q) gives z'_j.
    """
    if not 1 <= j <= mix.cols:
        raise IndexOutOfRange(f"column {j} outside 1..{mix.cols}")
    if x.cols != mix.rows or x.spec != mix.spec:
        raise DimensionMismatch(f"z_column of {x.shape} against {mix.shape}")
    spec = x.spec
    acc = [0] * x.rows
    for l in range(mix.rows):
        c = mix.int_at(l, j - 1)
        if c:
            for r in range(x.rows):
                acc[r] ^= spec.mul_int(c, x.int_at(r, l))
    return tuple(FieldElement(v, spec) for v in acc)


def node_contents(block: SourceBlock, parity: ParityBlock,
                  params: CodeParams) -> list[NodeContent]:
    """All 2k node vectors for one chunk, in node-id order."""
    out = [NodeContent(j + 1, block.x.col(j)) for j in range(params.k)]
    out += [NodeContent(params.k + j + 1, parity.y.col(j)) for j in range(params.k)]
    return out


def _vec_index(r: int, c: int, k: int) -> int:
    # Row-major flattening of a k x k block.
    return r * k + c


@lru_cache(maxsize=None)
def encode_matrix(params: CodeParams) -> Matrix:
    """The k^2 x k^2 matrix E with vec(Y) = E vec(X), found by probing encode().

    The forward map is linear, so feeding in the k^2 unit blocks yields its
    matrix one column at a time.
    """
    k, field = params.k, params.field
    cols = []
    for s in range(k):
        for i in range(k):
            unit = Matrix(field, [[1 if (r, c) == (s, i) else 0 for c in range(k)]
                                  for r in range(k)])
            y = encode(SourceBlock(unit), params).y
            cols.append([y.int_at(r, c) for r in range(k) for c in range(k)])
    return Matrix(field, [[cols[j][i] for j in range(k * k)] for i in range(k * k)])


@lru_cache(maxsize=None)
def collection_matrix(node_ids: tuple[int, ...], params: CodeParams) -> Matrix:
    """Coefficient matrix of the k^2-unknown system solved by collect().

    Rows are grouped per node in sorted id order, k coordinate equations
    each; unknowns are vec(X) row-major.  Systematic nodes contribute unit
    rows, parity nodes the matching rows of the encode matrix.
    """
    k, field = params.k, params.field
    enc = encode_matrix(params)
    rows: list[list[int]] = []
    for nid in sorted(node_ids):
        if nid <= k:
            for r in range(k):
                row = [0] * (k * k)
                row[_vec_index(r, nid - 1, k)] = 1
                rows.append(row)
        else:
            c = nid - k - 1
            for r in range(k):
                rows.append([enc.int_at(_vec_index(r, c, k), t) for t in range(k * k)])
    return Matrix(field, rows)


def collect(contents: Sequence[NodeContent], params: CodeParams) -> SourceBlock:
    """Rebuild the source block from any k distinct node contents.

    After solving, the result is re-encoded and compared against every
    provided vector; a mismatch means the inputs were not a codeword.
    """
    k, field = params.k, params.field
    ids = [c.node_id for c in contents]
    if len(set(ids)) != len(ids):
        raise DuplicateNodes(f"node ids {ids} contain duplicates")
    if len(ids) != k:
        raise ValueError(f"collect needs exactly k={k} nodes, got {len(ids)}")
    if any(not 1 <= i <= 2 * k for i in ids):
        raise ValueError(f"node ids {ids} outside 1..{2 * k}")
    for c in contents:
        if len(c.vector) != k or any(e.spec != field for e in c.vector):
            raise DimensionMismatch(f"node {c.node_id} vector does not fit the code")

    by_id = {c.node_id: c for c in contents}
    ordered = [by_id[i] for i in sorted(ids)]

    if all(i <= k for i in ids):
        # Systematic nodes store X uncoded; read the columns straight off.
        x = Matrix(field, [[ordered[c].vector[r].value for c in range(k)]
                           for r in range(k)])
        return SourceBlock(x)

    a = collection_matrix(tuple(sorted(ids)), params)
    rhs = Matrix.column([sym for c in ordered for sym in c.vector])
    vec = a.solve(rhs)
    x = Matrix(field, [[vec.int_at(_vec_index(r, c, k), 0) for c in range(k)]
                       for r in range(k)])
    block = SourceBlock(x)

    reencoded = {c.node_id: c.vector
                 for c in node_contents(block, encode(block, params), params)}
    for c in contents:
        if reencoded[c.node_id] != c.vector:
            raise InconsistentContents(
                f"content of node {c.node_id} is outside the code image")
    return block
