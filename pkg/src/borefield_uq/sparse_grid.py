"""Nested sparse-grid interpolation with hierarchical Lagrange surpluses.

One-dimensional node families are the extrema of Chebyshev polynomials
(Clenshaw-Curtis points), which are nested when the count grows as
``m(1) = 1`` and ``m(i) = 2**(i-1) + 1``.  Multi-dimensional interpolants
are sums over a downward-closed set of level multi-indices; each index
contributes the nodes that are new at that level combination, weighted by
hierarchical surpluses (model value minus the value of the interpolant
built from all earlier indices).

Evaluation uses the second barycentric form of the full-level Lagrange
basis, which is numerically stable for every level this module accepts.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import IncompleteBatchError, OutOfDomainError

MAX_LEVEL = 12


def num_nodes(level: int) -> int:
    """Number of nodes of the one-dimensional rule at ``level`` (1-based)."""
    if level < 1:
        raise ValueError(f"level must be >= 1, got {level}")
    if level == 1:
        return 1
    return 2 ** (level - 1) + 1


@lru_cache(maxsize=None)
def nodes(level: int) -> np.ndarray:
    """Full node set of the rule at ``level``, ascending in [-1, 1].

    Nodes are ``-cos(pi * (j - 1) / (m - 1))`` for ``j = 1..m``.  The
    ratio ``(j - 1)/(m - 1)`` is a dyadic rational, so a node shared by
    two levels is computed from the bit-identical ratio at both levels
    and the sets nest exactly, with no tolerance involved.  The center
    node and the symmetry of the set are enforced exactly as well.
    """
    if level > MAX_LEVEL:
        raise ValueError(f"level {level} exceeds supported maximum {MAX_LEVEL}")
    m = num_nodes(level)
    if m == 1:
        x = np.zeros(1)
    else:
        ratio = np.arange(m) / (m - 1)
        x = -np.cos(np.pi * ratio)
        x[0] = -1.0
        x[-1] = 1.0
        x[m // 2] = 0.0
        # mirror the first half so the set is symmetric to the last bit
        x[m // 2 + 1:] = -x[: m // 2][::-1]
    x.setflags(write=False)
    return x


@lru_cache(maxsize=None)
def new_nodes(level: int) -> np.ndarray:
    """Nodes present at ``level`` but absent from ``level - 1``."""
    full = nodes(level)
    if level == 1:
        out = full.copy()
    else:
        prev = set(nodes(level - 1).tolist())
        out = np.array([v for v in full.tolist() if v not in prev])
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _new_node_positions(level: int) -> np.ndarray:
    """Positions of the new nodes inside the full node set of ``level``."""
    full = nodes(level).tolist()
    pos = np.array([full.index(v) for v in new_nodes(level).tolist()], dtype=np.int64)
    pos.setflags(write=False)
    return pos


@lru_cache(maxsize=None)
def _bary_weights(level: int) -> np.ndarray:
    """Barycentric weights for the Chebyshev-extrema nodes of ``level``.

    Up to a common factor, which cancels in the second barycentric form,
    the weights are ``(-1)**j`` with the two end weights halved.
    """
    m = num_nodes(level)
    w = np.ones(m)
    w[1::2] = -1.0
    if m > 1:
        w[0] *= 0.5
        w[-1] *= 0.5
    w.setflags(write=False)
    return w


def basis_matrix(level: int, x) -> np.ndarray:
    """Values of every full-level Lagrange basis polynomial at ``x``.

    Parameters
    ----------
    level : int
        One-dimensional level, >= 1.
    x : array_like
        Query coordinates in reference space.

    Returns
    -------
    ndarray, shape (m, len(x))
        ``out[j, q]`` is the basis polynomial anchored at node ``j``
        evaluated at ``x[q]``.  Rows for query points that coincide
        bitwise with a node are exact unit vectors.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    m = num_nodes(level)
    if m == 1:
        return np.ones((1, x.size))
    z = nodes(level)
    w = _bary_weights(level)
    diff = x[None, :] - z[:, None]
    exact = diff == 0.0
    hit = exact.any(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = w[:, None] / diff
        out = terms / terms.sum(axis=0, keepdims=True)
    if hit.any():
        out[:, hit] = exact[:, hit]
    return out


def hier_basis_eval(level: int, node: float, x) -> np.ndarray | float:
    """Evaluate one hierarchical basis polynomial.

    The basis attached to a node that first appears at ``level`` is the
    full Lagrange polynomial over every node of that level, so it is one
    at its own node and zero at the others; at level 1 it is the
    constant one.

    Parameters
    ----------
    level : int
        Level at which the node is new.
    node : float
        Anchor node; must belong to ``new_nodes(level)`` exactly.
    x : array_like or float
        Reference coordinates to evaluate at.

    Returns
    -------
    ndarray or float
        Basis values, scalar if ``x`` is scalar.
    """
    nn = new_nodes(level).tolist()
    if float(node) not in nn:
        raise ValueError(f"node {node!r} is not a new node of level {level}")
    pos = int(_new_node_positions(level)[nn.index(float(node))])
    scalar = np.isscalar(x) or np.ndim(x) == 0
    vals = basis_matrix(level, x)[pos]
    return float(vals[0]) if scalar else vals


def smolyak_indices(level: int, dimension: int) -> list[tuple[int, ...]]:
    """Multi-indices of the isotropic construction at ``level``.

    Returns every index ``i >= (1, ..., 1)`` with ``sum(i_d - 1) <= level``,
    ordered by total level then lexicographically, so every prefix of the
    list is downward closed.
    """
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    if dimension < 1:
        raise ValueError(f"dimension must be >= 1, got {dimension}")
    out = []

    def extend(prefix, budget):
        if len(prefix) == dimension:
            out.append(tuple(prefix))
            return
        for inc in range(budget + 1):
            extend(prefix + [1 + inc], budget - inc)

    extend([], level)
    out.sort(key=lambda idx: (sum(idx), idx))
    return out


def index_new_points(index: tuple[int, ...]) -> np.ndarray:
    """Collocation points introduced by ``index``, in reference coordinates.

    The points are the tensor product of the per-dimension new node sets,
    enumerated with the first dimension varying slowest.
    """
    grids = [new_nodes(l).tolist() for l in index]
    return np.array(list(itertools.product(*grids)), dtype=float).reshape(-1, len(index))


def smolyak_grid(level: int, dimension: int) -> np.ndarray:
    """All collocation points of the isotropic construction at ``level``.

    Returns
    -------
    ndarray, shape (n_points, dimension)
        Distinct points in reference coordinates, sorted lexicographically.
    """
    chunks = [index_new_points(idx) for idx in smolyak_indices(level, dimension)]
    pts = np.vstack(chunks)
    order = np.lexsort(pts.T[::-1])
    pts = pts[order]
    if pts.shape[0] > 1 and (np.diff(pts, axis=0) == 0.0).all(axis=1).any():
        raise AssertionError("duplicate collocation points in sparse grid")
    return pts


def _check_domain(domain) -> np.ndarray:
    domain = np.asarray(domain, dtype=float)
    if domain.ndim != 2 or domain.shape[1] != 2:
        raise ValueError(f"domain must have shape (d, 2), got {domain.shape}")
    if not np.isfinite(domain).all():
        raise ValueError("domain bounds must be finite")
    if not (domain[:, 0] < domain[:, 1]).all():
        raise ValueError("each domain interval needs lower < upper")
    return domain


@dataclass(frozen=True)
class SparseInterpolant:
    """Hierarchical sparse-grid interpolant on a box domain.

    Instances are immutable; refinement produces new objects that share
    the unchanged arrays.  ``levels``, ``node_pos`` and ``ref_points``
    run parallel over collocation points: the level multi-index each
    point belongs to, the position of its coordinate inside the full
    one-dimensional node set of that level, and the reference
    coordinates themselves.  ``point_owner`` maps each point to its
    position in ``index_set``.
    """

    dimension: int
    domain: np.ndarray
    index_set: tuple[tuple[int, ...], ...]
    levels: np.ndarray
    node_pos: np.ndarray
    ref_points: np.ndarray
    surpluses: np.ndarray
    point_owner: np.ndarray
    labels: tuple[str, ...] | None = None

    @property
    def n_points(self) -> int:
        return int(self.surpluses.size)

    def to_reference(self, x: np.ndarray) -> np.ndarray:
        a = self.domain[:, 0]
        b = self.domain[:, 1]
        return (2.0 * x - (a + b)) / (b - a)

    def from_reference(self, t: np.ndarray) -> np.ndarray:
        a = self.domain[:, 0]
        b = self.domain[:, 1]
        return a + (t + 1.0) * 0.5 * (b - a)


def empty_interpolant(domain, labels=None) -> SparseInterpolant:
    """Interpolant with no collocation points over ``domain``."""
    domain = _check_domain(domain)
    d = domain.shape[0]
    return SparseInterpolant(
        dimension=d,
        domain=domain,
        index_set=(),
        levels=np.zeros((0, d), dtype=np.int16),
        node_pos=np.zeros((0, d), dtype=np.int32),
        ref_points=np.zeros((0, d)),
        surpluses=np.zeros(0),
        point_owner=np.zeros(0, dtype=np.int32),
        labels=None if labels is None else tuple(labels),
    )


def _check_index(itp: SparseInterpolant, index) -> tuple[int, ...]:
    index = tuple(int(v) for v in index)
    if len(index) != itp.dimension:
        raise ValueError(f"index length {len(index)} != dimension {itp.dimension}")
    if any(v < 1 for v in index):
        raise ValueError(f"index entries must be >= 1, got {index}")
    if index in itp.index_set:
        raise ValueError(f"index {index} already present")
    have = set(itp.index_set)
    for d in range(itp.dimension):
        if index[d] > 1:
            parent = index[:d] + (index[d] - 1,) + index[d + 1:]
            if parent not in have:
                raise ValueError(
                    f"index {index} is not admissible: missing backward neighbor {parent}"
                )
    return index


def _eval_ref(itp: SparseInterpolant, tq: np.ndarray) -> np.ndarray:
    """Evaluate at reference-coordinate queries ``tq`` of shape (n, d)."""
    n = tq.shape[0]
    out = np.zeros(n)
    if itp.n_points == 0 or n == 0:
        return out
    p = itp.n_points
    # product of per-dimension basis values, built level by level
    factors = np.ones((p, n))
    for d in range(itp.dimension):
        col = itp.levels[:, d]
        for lev in np.unique(col):
            if lev == 1:
                continue
            rows = np.flatnonzero(col == lev)
            bm = basis_matrix(int(lev), tq[:, d])
            factors[rows] *= bm[itp.node_pos[rows, d]]
    return itp.surpluses @ factors


def compute_surpluses(itp: SparseInterpolant, index, evaluations) -> SparseInterpolant:
    """Extend an interpolant with one admissible multi-index.

    Parameters
    ----------
    itp : SparseInterpolant
        Current interpolant; not modified.
    index : sequence of int
        Level multi-index whose backward neighbors are all present.
    evaluations : mapping or array_like
        Model values at the index's new points, either keyed by the
        reference-coordinate tuple or as an array in the order of
        ``index_new_points(index)``.

    Returns
    -------
    SparseInterpolant
        New interpolant containing the added points, whose surpluses are
        the model values minus the previous interpolant's prediction.
    """
    index = _check_index(itp, index)
    pts = index_new_points(index)
    n_new = pts.shape[0]
    if isinstance(evaluations, dict):
        vals = np.empty(n_new)
        for k, pt in enumerate(pts):
            key = tuple(pt.tolist())
            if key not in evaluations:
                raise IncompleteBatchError(
                    f"missing evaluation at {key} for index {index}"
                )
            vals[k] = float(evaluations[key])
    else:
        vals = np.asarray(evaluations, dtype=float).reshape(-1)
        if vals.size != n_new:
            raise IncompleteBatchError(
                f"index {index} introduces {n_new} points, got {vals.size} values"
            )
    if not np.isfinite(vals).all():
        raise ValueError(f"non-finite model values for index {index}")

    surp = vals - _eval_ref(itp, pts)
    pos = [_new_node_positions(l) for l in index]
    pos_rows = np.array(list(itertools.product(*[p.tolist() for p in pos])), dtype=np.int32)
    lev_rows = np.tile(np.asarray(index, dtype=np.int16), (n_new, 1))
    owner = np.full(n_new, len(itp.index_set), dtype=np.int32)
    return SparseInterpolant(
        dimension=itp.dimension,
        domain=itp.domain,
        index_set=itp.index_set + (index,),
        levels=np.vstack([itp.levels, lev_rows]),
        node_pos=np.vstack([itp.node_pos, pos_rows]),
        ref_points=np.vstack([itp.ref_points, pts]),
        surpluses=np.concatenate([itp.surpluses, surp]),
        point_owner=np.concatenate([itp.point_owner, owner]),
        labels=itp.labels,
    )


def interpolant_eval(itp: SparseInterpolant, x) -> float:
    """Evaluate the interpolant at one physical point.

    Raises
    ------
    OutOfDomainError
        If any coordinate falls outside the domain box.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != itp.dimension:
        raise ValueError(f"point has {x.size} coordinates, expected {itp.dimension}")
    if (x < itp.domain[:, 0]).any() or (x > itp.domain[:, 1]).any():
        raise OutOfDomainError(f"point {x.tolist()} outside domain")
    return float(_eval_ref(itp, itp.to_reference(x)[None, :])[0])


def interpolant_eval_many(itp: SparseInterpolant, xs, chunk: int = 1024) -> np.ndarray:
    """Evaluate the interpolant at many physical points.

    Parameters
    ----------
    xs : array_like, shape (n, dimension)
        Query points.
    chunk : int
        Number of queries processed per block, bounding peak memory at
        roughly ``n_points * chunk`` floats.
    """
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2 or xs.shape[1] != itp.dimension:
        raise ValueError(f"queries must have shape (n, {itp.dimension})")
    if (xs < itp.domain[None, :, 0]).any() or (xs > itp.domain[None, :, 1]).any():
        raise OutOfDomainError("one or more query points outside domain")
    out = np.empty(xs.shape[0])
    for start in range(0, xs.shape[0], chunk):
        block = xs[start:start + chunk]
        out[start:start + chunk] = _eval_ref(itp, itp.to_reference(block))
    return out


def build_from_indices(evaluator, domain, index_list, labels=None) -> SparseInterpolant:
    """Build an interpolant over an explicit downward-closed index list.

    ``evaluator`` maps a physical point (1-d array) to a float and is
    called exactly once per distinct collocation point.
    """
    itp = empty_interpolant(domain, labels=labels)
    ordered = sorted((tuple(i) for i in index_list), key=lambda idx: (sum(idx), idx))
    for index in ordered:
        pts = index_new_points(index)
        vals = [float(evaluator(x)) for x in itp.from_reference(pts)]
        itp = compute_surpluses(itp, index, np.asarray(vals))
    return itp


def build_smolyak(evaluator, domain, level: int, labels=None) -> SparseInterpolant:
    """Build the isotropic sparse interpolant at the given total level."""
    domain = _check_domain(domain)
    idx = smolyak_indices(level, domain.shape[0])
    return build_from_indices(evaluator, domain, idx, labels=labels)


def save_interpolant(itp: SparseInterpolant, path) -> None:
    """Write an interpolant to JSON.

    The layout stores the dimension, the domain box, optional axis
    labels, and one record per collocation point with its level
    multi-index, reference coordinates and surplus.  Floats are written
    with full round-trip precision, so save followed by load reproduces
    the interpolant bit for bit.
    """
    records = []
    for k in range(itp.n_points):
        records.append({
            "index": [int(v) for v in itp.levels[k]],
            "ref": list(itp.ref_points[k]),
            "surplus": float(itp.surpluses[k]),
        })
    doc = {
        "format": "sparse-interpolant",
        "version": 1,
        "dimension": itp.dimension,
        "domain": [list(row) for row in itp.domain],
        "index_set": [list(i) for i in itp.index_set],
        "points": records,
    }
    if itp.labels is not None:
        doc["labels"] = list(itp.labels)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_interpolant(path) -> SparseInterpolant:
    """Read an interpolant written by :func:`save_interpolant`."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "sparse-interpolant":
        raise ValueError(f"{path}: not a sparse-interpolant file")
    if doc.get("version") != 1:
        raise ValueError(f"{path}: unsupported version {doc.get('version')!r}")
    domain = _check_domain(doc["domain"])
    d = domain.shape[0]
    if doc["dimension"] != d:
        raise ValueError(f"{path}: dimension field disagrees with domain size")
    labels = doc.get("labels")
    itp = empty_interpolant(domain, labels=labels)
    index_set = [tuple(int(v) for v in i) for i in doc["index_set"]]
    by_index: dict[tuple[int, ...], dict[tuple[float, ...], float]] = {
        i: {} for i in index_set
    }
    for rec in doc["points"]:
        idx = tuple(int(v) for v in rec["index"])
        if idx not in by_index:
            raise ValueError(f"{path}: point references unknown index {idx}")
        by_index[idx][tuple(float(v) for v in rec["ref"])] = float(rec["surplus"])

    # Rebuild through the same admissibility-checked path used when the
    # interpolant was first constructed.  Surpluses are copied verbatim:
    # feed zeros as values, then overwrite.
    for index in sorted(index_set, key=lambda i: (sum(i), i)):
        pts = index_new_points(index)
        stored = by_index[index]
        if len(stored) != pts.shape[0]:
            raise ValueError(f"{path}: index {list(index)} has wrong point count")
        itp = compute_surpluses(itp, index, np.zeros(pts.shape[0]))
        surp = itp.surpluses.copy()
        for k, pt in enumerate(pts):
            key = tuple(pt.tolist())
            if key not in stored:
                raise ValueError(f"{path}: missing point {key} for index {list(index)}")
            surp[itp.n_points - pts.shape[0] + k] = stored[key]
        itp = SparseInterpolant(
            dimension=itp.dimension, domain=itp.domain, index_set=itp.index_set,
            levels=itp.levels, node_pos=itp.node_pos, ref_points=itp.ref_points,
            surpluses=surp, point_owner=itp.point_owner, labels=itp.labels,
        )
    return itp
