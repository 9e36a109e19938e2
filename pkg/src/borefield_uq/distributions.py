"""Bounded input distributions and basis-polynomial expectations.

Two families cover the study: uniform on [a, b] and symmetric triangular
on [a, b] (density peaking at the midpoint).  Both are defined through a
(pdf, inverse cdf, smooth-piece boundaries) triple, so further bounded
families can be added by extending ``_FAMILIES`` without touching the
quadrature or sampling code.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import sparse_grid


def _uniform_pdf(u: np.ndarray) -> np.ndarray:
    # density on the reference interval [-1, 1]
    return np.full_like(u, 0.5)


def _uniform_icdf(p: np.ndarray) -> np.ndarray:
    return 2.0 * p - 1.0


def _triangular_pdf(u: np.ndarray) -> np.ndarray:
    return np.clip(1.0 - np.abs(u), 0.0, None)


def _triangular_icdf(p: np.ndarray) -> np.ndarray:
    left = -1.0 + np.sqrt(2.0 * p)
    right = 1.0 - np.sqrt(2.0 * (1.0 - p))
    return np.where(p <= 0.5, left, right)


# reference-space pdf, reference-space inverse cdf, interior breakpoints
_FAMILIES = {
    "uniform": (_uniform_pdf, _uniform_icdf, ()),
    "triangular": (_triangular_pdf, _triangular_icdf, (0.0,)),
}


@dataclass(frozen=True)
class RandomVariable:
    """One bounded scalar random variable.

    Parameters
    ----------
    kind : str
        ``"uniform"`` or ``"triangular"`` (symmetric about the midpoint).
    a, b : float
        Support bounds, ``a < b``.
    """

    kind: str
    a: float
    b: float

    def __post_init__(self):
        if self.kind not in _FAMILIES:
            raise ValueError(
                f"unknown distribution kind {self.kind!r}; "
                f"choose from {sorted(_FAMILIES)}"
            )
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ValueError("support bounds must be finite")
        if not self.a < self.b:
            raise ValueError(f"need a < b, got [{self.a}, {self.b}]")

    def _to_ref(self, x):
        return (2.0 * np.asarray(x, dtype=float) - (self.a + self.b)) / (self.b - self.a)

    def _from_ref(self, u):
        return self.a + (np.asarray(u, dtype=float) + 1.0) * 0.5 * (self.b - self.a)

    def pdf(self, x) -> np.ndarray | float:
        """Density at ``x`` in physical coordinates (zero outside [a, b])."""
        scalar = np.isscalar(x) or np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        u = self._to_ref(x)
        ref_pdf = _FAMILIES[self.kind][0](u)
        out = np.where((u >= -1.0) & (u <= 1.0), ref_pdf * 2.0 / (self.b - self.a), 0.0)
        return float(out[0]) if scalar else out

    def cdf(self, x) -> np.ndarray | float:
        """Cumulative distribution at ``x``."""
        scalar = np.isscalar(x) or np.ndim(x) == 0
        u = np.clip(self._to_ref(np.atleast_1d(np.asarray(x, dtype=float))), -1.0, 1.0)
        if self.kind == "uniform":
            out = (u + 1.0) / 2.0
        else:
            left = (u + 1.0) ** 2 / 2.0
            right = 1.0 - (1.0 - u) ** 2 / 2.0
            out = np.where(u <= 0.0, left, right)
        return float(out[0]) if scalar else out

    def icdf(self, p) -> np.ndarray | float:
        """Inverse cdf; maps [0, 1] onto the support."""
        scalar = np.isscalar(p) or np.ndim(p) == 0
        p = np.atleast_1d(np.asarray(p, dtype=float))
        if (p < 0.0).any() or (p > 1.0).any():
            raise ValueError("probabilities must lie in [0, 1]")
        out = self._from_ref(_FAMILIES[self.kind][1](p))
        return float(out[0]) if scalar else out


@dataclass(frozen=True)
class ProductDistribution:
    """Independent product of :class:`RandomVariable` components."""

    variables: tuple[RandomVariable, ...]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        if not self.variables:
            raise ValueError("need at least one variable")

    @property
    def dimension(self) -> int:
        return len(self.variables)

    @property
    def supports(self) -> np.ndarray:
        """Support box, shape (dimension, 2)."""
        return np.array([[v.a, v.b] for v in self.variables])

    def pdf(self, x) -> float:
        """Joint density at one physical point."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.dimension:
            raise ValueError(f"point has {x.size} coordinates, expected {self.dimension}")
        out = 1.0
        for v, xi in zip(self.variables, x):
            out *= v.pdf(xi)
        return float(out)


def sample(dist: ProductDistribution | RandomVariable, n: int, seed) -> np.ndarray:
    """Draw ``n`` independent samples by inverse-cdf transform.

    Parameters
    ----------
    dist : ProductDistribution or RandomVariable
    n : int
        Number of samples, >= 1.
    seed : int or numpy.random.SeedSequence
        Seed for the generator; equal seeds give equal draws.

    Returns
    -------
    ndarray
        Shape (n, dimension) for a product, (n,) for a scalar variable.
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    rng = np.random.default_rng(seed)
    if isinstance(dist, RandomVariable):
        return dist.icdf(rng.random(n))
    u = rng.random((n, dist.dimension))
    cols = [v.icdf(u[:, d]) for d, v in enumerate(dist.variables)]
    return np.column_stack(cols)


@lru_cache(maxsize=None)
def _gl_rule(npts: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(npts)
    return x, w


def basis_expectation(level: int, node: float, rv: RandomVariable) -> float:
    """Expectation of one hierarchical basis polynomial under ``rv``.

    The basis lives on the reference interval, so only the reference-space
    density matters and the physical bounds of ``rv`` drop out.  The
    integrand is a polynomial of degree ``m - 1`` times the density,
    integrated exactly by Gauss-Legendre on each smooth piece of the
    density with ``ceil(m / 2) + 1`` points.

    Parameters
    ----------
    level : int
        Level at which ``node`` is new.
    node : float
        Anchor node, must belong to ``new_nodes(level)``.
    rv : RandomVariable
        Distribution component for this dimension.

    Returns
    -------
    float
        ``E[L(level, node)]`` with respect to ``rv``.
    """
    return _basis_expectation_cached(level, float(node), rv.kind)


@lru_cache(maxsize=None)
def _basis_expectation_cached(level: int, node: float, kind: str) -> float:
    ref_pdf, _, interior = _FAMILIES[kind]
    m = sparse_grid.num_nodes(level)
    npts = m // 2 + 1 + (m % 2)
    gx, gw = _gl_rule(npts)
    edges = (-1.0, *interior, 1.0)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        pts = mid + half * gx
        vals = sparse_grid.hier_basis_eval(level, node, pts) * ref_pdf(pts)
        total += half * float(np.dot(gw, vals))
    return total
