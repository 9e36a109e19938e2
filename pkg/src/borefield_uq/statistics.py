"""Output statistics of sparse-grid interpolants.

The mean under a product distribution is analytic: expectations factor
across dimensions, so each collocation point contributes its surplus
times a product of one-dimensional basis expectations.  Higher moments
and densities are estimated by resampling the interpolant, which is
cheap next to the model runs that built it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

from . import distributions as db
from . import sparse_grid as sg
from .exceptions import InsufficientDataError

DEFAULT_N_SAMPLES = 100_000


def _check_compatible(itp: sg.SparseInterpolant, dist: db.ProductDistribution,
                      require_equal: bool = True) -> None:
    if dist.dimension != itp.dimension:
        raise ValueError(
            f"distribution dimension {dist.dimension} != interpolant {itp.dimension}"
        )
    sup = dist.supports
    if require_equal:
        if not np.allclose(sup, itp.domain, rtol=0.0, atol=1e-12):
            raise ValueError("distribution support must match the interpolant domain")
    else:
        below = sup[:, 0] < itp.domain[:, 0] - 1e-12
        above = sup[:, 1] > itp.domain[:, 1] + 1e-12
        if below.any() or above.any():
            raise ValueError("distribution support exceeds the interpolant domain")


def _expectation_factors(itp: sg.SparseInterpolant,
                         dist: db.ProductDistribution,
                         skip_dims=()) -> np.ndarray:
    """Per-point product of basis expectations over all non-skipped dims."""
    out = np.ones(itp.n_points)
    for d in range(itp.dimension):
        if d in skip_dims:
            continue
        col_lev = itp.levels[:, d]
        col_ref = itp.ref_points[:, d]
        rv = dist.variables[d]
        for lev in np.unique(col_lev):
            rows = np.flatnonzero(col_lev == lev)
            for node in np.unique(col_ref[rows]):
                e = db.basis_expectation(int(lev), float(node), rv)
                out[rows[col_ref[rows] == node]] *= e
    return out


def mean(itp: sg.SparseInterpolant, dist: db.ProductDistribution) -> float:
    """Exact mean of the interpolant under a matching product distribution."""
    _check_compatible(itp, dist)
    if itp.n_points == 0:
        raise ValueError("interpolant has no points")
    return float(np.dot(itp.surpluses, _expectation_factors(itp, dist)))


def moment(itp: sg.SparseInterpolant, dist: db.ProductDistribution, order: int,
           n_samples: int = DEFAULT_N_SAMPLES, seed=0) -> float:
    """Raw moment ``E[u^order]`` estimated by resampling the interpolant."""
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    vals = resample(itp, dist, n_samples, seed)
    return float(np.mean(vals ** order))


def std(itp: sg.SparseInterpolant, dist: db.ProductDistribution,
        n_samples: int = DEFAULT_N_SAMPLES, seed=0) -> float:
    """Standard deviation from the analytic mean and sampled deviations.

    Centering on the analytic mean before squaring keeps the relative
    sampling error near sqrt(2/n) however large the mean is; the raw
    second moment would cancel against the squared mean and lose all
    precision whenever the spread is small next to the mean.
    """
    m1 = mean(itp, dist)
    vals = resample(itp, dist, n_samples, seed)
    return math.sqrt(float(np.mean((vals - m1) ** 2)))


def resample(itp: sg.SparseInterpolant, dist: db.ProductDistribution,
             n_samples: int = DEFAULT_N_SAMPLES, seed=0) -> np.ndarray:
    """Draw inputs from ``dist`` and evaluate the interpolant at them.

    The distribution may be narrower than the build domain (an
    alternative scenario on the same interpolant) but must not exceed it.
    """
    _check_compatible(itp, dist, require_equal=False)
    if n_samples < 1:
        raise ValueError(f"need n_samples >= 1, got {n_samples}")
    xs = db.sample(dist, n_samples, seed)
    xs = np.clip(xs, itp.domain[:, 0], itp.domain[:, 1])
    return sg.interpolant_eval_many(itp, xs)


def marginal_surface(itp: sg.SparseInterpolant, dist: db.ProductDistribution,
                     dims: tuple[int, int], grid: int = 41,
                     reference: float | None = None):
    """Mean response over all dimensions except the two in ``dims``.

    Parameters
    ----------
    dims : (int, int)
        The two dimensions kept free, distinct, 0-based.
    grid : int
        Number of samples per axis, >= 2.
    reference : float, optional
        When given, the surface is returned as percent deviation from
        this value.

    Returns
    -------
    (x, y, table)
        Axis vectors in physical coordinates over the kept supports and
        a ``(grid, grid)`` table with ``table[i, j]`` the marginal mean
        at ``(x[i], y[j])``.
    """
    _check_compatible(itp, dist)
    d0, d1 = int(dims[0]), int(dims[1])
    if d0 == d1:
        raise ValueError("the two kept dimensions must differ")
    for d in (d0, d1):
        if not 0 <= d < itp.dimension:
            raise ValueError(f"dimension {d} out of range")
    if grid < 2:
        raise ValueError(f"need grid >= 2, got {grid}")

    weights = itp.surpluses * _expectation_factors(itp, dist, skip_dims=(d0, d1))
    axes = []
    basis_tabs = []
    for d in (d0, d1):
        lo, hi = itp.domain[d]
        ax = np.linspace(lo, hi, grid)
        axes.append(ax)
        t = (2.0 * ax - (lo + hi)) / (hi - lo)
        tab = np.ones((itp.n_points, grid))
        col = itp.levels[:, d]
        for lev in np.unique(col):
            if lev == 1:
                continue
            rows = np.flatnonzero(col == lev)
            bm = sg.basis_matrix(int(lev), t)
            tab[rows] = bm[itp.node_pos[rows, d]]
        basis_tabs.append(tab)

    table = np.einsum("p,pi,pj->ij", weights, basis_tabs[0], basis_tabs[1])
    if reference is not None:
        if reference == 0.0:
            raise ValueError("reference value must be nonzero")
        table = (table - reference) / abs(reference) * 100.0
    return axes[0], axes[1], table


@dataclass(frozen=True)
class KernelDensity:
    """Gaussian kernel density estimate of a scalar sample."""

    samples: np.ndarray
    bandwidth: float

    def pdf(self, x) -> np.ndarray | float:
        scalar = np.isscalar(x) or np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty(x.size)
        h = self.bandwidth
        n = self.samples.size
        block = max(1, 2_000_000 // max(n, 1))
        for s in range(0, x.size, block):
            z = (x[s:s + block, None] - self.samples[None, :]) / h
            out[s:s + block] = np.exp(-0.5 * z * z).sum(axis=1)
        out /= n * h * math.sqrt(2.0 * math.pi)
        return float(out[0]) if scalar else out

    def cdf(self, x) -> np.ndarray | float:
        scalar = np.isscalar(x) or np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty(x.size)
        n = self.samples.size
        block = max(1, 2_000_000 // max(n, 1))
        for s in range(0, x.size, block):
            z = (x[s:s + block, None] - self.samples[None, :]) / (
                self.bandwidth * math.sqrt(2.0))
            out[s:s + block] = 0.5 * (1.0 + special.erf(z)).sum(axis=1)
        out /= n
        return float(out[0]) if scalar else out

    def grid(self, n: int = 512, pad: float = 3.0):
        """Evaluation grid spanning the sample range plus ``pad`` bandwidths."""
        lo = self.samples.min() - pad * self.bandwidth
        hi = self.samples.max() + pad * self.bandwidth
        x = np.linspace(lo, hi, n)
        return x, self.pdf(x)


def kde(samples, bandwidth: float | None = None) -> KernelDensity:
    """Gaussian KDE with the normal-reference bandwidth.

    The default bandwidth is ``1.06 * std * n**(-1/5)``; a degenerate
    sample (zero spread) falls back to a vanishingly small width so the
    density is a sharp peak at the common value.

    Raises
    ------
    InsufficientDataError
        If fewer than 100 samples are supplied.
    """
    samples = np.asarray(samples, dtype=float).reshape(-1)
    if samples.size < 100:
        raise InsufficientDataError(
            f"kernel density needs at least 100 samples, got {samples.size}"
        )
    if not np.isfinite(samples).all():
        raise ValueError("samples must be finite")
    if bandwidth is None:
        s = float(samples.std(ddof=1))
        if s > 0.0:
            bandwidth = 1.06 * s * samples.size ** (-0.2)
        else:
            bandwidth = 1e-9 * max(1.0, abs(float(samples[0])))
    if bandwidth <= 0.0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    return KernelDensity(samples=samples, bandwidth=float(bandwidth))


def quantile_lower_bound(samples, confidence: float = 0.95,
                         density: KernelDensity | None = None) -> float:
    """Value undershot with probability ``1 - confidence``.

    Solves ``cdf(x) = 1 - confidence`` on the smoothed density and
    cross-checks the result against the empirical quantile of the raw
    sample.  Disagreement beyond one percent of the sample spread plus
    three standard errors of the empirical quantile raises, since it
    signals a badly smoothed density rather than a usable bound; the
    noise allowance keeps healthy samples from tripping the check when
    the empirical quantile itself wobbles.
    """
    samples = np.asarray(samples, dtype=float).reshape(-1)
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    est = density if density is not None else kde(samples)
    p = 1.0 - confidence
    lo = float(est.samples.min()) - 6.0 * est.bandwidth
    hi = float(est.samples.max()) + 6.0 * est.bandwidth
    x = float(optimize.brentq(lambda v: est.cdf(v) - p, lo, hi, xtol=1e-12))

    spread = float(samples.std(ddof=1)) if samples.size > 1 else 0.0
    empirical = float(np.quantile(samples, p))
    if spread > 0.0:
        dens = max(float(est.pdf(x)), 1e-3 / spread)
        quantile_se = math.sqrt(p * (1.0 - p) / samples.size) / dens
        if abs(x - empirical) > 0.01 * spread + 3.0 * quantile_se:
            raise RuntimeError(
                f"smoothed quantile {x:.6g} disagrees with empirical "
                f"{empirical:.6g} beyond 1% of the sample spread {spread:.3g}"
            )
    return x


def cop(mean_fluid_temp: float, reference_temp: float) -> float:
    """Carnot-style heating coefficient of performance.

    ``(T_ref + 273.15) / (T_ref - T_fluid)`` with both inputs in degrees
    Celsius; the reference (condenser) temperature must exceed the mean
    fluid temperature.
    """
    if not reference_temp > mean_fluid_temp:
        raise ValueError(
            f"reference temperature {reference_temp} must exceed "
            f"the mean fluid temperature {mean_fluid_temp}"
        )
    return (reference_temp + 273.15) / (reference_temp - mean_fluid_temp)
