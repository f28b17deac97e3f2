"""Estimated innovations, pseudo-observations and empirical copulas.

Ranks are ordinal: ties are broken by observation index (stable sort), so
pseudo-observations of every coordinate are exactly {1, ..., W}/(W + 1).
The empirical copula uses the left-continuous generalized inverse
F^-1(u) = inf{y : F(y) >= u} of the weighted marginal ECDFs, i.e.

    C(u1, u2) = #{i : R1_i <= k(u1), R2_i <= k(u2)} / W,
    k(u) = min{k : k / W >= u}.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import EmptyRegion, SingularDesign
from .smoothing import (TRIWEIGHT, WeightRegion, _as_2d, cv_bandwidth, fit_mean_variance,
                        squared_residuals, weight_region)

__all__ = [
    "ResidualCopulaData", "residuals", "ordinal_ranks", "EmpiricalCopula",
    "empirical_copula", "sup_distance", "estimate_residuals", "SeriesFit",
]

_BLOCK_ELEMENTS = 2_000_000


def ordinal_ranks(x):
    """Ranks 1..n with ties broken by position."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="stable")
    r = np.empty(x.size, dtype=np.int64)
    r[order] = np.arange(1, x.size + 1)
    return r


@dataclass(frozen=True, eq=False)
class ResidualCopulaData:
    """Residual pairs with 0/1 weights and the pseudo-observations of weighted points.

    ``kind`` is ``"residual"`` for estimated residuals and ``"oracle"`` for
    true innovations.  ``diagnostics`` carries smoothing details when built by
    :func:`estimate_residuals`.
    """

    pairs: np.ndarray
    weights: np.ndarray
    kind: str = "residual"
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        pairs = np.array(self.pairs, dtype=float).reshape(-1, 2)
        w = np.asarray(self.weights)
        if w.shape != (pairs.shape[0],) or np.any((w != 0) & (w != 1)):
            raise ValueError("weights must be a 0/1 vector matching the pairs")
        w = w.astype(bool)
        if not np.any(w):
            raise EmptyRegion("no observation falls in the weight region")
        if np.any(~np.isfinite(pairs[w])):
            raise ValueError("weighted residuals must be finite")
        pairs.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_pairs(cls, pairs, kind="oracle"):
        pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
        return cls(pairs, np.ones(pairs.shape[0], dtype=bool), kind)

    @property
    def n(self):
        return self.pairs.shape[0]

    @property
    def W(self):
        return int(self.weights.sum())

    @cached_property
    def used(self):
        """Residual pairs of weighted observations, in original order."""
        return self.pairs[self.weights]

    @cached_property
    def ranks(self):
        r = np.column_stack([ordinal_ranks(self.used[:, 0]), ordinal_ranks(self.used[:, 1])])
        r.setflags(write=False)
        return r

    @cached_property
    def pseudo(self):
        """(W, 2) pseudo-observations rank / (W + 1)."""
        u = self.ranks / (self.W + 1.0)
        u.setflags(write=False)
        return u


def _series_values(fit, x, mask):
    """Mean and variance of ``fit`` at all rows of ``x``; NaN where singular off ``mask``."""
    m = np.array(fit.fitted_mean, dtype=float)
    v = np.array(fit.fitted_variance, dtype=float)
    if m.shape != (x.shape[0],):
        raise ValueError("fit and sample disagree on the number of observations")
    todo = np.isnan(m) | np.isnan(v)
    if np.any(todo):
        m[todo] = fit.mean(x[todo], raise_singular=False)
        v[todo] = fit.variance(x[todo], raise_singular=False)
    bad = mask & (np.isnan(m) | np.isnan(v))
    if np.any(bad):
        i = int(np.argmax(bad))
        raise SingularDesign(f"singular local fit at weighted observation {i}", point=x[i])
    return m, v


def residuals(sample, fit1, fit2, region):
    """Standardized residuals of both series plus weights from ``region``.

    ``region`` is one :class:`WeightRegion` applied to both covariates or a
    pair of regions, one per series; the weight is the product of the two
    indicators.  Residuals off the region are computed when the local design
    allows and are NaN otherwise.
    """
    regions = (region, region) if isinstance(region, WeightRegion) else tuple(region)
    x1, y1 = sample.series(1)
    x2, y2 = sample.series(2)
    w = (regions[0].indicator(x1) * regions[1].indicator(x2)).astype(bool)
    if not np.any(w):
        raise EmptyRegion("no observation falls in the weight region")
    m1, v1 = _series_values(fit1, _as_2d(x1), w)
    m2, v2 = _series_values(fit2, _as_2d(x2), w)
    e1 = (y1 - m1) / np.sqrt(v1)
    e2 = (y2 - m2) / np.sqrt(v2)
    return ResidualCopulaData(np.column_stack([e1, e2]), w, "residual")


@dataclass(frozen=True, eq=False)
class SeriesFit:
    fit: object
    region: WeightRegion
    bandwidths: tuple


def estimate_residuals(sample, p=1, kernel=TRIWEIGHT, bandwidth=None, region=None,
                       variance="residual"):
    """Full residual pipeline: CV bandwidths, weight regions, local fits, residuals.

    ``bandwidth`` fixes (h_mean, h_var) for both series (or per series as a
    pair of pairs); ``region`` fixes the weight region(s).  ``variance`` picks
    the conditional variance estimator, see :func:`fit_mean_variance`; with
    ``"residual"`` the variance bandwidth is cross-validated on the squared
    residuals of the fitted mean.  Cross-validation scores only observations
    inside the weight region; every observation still enters the fits.
    Returns the residual data with a ``diagnostics`` dict holding each
    :class:`SeriesFit`.
    """
    regs = []
    for j in (1, 2):
        x = sample.series(j)[0]
        if region is None:
            regs.append(weight_region(x, kernel))
        else:
            regs.append(region if isinstance(region, WeightRegion) else region[j - 1])
    w = (regs[0].indicator(sample.series(1)[0]) * regs[1].indicator(sample.series(2)[0])).astype(bool)
    if not np.any(w):
        raise EmptyRegion("no observation falls in the weight region")
    hs = []
    for j in (1, 2):
        x, y = sample.series(j)
        if bandwidth is None:
            # CV error is scored on the weighted points only
            wt = w.astype(float)
            if variance == "residual":
                h_mean = float(cv_bandwidth(x, y, p, kernel, weights=wt))
                r2 = squared_residuals(x, y, p, h_mean, kernel)
                ok = ~np.isnan(r2)
                hs.append((h_mean, float(cv_bandwidth(x[ok], r2[ok], p, kernel, weights=wt[ok]))))
            else:
                h = cv_bandwidth(x, np.column_stack([y, y * y]), p, kernel, weights=wt)
                hs.append((float(h[0]), float(h[1])))
        else:
            b = np.asarray(bandwidth, dtype=float)
            b = b if b.ndim == 2 else np.broadcast_to(b, (2,) + b.shape)
            hs.append(tuple(np.broadcast_to(b[j - 1], (2,)).tolist()))
    fits = []
    for j in (1, 2):
        x, y = sample.series(j)
        fits.append(fit_mean_variance(x, y, p, hs[j - 1][0], hs[j - 1][1], kernel=kernel,
                                      evaluate=w, method=variance))
    data = residuals(sample, fits[0], fits[1], tuple(regs))
    diag = {"series": tuple(SeriesFit(f, r, h) for f, r, h in zip(fits, regs, hs))}
    return ResidualCopulaData(data.pairs, data.weights, "residual", diag)


def _levels(u, W):
    """k(u) = min{k : k / W >= u} for u in [0, 1]."""
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u > 1) | np.isnan(u)):
        raise ValueError("empirical copula arguments must lie in [0, 1]")
    k = np.ceil(u * W).astype(np.int64)
    k = np.clip(k, 0, W)
    # guard against rounding in u * W
    k = np.where((k > 0) & ((k - 1) / W >= u), k - 1, k)
    k = np.where((k < W) & (k / W < u), k + 1, k)
    return k


@dataclass(frozen=True, eq=False)
class EmpiricalCopula:
    """Empirical copula of the weighted residuals (or of raw innovations)."""

    data: ResidualCopulaData

    @property
    def kind(self):
        return self.data.kind

    @property
    def W(self):
        return self.data.W

    @cached_property
    def _r2_by_r1(self):
        r = self.data.ranks
        out = np.empty(self.W, dtype=np.int64)
        out[r[:, 0] - 1] = r[:, 1]
        return out

    def counts(self, k1, k2):
        """#{i : R1_i <= k1, R2_i <= k2} for integer level arrays."""
        k1, k2 = np.broadcast_arrays(np.asarray(k1, dtype=np.int64), np.asarray(k2, dtype=np.int64))
        shape = k1.shape
        a, b = k1.ravel(), k2.ravel()
        out = np.empty(a.size, dtype=np.int64)
        r2 = self._r2_by_r1
        step = max(1, _BLOCK_ELEMENTS // max(1, self.W))
        pos = np.arange(1, self.W + 1)
        for s in range(0, a.size, step):
            hit = (pos[None, :] <= a[s:s + step, None]) & (r2[None, :] <= b[s:s + step, None])
            out[s:s + step] = hit.sum(axis=1)
        return out.reshape(shape)

    def __call__(self, u1, u2):
        u1, u2 = np.broadcast_arrays(np.asarray(u1, dtype=float), np.asarray(u2, dtype=float))
        W = self.W
        return self.counts(_levels(u1, W), _levels(u2, W)) / W

    def lattice(self, g1, g2):
        """Values on the outer product of coordinate vectors ``g1`` x ``g2``."""
        W = self.W
        k1 = _levels(np.asarray(g1, dtype=float).ravel(), W)
        k2 = _levels(np.asarray(g2, dtype=float).ravel(), W)
        order = np.argsort(k1, kind="stable")
        ks = k1[order]
        r2 = self._r2_by_r1
        out = np.empty((ks.size, k2.size))
        acc = np.zeros(W + 1, dtype=np.int64)  # acc[r] = #points with R1 <= level and R2 == r
        done = 0
        step = max(1, _BLOCK_ELEMENTS // (W + 1))
        for s in range(0, ks.size, step):
            block = ks[s:s + step]
            rows = np.zeros((block.size, W + 1), dtype=np.int64)
            # first block row receives points with R1 in (done, block[0]], etc.
            prev = np.concatenate([[done], block[:-1]])
            for j in range(block.size):
                if block[j] > prev[j]:
                    rows[j, r2[prev[j]:block[j]]] += 1
            rows = np.cumsum(rows, axis=0) + acc
            acc = rows[-1].copy()
            done = int(block[-1])
            out[s:s + block.size] = np.cumsum(rows, axis=1)[:, k2]
        res = np.empty_like(out)
        res[order] = out
        return res / W

    def jump_points(self):
        return np.arange(self.W + 1) / self.W


def empirical_copula(data):
    """Empirical copula of residual data or of an (n, 2) array of innovations."""
    if not isinstance(data, ResidualCopulaData):
        data = ResidualCopulaData.from_pairs(data)
    return EmpiricalCopula(data)


def sup_distance(a, b, grid=101):
    """max |a - b| over a grid x grid lattice augmented with the jump points.

    ``b`` may also be a parametric copula (anything with ``cdf``).
    """
    if grid < 2:
        raise ValueError("grid must be >= 2")
    coords = [np.linspace(0.0, 1.0, grid)]
    for c in (a, b):
        if isinstance(c, EmpiricalCopula):
            coords.append(c.jump_points())
    g = np.unique(np.concatenate(coords))
    va = _lattice_values(a, g)
    vb = _lattice_values(b, g)
    return float(np.max(np.abs(va - vb)))


def _lattice_values(c, g):
    if isinstance(c, EmpiricalCopula):
        return c.lattice(g, g)
    out = np.empty((g.size, g.size))
    step = max(1, _BLOCK_ELEMENTS // g.size)
    for s in range(0, g.size, step):
        out[s:s + step] = c.cdf(g[s:s + step, None], g[None, :])
    return out
