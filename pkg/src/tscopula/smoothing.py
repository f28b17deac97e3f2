"""Local polynomial regression, bandwidth selection and the weight region.

Conditional means and variances are estimated by multivariate local
polynomial regression of order ``p``; ``s(x)`` is the same smoother applied
to squared responses and ``sigma^2 = s - m^2`` (floored).  Observations are
put in a canonical order (by covariate, then response) before any summation
so fitted values do not depend on the input order.
"""

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from .errors import DegenerateSample, EmptyRegion, NoValidBandwidth, SingularDesign

__all__ = [
    "KernelSpec", "TRIWEIGHT", "EPANECHNIKOV", "multi_index_set", "local_poly_fit",
    "local_poly_eval", "SmootherFit", "fit_mean_variance", "squared_residuals", "robust_scale",
    "bandwidth_interval", "cv_scores", "cv_bandwidth", "KernelDensity", "kde",
    "WeightRegion", "weight_region",
]

SINGULAR_RATIO = 1e-10
_CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class KernelSpec:
    """Symmetric kernel supported on [-1, 1].

    ``evaluator`` must itself return 0 outside [-1, 1].
    """

    name: str
    evaluator: object
    support_radius: float = 1.0

    def __call__(self, u):
        return self.evaluator(np.asarray(u, dtype=float))


def _triweight(u):
    t = np.asarray(u * u, dtype=float)
    np.subtract(1.0, t, out=t)
    np.maximum(t, 0.0, out=t)
    out = t * t
    out *= t
    out *= 35.0 / 32.0
    return out


def _epanechnikov(u):
    return 0.75 * np.maximum(1.0 - u * u, 0.0)


TRIWEIGHT = KernelSpec("triweight", _triweight)
EPANECHNIKOV = KernelSpec("epanechnikov", _epanechnikov)


def multi_index_set(d, p):
    """All multi-indices of length ``d`` with total order <= ``p``, graded lex order."""
    if d < 1 or p < 0:
        raise ValueError("need d >= 1 and p >= 0")
    out = []
    for order in range(p + 1):
        level = set()
        for combo in combinations_with_replacement(range(d), order):
            idx = [0] * d
            for k in combo:
                idx[k] += 1
            level.add(tuple(idx))
        out.extend(sorted(level, reverse=True))
    return out


def _as_2d(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return x


def _bandwidth_vector(h, d):
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if h.size == 1 and d > 1:
        h = np.repeat(h, d)
    if h.shape != (d,) or np.any(~(h > 0)):
        raise ValueError(f"bandwidth must be {d} positive reals, got {h}")
    return h


def _canonical_order(X, Y):
    keys = [Y[:, j] for j in range(Y.shape[1] - 1, -1, -1)]
    keys += [X[:, k] for k in range(X.shape[1] - 1, -1, -1)]
    return np.lexsort(keys)


class _LocalProblem:
    """Sorted data plus the basis description shared by every evaluation."""

    def __init__(self, X, Y, p, h, kernel):
        X = _as_2d(X)
        Y = np.asarray(Y, dtype=float)
        Y = Y[:, None] if Y.ndim == 1 else Y
        if X.shape[0] != Y.shape[0]:
            raise ValueError("covariates and responses differ in length")
        order = _canonical_order(X, Y)
        self.X = X[order]
        self.Y = Y[order]
        self.d = X.shape[1]
        self.p = int(p)
        self.h = _bandwidth_vector(h, self.d)
        self.kernel = kernel
        self.indices = np.array(multi_index_set(self.d, self.p), dtype=int)
        self.factorials = np.array([np.prod([math.factorial(i) for i in idx])
                                    for idx in self.indices], dtype=float)
        self.self_weight = float(np.prod(kernel(0.0) / self.h))

    @property
    def q(self):
        return len(self.indices)

    def moments(self, X0, raw_diff=None, cols=None):
        """Gram matrices (m, q, q) and right-hand sides (m, q, r) at rows of X0.

        ``raw_diff`` optionally supplies X - X0 (shape (m, n)) for d = 1; with
        ``cols`` it is banded, entry (i, k) being X[cols[i, k]] - X0[i].
        """
        if self.d == 1:
            return self._moments_1d(X0, raw_diff, cols)
        diff = (self.X[None, :, :] - X0[:, None, :]) / self.h
        w = np.prod(self.kernel(diff) / self.h, axis=2)
        basis = np.ones(diff.shape[:2] + (self.q,))
        for j, idx in enumerate(self.indices):
            for k, power in enumerate(idx):
                if power:
                    basis[:, :, j] *= diff[:, :, k] ** power
        basis /= self.factorials
        wb = basis * w[:, :, None]
        gram = np.einsum("mnq,mnr->mqr", wb, basis)
        rhs = np.einsum("mnq,nr->mqr", wb, self.Y)
        return gram, rhs

    def _moments_1d(self, X0, raw_diff, cols=None):
        h = self.h[0]
        if raw_diff is None:
            raw_diff = self.X[None, :, 0] - X0[:, 0][:, None]
        u = raw_diff / h
        cur = self.kernel(u)
        cur /= h
        if cols is None:
            def wy(c):
                return c @ self.Y
        else:
            Yb = self.Y[cols]

            def wy(c):
                return np.einsum("mk,mkr->mr", c, Yb)
        p = self.p
        power_sums = [cur.sum(axis=1)]
        weighted_y = [wy(cur)]
        for k in range(1, 2 * p + 1):
            cur = cur * u
            power_sums.append(cur.sum(axis=1))
            if k <= p:
                weighted_y.append(wy(cur))
        fact = self.factorials
        m = X0.shape[0]
        gram = np.empty((m, p + 1, p + 1))
        for i in range(p + 1):
            for j in range(p + 1):
                gram[:, i, j] = power_sums[i + j] / (fact[i] * fact[j])
        rhs = np.stack([weighted_y[i] / fact[i] for i in range(p + 1)], axis=1)
        return gram, rhs

    def chunks(self, m):
        size = max(1, _CHUNK_ELEMENTS // max(1, self.X.shape[0] * self.q))
        for start in range(0, m, size):
            yield slice(start, min(m, start + size))


def _solve_intercepts(gram, rhs):
    """Intercept coefficients and a singularity mask for stacked local systems."""
    eig = np.linalg.eigvalsh(gram)
    top = eig[:, -1]
    singular = ~(top > 0) | (eig[:, 0] <= SINGULAR_RATIO * top)
    out = np.full((gram.shape[0], rhs.shape[2]), np.nan)
    ok = ~singular
    if np.any(ok):
        sol = np.linalg.solve(gram[ok], rhs[ok])
        out[ok] = sol[:, 0, :]
    return out, singular


def local_poly_eval(covariates, responses, points, p, h, kernel=TRIWEIGHT, raise_singular=True):
    """Local polynomial fits at each row of ``points``.

    Returns an array of shape (m,) for 1-D ``responses`` or (m, r) for 2-D.
    With ``raise_singular=False`` singular points are returned as NaN.
    """
    prob = _LocalProblem(covariates, responses, p, h, kernel)
    X0 = np.asarray(points, dtype=float)
    X0 = X0.reshape(-1, prob.d) if X0.ndim <= 1 else X0
    out = np.empty((X0.shape[0], prob.Y.shape[1]))
    for sl in prob.chunks(X0.shape[0]):
        gram, rhs = prob.moments(X0[sl])
        vals, singular = _solve_intercepts(gram, rhs)
        if raise_singular and np.any(singular):
            bad = X0[sl][np.argmax(singular)]
            raise SingularDesign(f"singular local design at x0={bad.tolist()} "
                                 f"(bandwidth {prob.h.tolist()} too small?)", point=bad)
        out[sl] = vals
    resp = np.asarray(responses)
    return out[:, 0] if resp.ndim == 1 else out


def local_poly_fit(covariates, responses, x0, p, h, kernel=TRIWEIGHT):
    """Intercept of the local polynomial fit of order ``p`` at the single point ``x0``."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    return float(local_poly_eval(covariates, np.asarray(responses, dtype=float).ravel(),
                                 x0[None, :], p, h, kernel)[0])


# ---------------------------------------------------------------------------
# conditional mean / variance


@dataclass(frozen=True, eq=False)
class SmootherFit:
    """Fitted conditional mean and variance of one series.

    ``fitted_mean`` / ``fitted_variance`` hold values at the sample covariates
    (NaN where not evaluated); ``variance_floor_hits`` counts how many of
    those were clamped to ``floor``.  With ``variance_target`` set, the
    variance is a direct smooth of that array (squared residuals, NaN rows
    ignored) instead of the second moment minus the squared mean.
    """

    covariates: np.ndarray
    responses: np.ndarray
    p: int
    bandwidth_mean: np.ndarray
    bandwidth_variance: np.ndarray
    floor: float
    kernel: KernelSpec
    fitted_mean: np.ndarray
    fitted_variance: np.ndarray
    variance_floor_hits: int
    variance_target: np.ndarray = None

    def mean(self, x, raise_singular=True):
        return local_poly_eval(self.covariates, self.responses, _as_2d(x), self.p,
                               self.bandwidth_mean, self.kernel, raise_singular)

    def variance_raw(self, x, raise_singular=True):
        x = _as_2d(x)
        if self.variance_target is not None:
            ok = ~np.isnan(self.variance_target)
            return local_poly_eval(self.covariates[ok], self.variance_target[ok], x, self.p,
                                   self.bandwidth_variance, self.kernel, raise_singular)
        m = self.mean(x, raise_singular)
        s = local_poly_eval(self.covariates, self.responses ** 2, x, self.p,
                            self.bandwidth_variance, self.kernel, raise_singular)
        return s - m * m

    def variance(self, x, raise_singular=True):
        return np.maximum(self.variance_raw(x, raise_singular), self.floor)

    def sd(self, x):
        return np.sqrt(self.variance(x))


def squared_residuals(covariates, responses, p, h, kernel=TRIWEIGHT):
    """(Y - m_hat(Z))^2 at every sample point; NaN where the local design is singular."""
    X = _as_2d(covariates)
    y = np.asarray(responses, dtype=float).ravel()
    m = local_poly_eval(X, y, X, p, _bandwidth_vector(h, X.shape[1]), kernel,
                        raise_singular=False)
    return (y - m) ** 2


def fit_mean_variance(covariates, responses, p, h, h_var=None, floor=None,
                      kernel=TRIWEIGHT, evaluate=None, method="moment"):
    """Local polynomial estimates of the conditional mean and variance.

    ``method="moment"`` smooths Y and Y^2 and takes s_hat - m_hat^2;
    ``method="residual"`` smooths the squared residuals (Y - m_hat)^2.
    ``evaluate`` is a boolean mask of sample points at which fitted values are
    computed (default all).  ``floor`` defaults to 1e-6 times the sample
    variance of the responses (or 1e-300 for constant responses).
    """
    if method not in ("moment", "residual"):
        raise ValueError(f"unknown variance method {method!r}")
    X = _as_2d(covariates)
    y = np.asarray(responses, dtype=float).ravel()
    n = y.size
    if n <= 2 * len(multi_index_set(X.shape[1], p)):
        raise ValueError("too few observations for the polynomial order")
    if floor is None:
        floor = 1e-6 * float(np.var(y, ddof=1))
        if not floor > 0:
            floor = 1e-300
    h = _bandwidth_vector(h, X.shape[1])
    h_var = h if h_var is None else _bandwidth_vector(h_var, X.shape[1])
    mask = np.ones(n, bool) if evaluate is None else np.asarray(evaluate, bool)
    target = squared_residuals(X, y, p, h, kernel) if method == "residual" else None

    fitted_mean = np.full(n, np.nan)
    fitted_var = np.full(n, np.nan)
    hits = 0
    if np.any(mask):
        pts = X[mask]
        if target is not None:
            m = local_poly_eval(X, y, pts, p, h, kernel)
            ok = ~np.isnan(target)
            raw = local_poly_eval(X[ok], target[ok], pts, p, h_var, kernel)
        else:
            if np.array_equal(h, h_var):
                both = local_poly_eval(X, np.column_stack([y, y * y]), pts, p, h, kernel)
                m, s = both[:, 0], both[:, 1]
            else:
                m = local_poly_eval(X, y, pts, p, h, kernel)
                s = local_poly_eval(X, y * y, pts, p, h_var, kernel)
            raw = s - m * m
        hits = int(np.sum(raw < floor))
        fitted_mean[mask] = m
        fitted_var[mask] = np.maximum(raw, floor)
    return SmootherFit(X, y, int(p), h, h_var, float(floor), kernel,
                       fitted_mean, fitted_var, hits, target)


# ---------------------------------------------------------------------------
# bandwidth selection


def robust_scale(z):
    """min(sample SD, IQR / 1.34); falls back to the SD when the IQR vanishes."""
    z = np.asarray(z, dtype=float).ravel()
    sd = float(np.std(z, ddof=1))
    if not sd > 0:
        raise DegenerateSample("all covariate values are equal")
    q75, q25 = np.percentile(z, [75, 25])
    iqr = (q75 - q25) / 1.34
    return min(sd, iqr) if iqr > 0 else sd


def bandwidth_interval(z, eps=0.1):
    """Search interval (D, H) for cross-validated bandwidths."""
    z = np.asarray(z, dtype=float).ravel()
    n = z.size
    s = robust_scale(z)
    lower = s / n ** (1.0 / (3.0 + eps))
    upper = s * math.log(n) ** 2 / n ** (1.0 / (4.0 - eps))
    return lower, upper


def cv_scores(z, y, grid, p=1, kernel=TRIWEIGHT, weights=None):
    """Leave-one-out squared prediction error for each bandwidth in ``grid``.

    ``y`` may hold several response columns sharing the covariate; returns
    ``(scores, singular_fraction)`` with shapes (len(grid), r) and (len(grid),).
    With ``weights`` the score is the weighted mean error: every point still
    enters the fits, but only points with positive weight are scored.
    """
    Z = _as_2d(z)
    Y = np.asarray(y, dtype=float)
    Y = Y[:, None] if Y.ndim == 1 else Y
    if weights is None:
        wts = np.ones(Y.shape[0])
    else:
        wts = np.asarray(weights, dtype=float).ravel()
        if wts.shape != (Y.shape[0],) or np.any(wts < 0) or not np.any(wts > 0):
            raise ValueError("weights must be nonnegative, one per observation, not all zero")
        wts = wts[_canonical_order(Z, Y)]
    scored = wts > 0
    scores = np.full((len(grid), Y.shape[1]), np.inf)
    frac = np.ones(len(grid))
    base = _LocalProblem(Z, Y, p, grid[0], kernel)
    slices = list(base.chunks(base.X.shape[0]))
    diffs = None
    if base.d == 1 and base.X.shape[0] ** 2 <= _CHUNK_ELEMENTS:
        diffs = [base.X[None, :, 0] - base.X[sl, 0][:, None] for sl in slices]
    n = base.X.shape[0]
    for g, h in enumerate(grid):
        prob = _LocalProblem(Z, Y, p, h, kernel)
        sq = np.zeros(Y.shape[1])
        n_singular = 0
        total = 0.0
        band = _band(prob.X[:, 0], h * kernel.support_radius) if base.d == 1 else None
        for c, sl in enumerate(slices):
            if band is not None:
                cols, rd = band[0][sl], band[1][sl]
                gram, rhs = prob.moments(prob.X[sl], rd, cols)
            else:
                gram, rhs = prob.moments(prob.X[sl], None if diffs is None else diffs[c])
            # drop the evaluation point's own contribution (basis at 0 is e_0)
            gram[:, 0, 0] -= prob.self_weight
            rhs[:, 0, :] -= prob.self_weight * prob.Y[sl]
            pred, singular = _solve_intercepts(gram, rhs)
            use = scored[sl] & ~singular
            n_singular += int(np.sum(scored[sl] & singular))
            resid = prob.Y[sl] - pred
            sq += np.sum(wts[sl][use, None] * resid[use] ** 2, axis=0)
            total += float(np.sum(wts[sl][use]))
        frac[g] = n_singular / np.count_nonzero(scored)
        if total > 0:
            scores[g] = sq / total
    return scores, frac


def _band(x, radius):
    """Banded neighbour layout of sorted ``x`` when windows are narrow, else None.

    Returns (cols, diffs): cols[i] spans the contiguous window of points
    within ``radius`` of x[i]; padding entries get a difference outside the
    kernel support so they contribute exactly zero.
    """
    n = x.size
    lo = np.searchsorted(x, x - radius, side="left")
    hi = np.searchsorted(x, x + radius, side="right")
    width = int(np.max(hi - lo))
    if width > 0.6 * n:
        return None
    k = np.arange(width)
    cols = np.minimum(lo[:, None] + k, n - 1)
    diffs = x[cols] - x[:, None]
    diffs[k[None, :] >= (hi - lo)[:, None]] = 2.0 * radius
    return cols, diffs


def cv_bandwidth(z, y, p=1, kernel=TRIWEIGHT, eps=0.1, n_grid=25, max_singular=0.05,
                 weights=None):
    """Cross-validated bandwidth on a log-spaced grid over (D, H).

    Candidates with more than ``max_singular`` singular leave-one-out fits
    (among scored points) are discarded; ties are resolved toward the larger
    bandwidth.  ``weights`` is passed to :func:`cv_scores`.  For 2-D ``y``
    one bandwidth per column is returned as an array.
    """
    z = np.asarray(z, dtype=float).ravel()
    if z.size < 20:
        raise ValueError("cross-validation needs at least 20 observations")
    lower, upper = bandwidth_interval(z, eps)
    grid = np.geomspace(lower, upper, n_grid)
    scores, frac = cv_scores(z, y, grid, p, kernel, weights)
    Y = np.asarray(y, dtype=float)
    Y = Y[:, None] if Y.ndim == 1 else Y
    valid = frac <= max_singular
    if not np.any(valid):
        raise NoValidBandwidth("every candidate bandwidth gave too many singular fits")
    chosen = np.empty(Y.shape[1])
    for j in range(Y.shape[1]):
        s = np.where(valid, scores[:, j], np.inf)
        best = np.min(s)
        if not np.isfinite(best):
            raise NoValidBandwidth("no finite cross-validation score")
        tol = best * 1e-9 + 1e-13 * float(np.mean(Y[:, j] ** 2))
        chosen[j] = grid[np.flatnonzero(s <= best + tol)[-1]]
    return float(chosen[0]) if np.ndim(y) == 1 else chosen


# ---------------------------------------------------------------------------
# density estimate and weight region


@dataclass(frozen=True, eq=False)
class KernelDensity:
    data: np.ndarray
    bandwidth: float
    kernel: KernelSpec

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        out = np.empty(flat.size)
        step = max(1, _CHUNK_ELEMENTS // self.data.size)
        for s in range(0, flat.size, step):
            u = (flat[s:s + step, None] - self.data[None, :]) / self.bandwidth
            out[s:s + step] = self.kernel(u).sum(axis=1)
        return (out / (self.data.size * self.bandwidth)).reshape(x.shape)


def kde(z, kernel=TRIWEIGHT):
    """Kernel density estimate with the normal reference bandwidth 1.06 s n^(-1/5)."""
    z = np.asarray(z, dtype=float).ravel()
    if z.size < 2:
        raise ValueError("need at least two observations")
    if np.all(z == z[0]):
        raise DegenerateSample("all observations are equal")
    h = 1.06 * robust_scale(z) * z.size ** (-0.2)
    return KernelDensity(np.sort(z), h, kernel)


@dataclass(frozen=True)
class WeightRegion:
    """Box [lower, upper] in covariate space; w(x) = 1 on the closed box."""

    lower: tuple
    upper: tuple
    threshold: float = float("nan")

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or np.any(~(lo < hi)):
            raise ValueError("weight region needs lower < upper in every coordinate")
        object.__setattr__(self, "lower", tuple(lo.tolist()))
        object.__setattr__(self, "upper", tuple(hi.tolist()))

    def indicator(self, x):
        x = _as_2d(x)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return np.all((x >= lo) & (x <= hi), axis=1).astype(float)

    @classmethod
    def everything(cls, x):
        x = _as_2d(x)
        return cls(tuple(x.min(axis=0) - 1.0), tuple(x.max(axis=0) + 1.0))


def weight_region(z, kernel=TRIWEIGHT, threshold=None, grid_size=512):
    """Longest interval where the density estimate stays above ``threshold``.

    The default threshold is 1 / (s log^2 n) with s the robust scale of ``z``.
    """
    z = np.asarray(z, dtype=float).ravel()
    f = kde(z, kernel)
    if threshold is None:
        threshold = 1.0 / (robust_scale(z) * math.log(z.size) ** 2)
    grid = np.linspace(z.min(), z.max(), grid_size)
    ok = f(grid) >= threshold
    if not np.any(ok):
        raise EmptyRegion(f"density estimate never reaches {threshold:.4g}")
    padded = np.concatenate([[0], ok.astype(np.int8), [0]])
    edges = np.diff(padded)
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    best = int(np.argmax(ends - starts))
    lo, hi = grid[starts[best]], grid[ends[best]]
    if not lo < hi:
        hi = lo + (grid[1] - grid[0]) * 1e-9
    return WeightRegion((lo,), (hi,), float(threshold))
