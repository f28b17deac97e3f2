"""Rank-based estimation of copula parameters.

Three estimators are provided: inversion of Kendall's tau (IK), maximum
pseudo-likelihood (MPL) and minimum distance (MD).  Estimates are reported
both as a fitted model and on the Kendall's tau scale.  Asymptotic standard
errors use Monte Carlo integrals under the fitted model.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .copulas import StudentT, family_class, kendall_tau_inverse
from .errors import NonConvergence, OutOfRange, SingularGamma
from .residual_copula import ResidualCopulaData, empirical_copula

log = logging.getLogger(__name__)

__all__ = [
    "sample_kendall_tau", "kendall_s", "EstimateResult", "fit_ik", "fit_mpl", "fit_md",
    "sandwich_variance", "ik_std_error", "fit",
]

DEFAULT_NU = 4.0
_TAU_MARGIN = 1e-4


# ---------------------------------------------------------------------------
# Kendall's tau


def _kendall_s_pairs(x, y):
    """Concordant minus discordant pairs by direct comparison (O(n^2) memory-chunked)."""
    n = x.size
    s = 0
    step = max(1, 2_000_000 // max(n, 1))
    for a in range(0, n, step):
        sx = np.sign(x[a:a + step, None] - x[None, :])
        sy = np.sign(y[a:a + step, None] - y[None, :])
        s += int(np.sum(sx * sy, dtype=np.int64))
    return s // 2


def _tie_pairs(*cols):
    """Number of pairs tied in every one of ``cols``."""
    order = np.lexsort(cols[::-1])
    keys = np.column_stack([c[order] for c in cols])
    change = np.any(keys[1:] != keys[:-1], axis=1)
    bounds = np.flatnonzero(np.concatenate([[True], change, [True]]))
    t = np.diff(bounds).astype(np.int64)
    return int(np.sum(t * (t - 1) // 2))


def _count_inversions(a):
    """Pairs i < j with a[i] > a[j], by a vectorized bottom-up merge."""
    a = np.asarray(a, dtype=float).copy()
    n = a.size
    pos = np.arange(n)
    total = 0
    width = 1
    while width < n:
        group = pos // (2 * width)
        side = (pos // width) % 2  # 0 = left run, 1 = right run
        # ties: left before right, so equal values never count as inversions
        order = np.lexsort((side, a, group))
        s = side[order]
        g = group[order]
        is_left = (s == 0).astype(np.int64)
        cum_left = np.cumsum(is_left)
        start = np.searchsorted(g, g, side="left")
        left_before = cum_left - is_left - np.where(start > 0, cum_left[start - 1], 0)
        left_total = np.bincount(group, weights=1 - side, minlength=group.max() + 1)
        right = s == 1
        total += int(np.sum(left_total[g[right]] - left_before[right]))
        a = a[order]
        width *= 2
    return total


def kendall_s(x, y, method="auto"):
    """Kendall's S = #concordant - #discordant (ties count as neither)."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError("x and y differ in length")
    n = x.size
    if method == "auto":
        method = "pairs" if n <= 64 else "merge"
    if method == "pairs":
        return _kendall_s_pairs(x, y)
    if method != "merge":
        raise ValueError(f"unknown method {method!r}")
    n0 = n * (n - 1) // 2
    n1 = _tie_pairs(x)
    n2 = _tie_pairs(y)
    n3 = _tie_pairs(x, y)
    order = np.lexsort((y, x))
    swaps = _count_inversions(y[order])
    return n0 - n1 - n2 + n3 - 2 * swaps


def sample_kendall_tau(pairs, method="auto"):
    """Tau-a of an (n, 2) array: S / C(n, 2)."""
    pairs = np.asarray(pairs, dtype=float).reshape(-1, 2)
    n = pairs.shape[0]
    if n < 2:
        raise ValueError("Kendall's tau needs at least two pairs")
    return kendall_s(pairs[:, 0], pairs[:, 1], method) / (n * (n - 1) / 2.0)


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True, eq=False)
class EstimateResult:
    """Fitted model, its Kendall's tau and optimizer diagnostics.

    ``std_error`` is on the tau scale; ``diagnostics`` may also carry
    ``std_error_params`` on the natural parameter scale.
    """

    model: object
    tau: float
    method: str
    std_error: float = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def family(self):
        return self.model.family

    @property
    def params(self):
        return self.model.params


def _as_data(data):
    if isinstance(data, ResidualCopulaData):
        return data
    return ResidualCopulaData.from_pairs(data)


def _fixed_kwargs(cls, nu):
    return {"nu": DEFAULT_NU if nu is None else float(nu)} if cls is StudentT else {}


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def tau_derivative(model, rel_step=1e-5):
    """d tau / d theta of a one-parameter model by central difference."""
    (theta,) = model.params[:1]
    h = rel_step * max(1.0, abs(theta))
    up = model.with_params(theta + h, *model.params[1:])
    dn = model.with_params(theta - h, *model.params[1:])
    return (up.kendall_tau() - dn.kendall_tau()) / (2.0 * h)


def ik_std_error(model, W, draws=100_000, seed=0):
    """Tau-scale and parameter-scale standard errors of the IK estimator.

    sigma_tau^2 = var{8 C(U1, U2) - 4 U1 - 4 U2} under the model; the tau
    estimate has variance sigma_tau^2 / W and the parameter estimate that
    divided by tau'(theta)^2.
    """
    uv = model.sample(draws, _rng(seed))
    u, v = uv[:, 0], uv[:, 1]
    s2 = float(np.var(8.0 * model.cdf(u, v) - 4.0 * u - 4.0 * v, ddof=1))
    se_tau = np.sqrt(s2 / W)
    if not model.params:
        return se_tau, np.nan, s2
    if isinstance(model, StudentT):
        # tau depends on rho only
        d = 2.0 / (np.pi * np.sqrt(1.0 - model.rho ** 2))
    else:
        d = tau_derivative(model)
    se_param = se_tau / abs(d) if d != 0 else np.inf
    return se_tau, se_param, s2


# ---------------------------------------------------------------------------
# IK


def fit_ik(data, family, nu=None, std_error=True, draws=100_000, seed=0):
    """Inversion of the sample Kendall's tau of the weighted residuals."""
    data = _as_data(data)
    cls = family_class(family)
    tau_hat = sample_kendall_tau(data.used)
    model = kendall_tau_inverse(cls, tau_hat, nu=nu)
    diag = {"sample_tau": tau_hat, "W": data.W, "iterations": 0, "converged": True,
            "objective": 0.0}
    se = None
    if std_error:
        se, se_param, s2 = ik_std_error(model, data.W, draws, seed)
        diag.update(std_error_params=se_param, sigma_tau2=s2)
    return EstimateResult(model, float(model.kendall_tau()), "IK", se, diag)


# ---------------------------------------------------------------------------
# one-parameter optimisation on a tau-bracket


def _seed_tau(cls, data, nu):
    """IK seed on the tau scale; falls back to the family midpoint when unattainable."""
    tau_hat = sample_kendall_tau(data.used)
    try:
        kendall_tau_inverse(cls, tau_hat, nu=nu)
        return tau_hat, False
    except OutOfRange:
        lo, hi = cls.tau_range
        return 0.5 * (lo + hi), True


def _theta_at(cls, tau, fixed):
    lo, hi = cls.tau_range
    tau = min(max(tau, lo + _TAU_MARGIN), hi - _TAU_MARGIN)
    if cls.family == "frank" and tau == 0.0:
        return 0.0
    return cls.from_tau(tau, **fixed).params[0]


def _minimize_1d(cls, objective, tau0, fixed, maxiter=500):
    """Bounded Brent over theta with a bracket of tau0 +/- 0.3, widened on edge hits."""
    lo_tau, hi_tau = cls.tau_range
    width = 0.3
    evaluations = 0
    for _ in range(4):
        a = _theta_at(cls, tau0 - width, fixed)
        b = _theta_at(cls, tau0 + width, fixed)
        mid = _theta_at(cls, tau0, fixed)
        if mid != 0.0:
            slope = abs(tau_derivative(cls(mid, **fixed)))
        else:
            slope = 1.0 / 9.0
        xatol = 1e-7 / max(slope, 1e-12)
        res = optimize.minimize_scalar(objective, bounds=(a, b), method="bounded",
                                       options={"xatol": xatol, "maxiter": maxiter})
        evaluations += int(res.nfev)
        if not res.success:
            raise NonConvergence(f"{cls.family}: bounded Brent did not converge",
                                 {"nfev": evaluations, "message": res.message, "x": res.x})
        x = float(res.x)
        span = b - a
        at_lo = x - a < 10 * xatol and tau0 - width > lo_tau + _TAU_MARGIN
        at_hi = b - x < 10 * xatol and tau0 + width < hi_tau - _TAU_MARGIN
        if not (at_lo or at_hi) or span <= 0:
            return x, float(res.fun), evaluations
        width *= 2.0
    return x, float(res.fun), evaluations


# ---------------------------------------------------------------------------
# MPL


def fit_mpl(data, family, nu=None, free_nu=False, std_error=False, draws=100_000, seed=0,
            maxiter=500):
    """Maximum pseudo-likelihood: maximize sum log c(U~_i; theta).

    For the Student family ``nu`` is held fixed (default 4) unless
    ``free_nu`` is set, in which case (rho, nu) are fitted jointly by
    Nelder-Mead over (atanh rho, log(nu - 2)).
    """
    data = _as_data(data)
    cls = family_class(family)
    u, v = data.pseudo[:, 0], data.pseudo[:, 1]
    if cls is StudentT and free_nu:
        return _fit_student_free(data, u, v, std_error, draws, seed, maxiter)
    fixed = _fixed_kwargs(cls, nu)
    f = cls.log_density_fn(u, v, **fixed)

    def objective(theta):
        if cls.family == "frank" and theta == 0.0:
            return 0.0
        val = -float(np.sum(f((theta,))))
        return val if np.isfinite(val) else 1e300

    tau0, fallback = _seed_tau(cls, data, fixed.get("nu"))
    theta, fun, nfev = _minimize_1d(cls, objective, tau0, fixed, maxiter)
    seed_theta = _theta_at(cls, tau0, fixed)
    seed_fun = objective(seed_theta)
    if seed_fun < fun:
        theta, fun = seed_theta, seed_fun
    if cls.family == "frank" and theta == 0.0:
        raise OutOfRange("Frank MPL optimum at theta = 0 (independence)")
    model = cls(theta, **fixed)
    diag = {"iterations": nfev, "converged": True, "objective": fun,
            "loglik": -fun, "seed_tau": tau0, "seed_fallback": fallback,
            "seed_loglik": -seed_fun, "W": data.W}
    se = None
    if std_error:
        cov, se = sandwich_variance(model, data.W, draws=draws, seed=seed)
        diag["std_error_params"] = float(np.sqrt(cov[0, 0]))
    return EstimateResult(model, float(model.kendall_tau()), "MPL", se, diag)


def _fit_student_free(data, u, v, std_error, draws, seed, maxiter):
    g = StudentT.log_density_fn(u, v)
    tau0 = sample_kendall_tau(data.used)
    rho0 = float(np.clip(np.sin(np.pi * tau0 / 2.0), -0.99, 0.99))

    def objective(z):
        rho = np.tanh(z[0])
        nu = 2.0 + np.exp(z[1])
        if not (-1.0 < rho < 1.0) or not np.isfinite(nu):
            return 1e300
        val = -float(np.sum(g((rho, nu))))
        return val if np.isfinite(val) else 1e300

    # coarse start over nu, then simplex
    starts = [np.array([np.arctanh(rho0), np.log(nu - 2.0)]) for nu in (3.0, 4.0, 6.0, 10.0, 30.0)]
    z0 = min(starts, key=objective)
    res = optimize.minimize(objective, z0, method="Nelder-Mead",
                            options={"xatol": 1e-6, "fatol": 1e-10, "maxiter": maxiter,
                                     "maxfev": 4 * maxiter})
    if not res.success:
        raise NonConvergence("Student free-nu Nelder-Mead did not converge",
                             {"nit": int(res.nit), "message": res.message, "x": res.x.tolist()})
    rho, nu = float(np.tanh(res.x[0])), float(2.0 + np.exp(res.x[1]))
    model = StudentT(rho, nu)
    diag = {"iterations": int(res.nit), "converged": True, "objective": float(res.fun),
            "loglik": -float(res.fun), "seed_tau": tau0, "W": data.W}
    se = None
    if std_error:
        cov, se = sandwich_variance(model, data.W, draws=draws, seed=seed, free_nu=True)
        diag["std_error_params"] = np.sqrt(np.diag(cov)).tolist()
    return EstimateResult(model, float(model.kendall_tau()), "MPL", se, diag)


# ---------------------------------------------------------------------------
# MD


def fit_md(data, family, grid=64, nu=None, maxiter=500):
    """Minimum L2 distance between the empirical and model copula (midpoint rule)."""
    if grid < 16:
        raise ValueError("quadrature grid must be >= 16")
    data = _as_data(data)
    cls = family_class(family)
    fixed = _fixed_kwargs(cls, nu)
    g = (np.arange(grid) + 0.5) / grid
    target = empirical_copula(data).lattice(g, g)
    U, V = np.meshgrid(g, g, indexing="ij")
    return _fit_md_target(cls, target, U, V, fixed, data, maxiter)


def _fit_md_target(cls, target, U, V, fixed, data, maxiter, tau_start=None):
    def objective(theta):
        if cls.family == "frank" and theta == 0.0:
            model_cdf = U * V
        else:
            model_cdf = cls(theta, **fixed).cdf(U, V)
        return float(np.mean((target - model_cdf) ** 2))

    if data is not None:
        tau0, fallback = _seed_tau(cls, data, fixed.get("nu"))
    elif tau_start is not None:
        tau0, fallback = float(tau_start), False
    else:
        tau0, fallback = 0.5 * sum(cls.tau_range), True
    theta, fun, nfev = _minimize_1d(cls, objective, tau0, fixed, maxiter)
    seed_theta = _theta_at(cls, tau0, fixed)
    seed_fun = objective(seed_theta)
    if seed_fun < fun:
        theta, fun = seed_theta, seed_fun
    if cls.family == "frank" and theta == 0.0:
        raise OutOfRange("Frank MD optimum at theta = 0 (independence)")
    model = cls(theta, **fixed)
    diag = {"iterations": nfev, "converged": True, "objective": fun, "seed_tau": tau0,
            "seed_fallback": fallback, "seed_objective": seed_fun}
    return EstimateResult(model, float(model.kendall_tau()), "MD", None, diag)


def fit_md_to_values(target, family, grid=64, nu=None, tau_start=None, maxiter=500):
    """MD fit against copula values ``target`` given on the midpoint lattice."""
    cls = family_class(family)
    fixed = _fixed_kwargs(cls, nu)
    g = (np.arange(grid) + 0.5) / grid
    U, V = np.meshgrid(g, g, indexing="ij")
    target = np.asarray(target, dtype=float).reshape(grid, grid)
    return _fit_md_target(cls, target, U, V, fixed, None, maxiter, tau_start)


def fit(data, family, method="IK", **kwargs):
    """Dispatch to :func:`fit_ik`, :func:`fit_mpl` or :func:`fit_md`."""
    m = method.upper()
    if m == "IK":
        return fit_ik(data, family, **kwargs)
    if m in ("MPL", "PML"):
        return fit_mpl(data, family, **kwargs)
    if m == "MD":
        return fit_md(data, family, **kwargs)
    raise ValueError(f"unknown estimator {method!r}")


# ---------------------------------------------------------------------------
# sandwich variance


def _free_params(model, free_nu):
    if isinstance(model, StudentT):
        if free_nu:
            return np.array([model.rho, model.nu]), lambda t: StudentT(t[0], t[1])
        return np.array([model.rho]), lambda t: StudentT(t[0], model.nu)
    return np.array(model.params, dtype=float), lambda t: type(model)(*t)


def _score(build, theta, steps, u, v):
    """phi = d(-log c)/d theta, one column per parameter (central differences)."""
    out = np.empty((u.size, theta.size))
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = steps[k]
        out[:, k] = -(build(theta + e).logpdf(u, v) - build(theta - e).logpdf(u, v)) / (2 * steps[k])
    return out


def sandwich_variance(model, n, draws=100_000, seed=0, free_nu=False):
    """Asymptotic covariance Gamma^-1 Sigma Gamma^-1 / n of the MPL estimator.

    Returns ``(cov, se_tau)``: the parameter covariance matrix for sample
    size ``n`` and the delta-method standard error on the tau scale.
    Sigma includes the rank-correction integrals; all expectations are
    Monte Carlo averages over ``draws`` model draws.
    """
    theta, build = _free_params(model, free_nu)
    steps = 1e-4 * np.maximum(1.0, np.abs(theta))
    if isinstance(model, StudentT):
        steps[0] = 1e-5
    uv = model.sample(draws, _rng(seed))
    u, v = uv[:, 0], uv[:, 1]
    p = theta.size

    phi = _score(build, theta, steps, u, v)
    gamma = np.empty((p, p))
    for k in range(p):
        e = np.zeros_like(theta)
        e[k] = steps[k]
        d = (_score(build, theta + e, steps, u, v) - _score(build, theta - e, steps, u, v)) / (2 * steps[k])
        gamma[:, k] = d.mean(axis=0)
    gamma = 0.5 * (gamma + gamma.T)
    if abs(np.linalg.det(gamma)) < 1e-10:
        raise SingularGamma(f"Gamma is (near) singular: {gamma.tolist()}")

    # d phi / d v_j at the draws, then the rank-correction terms by suffix sums
    total = phi.copy()
    for j, (a, b) in enumerate(((u, v), (v, u))):
        eta = np.minimum(1e-5, 0.5 * np.minimum(a, 1.0 - a))
        if j == 0:
            dphi = (_score(build, theta, steps, a + eta, b) - _score(build, theta, steps, a - eta, b))
        else:
            dphi = (_score(build, theta, steps, b, a + eta) - _score(build, theta, steps, b, a - eta))
        dphi /= (2.0 * eta)[:, None]
        order = np.argsort(a)
        sorted_a = a[order]
        suffix = np.cumsum(dphi[order][::-1], axis=0)[::-1]
        suffix = np.vstack([suffix, np.zeros((1, p))])
        # sum over draws k with a_k >= x of dphi_k, evaluated at x = each draw
        idx = np.searchsorted(sorted_a, a, side="left")
        centre = np.sum(a[:, None] * dphi, axis=0)
        total += (suffix[idx] - centre) / draws
    sigma = np.cov(total, rowvar=False).reshape(p, p)
    ginv = np.linalg.inv(gamma)
    cov = ginv @ sigma @ ginv / n
    if isinstance(model, StudentT):
        grad = np.zeros(p)
        grad[0] = 2.0 / (np.pi * np.sqrt(1.0 - model.rho ** 2))
    else:
        grad = np.array([tau_derivative(model)])
    se_tau = float(np.sqrt(grad @ cov @ grad))
    return cov, se_tau
