"""Parametric bivariate copula families.

Clayton, Frank, Gumbel, Gaussian and Student t copulas plus the independence
copula.  All models are immutable; every method broadcasts over ``u`` and
``v``.  ``pdf``, ``logpdf`` and ``partial`` refuse points on the boundary of
the unit square (pseudo-observations are always interior, so a boundary hit
means a caller bug).
"""

from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from scipy import optimize, special
from scipy.optimize import elementwise

from ._bivariate import bvn_cdf, bvt_cdf
from .errors import DomainError, OutOfRange

__all__ = [
    "Copula", "Clayton", "Frank", "Gumbel", "Gaussian", "StudentT",
    "Independence", "FAMILIES", "family_class", "make_copula",
    "kendall_tau_inverse", "debye1",
]


def _as_pair(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return np.broadcast_arrays(u, v)


def _check_interior(u, v):
    if np.any(~((u > 0) & (u < 1) & (v > 0) & (v < 1))):
        raise DomainError("copula density/partial requested outside the open unit square")


def _check_closed(u, v):
    if np.any(~((u >= 0) & (u <= 1) & (v >= 0) & (v <= 1))):
        raise DomainError("copula evaluated outside [0, 1]^2")


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


class Copula:
    """Common interface; subclasses implement the ``_``-prefixed kernels."""

    family: ClassVar[str] = ""
    tau_range: ClassVar[tuple] = (-1.0, 1.0)

    @property
    def params(self):
        raise NotImplementedError

    def with_params(self, *params):
        return type(self)(*params)

    def cdf(self, u, v):
        u, v = _as_pair(u, v)
        _check_closed(u, v)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            out = np.asarray(self._cdf(u, v), dtype=float)
        # exact boundary values: grounded with uniform margins
        out = np.where((u == 0) | (v == 0), 0.0, out)
        out = np.where(u == 1, v, out)
        out = np.where(v == 1, u, out)
        return np.clip(out, 0.0, 1.0)

    def logpdf(self, u, v):
        u, v = _as_pair(u, v)
        _check_interior(u, v)
        return self._logpdf(u, v)

    def pdf(self, u, v):
        return np.exp(self.logpdf(u, v))

    def partial(self, u, v, coordinate=1):
        """Conditional distribution dC/du_j evaluated at (u, v)."""
        u, v = _as_pair(u, v)
        _check_interior(u, v)
        if coordinate == 1:
            out = self._partial(u, v)
        elif coordinate == 2:
            # every family here is exchangeable
            out = self._partial(v, u)
        else:
            raise ValueError("coordinate must be 1 or 2")
        return np.clip(out, 0.0, 1.0)

    def sample(self, count, seed=None):
        """Draw ``count`` i.i.d. points; returns an array of shape (count, 2)."""
        if count < 1:
            raise ValueError("count must be >= 1")
        return self._sample(int(count), _rng(seed))

    def kendall_tau(self):
        raise NotImplementedError

    @classmethod
    def from_tau(cls, tau, **kwargs):
        raise NotImplementedError

    @classmethod
    def log_density_fn(cls, u, v, **fixed):
        """Return ``f(params) -> logpdf array`` for repeated evaluation on fixed data.

        Elliptical families override this to cache marginal quantiles.
        """
        u, v = _as_pair(u, v)
        _check_interior(u, v)

        def f(params):
            return cls(*params, **fixed)._logpdf(u, v)

        return f

    # conditional inversion: solve partial(u, v) = w for v
    def _sample(self, count, rng):
        uw = rng.random((count, 2))
        u, w = uw[:, 0], uw[:, 1]
        v = self._inverse_partial(u, w)
        return np.column_stack([u, v])

    def _inverse_partial(self, u, w):
        def f(v, u, w):
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                return self._partial_closed(u, v) - w

        res = elementwise.find_root(f, (np.zeros_like(u), np.ones_like(u)), args=(u, w),
                                    tolerances=dict(xatol=1e-15, xrtol=4 * np.finfo(float).eps))
        return np.clip(res.x, 0.0, 1.0)

    def _partial_closed(self, u, v):
        return self._partial(u, v)


# ---------------------------------------------------------------------------
# Archimedean families


@dataclass(frozen=True)
class Clayton(Copula):
    theta: float
    family: ClassVar[str] = "clayton"
    tau_range: ClassVar[tuple] = (0.0, 1.0)

    def __post_init__(self):
        if not self.theta > 0:
            raise OutOfRange(f"Clayton requires theta > 0, got {self.theta}")

    @property
    def params(self):
        return (self.theta,)

    def _log_sum(self, u, v):
        # log(u^-t + v^-t - 1) without overflow
        t = self.theta
        a = -t * np.log(u)
        b = -t * np.log(v)
        m = np.maximum(a, b)
        return m + np.log(np.exp(a - m) + np.exp(b - m) - np.exp(-m))

    def _cdf(self, u, v):
        t = self.theta
        return (u ** -t + v ** -t - 1.0) ** (-1.0 / t)

    def _logpdf(self, u, v):
        t = self.theta
        return (np.log1p(t) - (t + 1.0) * (np.log(u) + np.log(v))
                - (1.0 / t + 2.0) * self._log_sum(u, v))

    def _partial(self, u, v):
        t = self.theta
        return np.exp(-(t + 1.0) * np.log(u) - (1.0 / t + 1.0) * self._log_sum(u, v))

    def _inverse_partial(self, u, w):
        t = self.theta
        return (u ** -t * (w ** (-t / (1.0 + t)) - 1.0) + 1.0) ** (-1.0 / t)

    def kendall_tau(self):
        return self.theta / (self.theta + 2.0)

    @classmethod
    def from_tau(cls, tau, **kwargs):
        if not 0.0 < tau < 1.0:
            raise OutOfRange(f"Clayton cannot attain Kendall's tau {tau}")
        return cls(2.0 * tau / (1.0 - tau))


def debye1(x):
    """First Debye function D1(x) = (1/x) int_0^x t / (e^t - 1) dt."""
    x = float(x)
    if x == 0.0:
        return 1.0
    if x < 0.0:
        return debye1(-x) - x / 2.0
    if x <= 8.0:
        nodes, weights = _DEBYE_GL
        t = x * (nodes + 1.0) / 2.0
        integral = x / 2.0 * np.sum(weights * t / np.expm1(t))
    else:
        k = np.arange(1, 9, dtype=float)
        integral = np.pi ** 2 / 6.0 - np.sum(np.exp(-k * x) * (x / k + 1.0 / k ** 2))
    return integral / x


_DEBYE_GL = np.polynomial.legendre.leggauss(32)


@dataclass(frozen=True)
class Frank(Copula):
    theta: float
    family: ClassVar[str] = "frank"

    def __post_init__(self):
        if self.theta == 0 or not np.isfinite(self.theta):
            raise OutOfRange("Frank requires a finite theta != 0")

    @property
    def params(self):
        return (self.theta,)

    def _log_terms(self, u, v):
        # for theta > 0: e^{-t(u+v)} - e^{-tu} - e^{-tv} + e^{-t} = -(A + B) with
        # A = e^{-tu}(1 - e^{-tv}), B = e^{-tv}(1 - e^{-t(1-v)}), both >= 0, so
        # nothing cancels even for large theta
        t = self.theta
        with np.errstate(divide="ignore"):
            log_a = -t * u + np.log(-np.expm1(-t * v))
            log_b = -t * v + np.log(-np.expm1(-t * (1.0 - v)))
        return log_a, log_b

    def _cdf(self, u, v):
        t = self.theta
        with np.errstate(divide="ignore", invalid="ignore"):
            x = np.expm1(-t * u) * np.expm1(-t * v) / np.expm1(-t)
            direct = -np.log1p(x) / t
            if t < 0:
                return direct
            log_a, log_b = self._log_terms(u, v)
            log1px = np.logaddexp(log_a, log_b) - np.log(-np.expm1(-t))
            # log1p loses accuracy once 1 + x is small
            return np.where(log1px < -0.5, -log1px / t, direct)

    def _den(self, u, v):
        t = self.theta
        return np.expm1(-t) + np.expm1(-t * u) * np.expm1(-t * v)

    def _logpdf(self, u, v):
        t = self.theta
        if t < 0:
            log_den = np.log(np.abs(self._den(u, v)))
        else:
            log_den = np.logaddexp(*self._log_terms(u, v))
        return np.log(-t * np.expm1(-t)) - t * (u + v) - 2.0 * log_den

    def _partial(self, u, v):
        t = self.theta
        if t < 0:
            return np.exp(-t * u) * np.expm1(-t * v) / self._den(u, v)
        log_a, log_b = self._log_terms(u, v)
        return np.exp(log_a - np.logaddexp(log_a, log_b))

    def _inverse_partial(self, u, w):
        t = self.theta
        return -np.log1p(w * np.expm1(-t) / (w + (1.0 - w) * np.exp(-t * u))) / t

    def kendall_tau(self):
        return _frank_tau(self.theta)

    @classmethod
    def from_tau(cls, tau, **kwargs):
        if not -1.0 < tau < 1.0 or tau == 0.0:
            raise OutOfRange(f"Frank cannot attain Kendall's tau {tau}")
        a = abs(tau)
        hi = 10.0
        while _frank_tau(hi) < a:
            hi *= 2.0
        theta = optimize.brentq(lambda t: _frank_tau(t) - a, 1e-12, hi,
                                xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
        return cls(np.copysign(theta, tau))


def _frank_tau(theta):
    if abs(theta) < 1e-2:
        return theta / 9.0 - theta ** 3 / 900.0
    return 1.0 - 4.0 / theta * (1.0 - debye1(theta))


@dataclass(frozen=True)
class Gumbel(Copula):
    theta: float
    family: ClassVar[str] = "gumbel"
    tau_range: ClassVar[tuple] = (0.0, 1.0)

    def __post_init__(self):
        if not self.theta >= 1:
            raise OutOfRange(f"Gumbel requires theta >= 1, got {self.theta}")

    @property
    def params(self):
        return (self.theta,)

    def _cdf(self, u, v):
        t = self.theta
        a = (-np.log(u)) ** t + (-np.log(v)) ** t
        return np.exp(-a ** (1.0 / t))

    def _logpdf(self, u, v):
        t = self.theta
        lx = np.log(-np.log(u))
        ly = np.log(-np.log(v))
        m = np.maximum(lx, ly)
        log_a = t * m + np.log(np.exp(t * (lx - m)) + np.exp(t * (ly - m)))
        a_inv = np.exp(log_a / t)
        return (-a_inv - np.log(u) - np.log(v) + (t - 1.0) * (lx + ly)
                + (2.0 / t - 2.0) * log_a + np.log1p((t - 1.0) / a_inv))

    def _partial(self, u, v):
        t = self.theta
        x = -np.log(u)
        y = -np.log(v)
        a = x ** t + y ** t
        c = np.exp(-a ** (1.0 / t))
        return c * a ** (1.0 / t - 1.0) * x ** (t - 1.0) / u

    def _partial_closed(self, u, v):
        out = self._partial(u, v)
        out = np.where(v <= 0, 0.0, out)
        return np.where(v >= 1, 1.0, out)

    def kendall_tau(self):
        return 1.0 - 1.0 / self.theta

    @classmethod
    def from_tau(cls, tau, **kwargs):
        if not 0.0 <= tau < 1.0:
            raise OutOfRange(f"Gumbel cannot attain Kendall's tau {tau}")
        return cls(1.0 / (1.0 - tau))


# ---------------------------------------------------------------------------
# Elliptical families


def _check_rho(rho):
    if not -1.0 < rho < 1.0:
        raise OutOfRange(f"correlation must lie in (-1, 1), got {rho}")


@dataclass(frozen=True)
class Gaussian(Copula):
    rho: float
    family: ClassVar[str] = "gaussian"

    def __post_init__(self):
        _check_rho(self.rho)

    @property
    def params(self):
        return (self.rho,)

    def _cdf(self, u, v):
        return bvn_cdf(special.ndtri(u), special.ndtri(v), self.rho)

    @staticmethod
    def _logpdf_xy(x, y, rho):
        r2 = 1.0 - rho * rho
        return -0.5 * np.log(r2) - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2)

    def _logpdf(self, u, v):
        return self._logpdf_xy(special.ndtri(u), special.ndtri(v), self.rho)

    def _partial(self, u, v):
        x = special.ndtri(u)
        y = special.ndtri(v)
        return special.ndtr((y - self.rho * x) / np.sqrt(1.0 - self.rho ** 2))

    def _sample(self, count, rng):
        z = rng.standard_normal((count, 2))
        y = self.rho * z[:, 0] + np.sqrt(1.0 - self.rho ** 2) * z[:, 1]
        return np.column_stack([special.ndtr(z[:, 0]), special.ndtr(y)])

    def kendall_tau(self):
        return 2.0 / np.pi * np.arcsin(self.rho)

    @classmethod
    def from_tau(cls, tau, **kwargs):
        if not -1.0 < tau < 1.0:
            raise OutOfRange(f"Gaussian cannot attain Kendall's tau {tau}")
        return cls(np.sin(np.pi * tau / 2.0))

    @classmethod
    def log_density_fn(cls, u, v, **fixed):
        u, v = _as_pair(u, v)
        _check_interior(u, v)
        x = special.ndtri(u)
        y = special.ndtri(v)

        def f(params):
            (rho,) = params
            _check_rho(rho)
            return cls._logpdf_xy(x, y, rho)

        return f


def _t_logpdf(x, nu):
    return (special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2)
            - 0.5 * np.log(nu * np.pi) - (nu + 1) / 2 * np.log1p(x * x / nu))


@dataclass(frozen=True)
class StudentT(Copula):
    rho: float
    nu: float = 4.0
    family: ClassVar[str] = "student"

    def __post_init__(self):
        _check_rho(self.rho)
        if not self.nu > 2:
            raise OutOfRange(f"Student copula requires nu > 2, got {self.nu}")

    @property
    def params(self):
        return (self.rho, self.nu)

    def _cdf(self, u, v):
        return bvt_cdf(special.stdtrit(self.nu, u), special.stdtrit(self.nu, v), self.rho, self.nu)

    @staticmethod
    def _logpdf_xy(x, y, rho, nu):
        r2 = 1.0 - rho * rho
        q = (x * x - 2.0 * rho * x * y + y * y) / (nu * r2)
        log_joint = (special.gammaln((nu + 2) / 2) - special.gammaln(nu / 2)
                     - np.log(nu * np.pi) - 0.5 * np.log(r2) - (nu + 2) / 2 * np.log1p(q))
        return log_joint - _t_logpdf(x, nu) - _t_logpdf(y, nu)

    def _logpdf(self, u, v):
        x = special.stdtrit(self.nu, u)
        y = special.stdtrit(self.nu, v)
        return self._logpdf_xy(x, y, self.rho, self.nu)

    def _partial(self, u, v):
        nu, rho = self.nu, self.rho
        x = special.stdtrit(nu, u)
        y = special.stdtrit(nu, v)
        z = (y - rho * x) / np.sqrt((nu + x * x) * (1.0 - rho * rho) / (nu + 1.0))
        return special.stdtr(nu + 1.0, z)

    def _sample(self, count, rng):
        z = rng.standard_normal((count, 2))
        w = rng.chisquare(self.nu, count)
        y = self.rho * z[:, 0] + np.sqrt(1.0 - self.rho ** 2) * z[:, 1]
        s = np.sqrt(w / self.nu)
        return np.column_stack([special.stdtr(self.nu, z[:, 0] / s),
                                special.stdtr(self.nu, y / s)])

    def kendall_tau(self):
        return 2.0 / np.pi * np.arcsin(self.rho)

    @classmethod
    def from_tau(cls, tau, nu=4.0, **kwargs):
        if not -1.0 < tau < 1.0:
            raise OutOfRange(f"Student cannot attain Kendall's tau {tau}")
        return cls(np.sin(np.pi * tau / 2.0), 4.0 if nu is None else nu)

    @classmethod
    def log_density_fn(cls, u, v, nu=None, **fixed):
        """With ``nu`` given the returned function takes ``(rho,)``, else ``(rho, nu)``."""
        u, v = _as_pair(u, v)
        _check_interior(u, v)
        if nu is not None:
            x = special.stdtrit(nu, u)
            y = special.stdtrit(nu, v)

            def f(params):
                (rho,) = params
                _check_rho(rho)
                return cls._logpdf_xy(x, y, rho, nu)

            return f

        def g(params):
            rho, df = params
            return cls(rho, df)._logpdf(u, v)

        return g


@dataclass(frozen=True)
class Independence(Copula):
    """Product copula C(u, v) = u v, the null model of the independence test."""

    family: ClassVar[str] = "independence"

    @property
    def params(self):
        return ()

    def _cdf(self, u, v):
        return u * v

    def _logpdf(self, u, v):
        return np.zeros(np.shape(u))

    def _partial(self, u, v):
        return v + 0.0 * u

    def _sample(self, count, rng):
        return rng.random((count, 2))

    def kendall_tau(self):
        return 0.0


FAMILIES = {
    "clayton": Clayton,
    "frank": Frank,
    "gumbel": Gumbel,
    "gaussian": Gaussian,
    "student": StudentT,
}

_ALIASES = {"normal": "gaussian", "t": "student", "studentt": "student",
            "student-t": "student", "independence": "independence"}


def family_class(name):
    """Look up a family by (case-insensitive) name or alias."""
    if isinstance(name, type) and issubclass(name, Copula):
        return name
    key = str(name).strip().lower()
    key = _ALIASES.get(key, key)
    if key == "independence":
        return Independence
    try:
        return FAMILIES[key]
    except KeyError:
        raise ValueError(f"unknown copula family {name!r}") from None


def make_copula(family, *params):
    return family_class(family)(*params)


def kendall_tau_inverse(family, tau, nu=None):
    """Model of ``family`` whose theoretical Kendall's tau equals ``tau``."""
    cls = family_class(family)
    if cls is StudentT:
        return StudentT.from_tau(tau, nu=4.0 if nu is None else nu)
    return cls.from_tau(tau)
