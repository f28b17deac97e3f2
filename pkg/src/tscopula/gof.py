"""Cramér-von Mises goodness-of-fit tests with a parametric bootstrap."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .copulas import Independence, family_class
from .errors import NonConvergence, OutOfRange
from .estimation import fit_ik, fit_mpl
from .residual_copula import ResidualCopulaData, empirical_copula

log = logging.getLogger(__name__)

__all__ = ["GofResult", "cvm_statistic", "parametric_bootstrap_test", "independence_test",
           "p_value"]


@dataclass(frozen=True, eq=False)
class GofResult:
    statistic: float
    replicates: np.ndarray
    p_value: float
    family: str
    method: str
    W: int
    estimate: object = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def B(self):
        return self.replicates.size


def p_value(statistic, replicates):
    """(1 + #{S* >= S}) / (B + 1)."""
    replicates = np.asarray(replicates, dtype=float)
    return (1.0 + np.count_nonzero(replicates >= statistic)) / (replicates.size + 1.0)


def _as_data(data):
    if isinstance(data, ResidualCopulaData):
        return data
    return ResidualCopulaData.from_pairs(data)


def cvm_statistic(data, model):
    """S = (1/W) sum_i [C_emp(U~_i) - C(U~_i; model)]^2 over the pseudo-observations."""
    data = _as_data(data)
    emp = empirical_copula(data)
    r = data.ranks
    # at U~_i = R_i / (W + 1) the generalized inverse picks rank R_i exactly
    c_emp = emp.counts(r[:, 0], r[:, 1]) / data.W
    u = data.pseudo
    # ``model`` is a parametric copula or any callable C(u1, u2)
    c_mod = model.cdf(u[:, 0], u[:, 1]) if hasattr(model, "cdf") else model(u[:, 0], u[:, 1])
    return float(np.mean((c_emp - c_mod) ** 2))


def _estimator(method, nu):
    m = method.upper()
    if m == "IK":
        return lambda d, fam: fit_ik(d, fam, nu=nu, std_error=False)
    if m in ("MPL", "PML"):
        return lambda d, fam: fit_mpl(d, fam, nu=nu)
    raise ValueError(f"unsupported bootstrap estimator {method!r}")


def _children(seed, B):
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return ss.spawn(B)


def parametric_bootstrap_test(data, family, estimator="IK", B=199, seed=0, nu=None):
    """Parametric bootstrap p-value of the Cramér-von Mises statistic.

    Each replicate draws W points from the fitted model, converts them to
    pseudo-observations, refits with the same estimator and recomputes the
    statistic.  A replicate whose refit is out of range is redrawn once;
    a second failure aborts the test.
    """
    if B < 99:
        raise ValueError("B must be >= 99")
    data = _as_data(data)
    cls = family_class(family)
    est = _estimator(estimator, nu)
    fitted = est(data, cls)
    model = fitted.model
    stat = cvm_statistic(data, model)
    W = data.W
    reps = np.empty(B)
    redraws = 0
    for b, child in enumerate(_children(seed, B)):
        rng = np.random.default_rng(child)
        for attempt in (0, 1):
            sample = ResidualCopulaData.from_pairs(model.sample(W, rng), kind="bootstrap")
            try:
                refit = est(sample, cls)
                break
            except (OutOfRange, NonConvergence) as exc:
                if attempt == 1:
                    raise NonConvergence(
                        f"bootstrap replicate {b} failed twice: {exc}",
                        {"replicate": b, "family": cls.family, "estimator": estimator}) from exc
                redraws += 1
                log.info("bootstrap replicate %d redrawn after %s", b, exc)
        reps[b] = cvm_statistic(sample, refit.model)
    return GofResult(stat, reps, p_value(stat, reps), cls.family, estimator.upper(), W,
                     fitted, {"redraws": redraws})


def independence_test(data, B=199, seed=0):
    """Test H0: C(u1, u2) = u1 u2 (no parameter to re-estimate)."""
    if B < 99:
        raise ValueError("B must be >= 99")
    data = _as_data(data)
    model = Independence()
    stat = cvm_statistic(data, model)
    W = data.W
    reps = np.empty(B)
    for b, child in enumerate(_children(seed, B)):
        rng = np.random.default_rng(child)
        sample = ResidualCopulaData.from_pairs(rng.random((W, 2)), kind="bootstrap")
        reps[b] = cvm_statistic(sample, model)
    return GofResult(stat, reps, p_value(stat, reps), "independence", "none", W, None, {})
