"""Monte Carlo study of copula estimators on residuals versus true innovations.

Four data-generating processes are available:

    Mod1  Y1 = (0.5 + 0.4 exp(-0.8 X^2)) X + sqrt(1 + 0.2 X^2) e1
          Y2 = 0.5 - 0.5 X + sqrt(1 + 0.4 X^2) e2,   X_i = 0.6 X_{i-1} + xi_i
    Mod2  Y1 = 0.7 Y1_{-1} + e1,                   Y2 = -0.5 Y2_{-1} + e2
    Mod3  Y1 = 0.5 Y1_{-1} / (1 + 0.1 Y1_{-1}^2) + e1,   Y2 = -0.4 Y2_{-1} + e2
    Mod4  Y1 = sqrt(1 + 0.3 Y1_{-1}^2) e1,         Y2 = sqrt(5 + 0.2 Y2_{-1}^2) e2

Innovations (e1, e2) have standard normal margins joined by a copula.
Mod1 uses the exogenous X as covariate of both series; Mod2-4 regress each
series on its own first lag.
"""

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np
from scipy import special

from .copulas import FAMILIES, kendall_tau_inverse
from .data import TimeSeriesSample
from .errors import TSCopulaError
from .estimation import fit_ik, fit_mpl
from .residual_copula import ResidualCopulaData, estimate_residuals

log = logging.getLogger(__name__)

__all__ = [
    "MODELS", "DgpSpec", "Generated", "generate", "CellResult", "StudyReport", "StudyGroup",
    "run_study", "report", "table_groups",
]

MODELS = ("Mod1", "Mod2", "Mod3", "Mod4")
ESTIMATORS = ("IK", "MPL")
PATHS = ("oracle", "residual")
_FAMILY_CODE = {name: k for k, name in enumerate(FAMILIES)}
_MODEL_CODE = {name: k + 1 for k, name in enumerate(MODELS)}
_U_EPS = 1e-15


@dataclass(frozen=True)
class DgpSpec:
    """One data-generating process.

    ``oracle_extra`` innovations drawn just before the observed window are
    added to the oracle sample (the tables' convention; 0 gives the strict
    n-innovation oracle).
    """

    model: str
    family: str
    tau: float
    n: int
    burn_in: int = 500
    oracle_extra: int = 200
    nu: float = 4.0

    def __post_init__(self):
        problems = []
        if self.model not in MODELS:
            problems.append(f"model must be one of {MODELS}, got {self.model!r}")
        if self.family not in FAMILIES:
            problems.append(f"family must be one of {tuple(FAMILIES)}, got {self.family!r}")
        if self.burn_in < 200:
            problems.append("burn_in must be >= 200")
        if not 0 <= self.oracle_extra <= self.burn_in:
            problems.append("oracle_extra must lie in [0, burn_in]")
        if self.n < 20:
            problems.append("n must be >= 20")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def copula(self):
        return kendall_tau_inverse(self.family, self.tau, nu=self.nu)


@dataclass(frozen=True, eq=False)
class Generated:
    sample: TimeSeriesSample
    innovations: np.ndarray          # (n, 2), aligned with the sample
    oracle_innovations: np.ndarray   # (n + oracle_extra, 2)


def _innovation_draws(spec, rng):
    total = spec.burn_in + spec.n + 1
    u = spec.copula.sample(total, rng)
    return special.ndtri(np.clip(u, _U_EPS, 1.0 - _U_EPS))


def generate(spec, seed=None, innovations=None, exogenous_noise=None):
    """Simulate one sample of ``spec``.

    The recursions start from zero and run ``burn_in`` discarded steps.
    ``innovations`` ((burn_in + n + 1, 2)) and ``exogenous_noise``
    ((burn_in + n + 1,), Mod1 only) override the random draws.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    total = spec.burn_in + spec.n + 1
    eps = _innovation_draws(spec, rng) if innovations is None else np.asarray(innovations, float)
    if eps.shape != (total, 2):
        raise ValueError(f"innovations must have shape ({total}, 2)")
    e1, e2 = eps[:, 0], eps[:, 1]
    n = spec.n
    if spec.model == "Mod1":
        xi = rng.standard_normal(total) if exogenous_noise is None else np.asarray(exogenous_noise)
        x = np.empty(total)
        prev = 0.0
        for i in range(total):
            prev = 0.6 * prev + xi[i]
            x[i] = prev
        y1 = (0.5 + 0.4 * np.exp(-0.8 * x * x)) * x + np.sqrt(1.0 + 0.2 * x * x) * e1
        y2 = 0.5 - 0.5 * x + np.sqrt(1.0 + 0.4 * x * x) * e2
        sample = TimeSeriesSample.shared(y1[-n:], y2[-n:], x[-n:])
    else:
        y1 = np.empty(total)
        y2 = np.empty(total)
        a = b = 0.0
        for i in range(total):
            if spec.model == "Mod2":
                a = 0.7 * a + e1[i]
                b = -0.5 * b + e2[i]
            elif spec.model == "Mod3":
                a = 0.5 * a / (1.0 + 0.1 * a * a) + e1[i]
                b = -0.4 * b + e2[i]
            else:
                a = math.sqrt(1.0 + 0.3 * a * a) * e1[i]
                b = math.sqrt(5.0 + 0.2 * b * b) * e2[i]
            y1[i] = a
            y2[i] = b
        sample = TimeSeriesSample.lagged(y1[-(n + 1):], y2[-(n + 1):])
    return Generated(sample, eps[-n:].copy(), eps[-(n + spec.oracle_extra):].copy())


# ---------------------------------------------------------------------------
# replication


@dataclass(frozen=True)
class StudyGroup:
    """Replicates sharing one dataset per replicate: (model, family, tau, n)."""

    spec: DgpSpec
    estimators: tuple = ESTIMATORS
    paths: tuple = PATHS
    p: int = 1
    variance: str = "residual"


def _seeds_for(master, spec, r):
    """Innovation and exogenous-noise seeds of replicate ``r``.

    Counter-based: innovations depend only on (family, tau, n, r), so oracle
    numbers are shared by every model and never depend on which other cells
    run; the Mod1 covariate noise additionally keys on the model.
    """
    key = (_FAMILY_CODE[spec.family], int(round(spec.tau * 10_000)), spec.n, r)
    return (np.random.SeedSequence(master, spawn_key=key),
            np.random.SeedSequence(master, spawn_key=key + (100 + _MODEL_CODE[spec.model],)))


def _replicate(group, master, r):
    spec = group.spec
    innov_seed, exo_seed = _seeds_for(master, spec, r)
    rng = np.random.default_rng(innov_seed)
    eps = _innovation_draws(spec, rng)
    out = {}
    nu = spec.nu if spec.family == "student" else None
    fitters = {"IK": lambda d: fit_ik(d, spec.family, nu=nu, std_error=False),
               "MPL": lambda d: fit_mpl(d, spec.family, nu=nu)}
    if "oracle" in group.paths:
        oracle = ResidualCopulaData.from_pairs(eps[-(spec.n + spec.oracle_extra):])
        for est in group.estimators:
            out[(est, "oracle")] = _attempt(fitters[est], oracle)
    if "residual" in group.paths:
        noise = None
        if spec.model == "Mod1":
            noise = np.random.default_rng(exo_seed).standard_normal(eps.shape[0])
        gen = generate(spec, innovations=eps, exogenous_noise=noise)
        try:
            data = estimate_residuals(gen.sample, p=group.p, variance=group.variance)
        except TSCopulaError as exc:
            for est in group.estimators:
                out[(est, "residual")] = (None, type(exc).__name__, None)
        else:
            for est in group.estimators:
                val = _attempt(fitters[est], data)
                out[(est, "residual")] = val[:2] + (data.W,)
    return r, out


def _attempt(fitter, data):
    try:
        return (fitter(data).tau, None, data.W)
    except TSCopulaError as exc:
        return (None, type(exc).__name__, data.W)


def _run_chunk(args):
    group, master, rs = args
    return [_replicate(group, master, r) for r in rs]


@dataclass(frozen=True)
class CellResult:
    """Bias, SD and RMSE (x100, tau scale) of one estimator on one path."""

    model: str
    family: str
    tau: float
    n: int
    estimator: str
    path: str
    R: int
    ok: int
    failures: int
    bias: float
    sd: float
    rmse: float
    mean_W: float
    status: str = "ok"
    failure_kinds: str = ""

    def check(self, tol=1e-6):
        if self.status != "ok":
            return
        if abs(self.rmse ** 2 - (self.bias ** 2 + self.sd ** 2)) > tol * max(1.0, self.rmse ** 2):
            raise ValueError(f"inconsistent cell {self.key}: rmse^2 != bias^2 + sd^2")

    @property
    def key(self):
        return (self.model, self.family, self.tau, self.n, self.estimator, self.path)

    @property
    def se_bias(self):
        return self.sd / math.sqrt(self.ok) if self.ok else math.nan

    @property
    def se_sd(self):
        return self.sd / math.sqrt(2.0 * self.ok) if self.ok else math.nan


def summarize(values, tau):
    """(bias, sd, rmse) x 100; sd uses ddof = 0 so rmse^2 = bias^2 + sd^2."""
    err = 100.0 * (np.asarray(values, dtype=float) - tau)
    bias = float(np.mean(err))
    sd = float(np.std(err))
    rmse = float(np.sqrt(np.mean(err * err)))
    return bias, sd, rmse


@dataclass(frozen=True, eq=False)
class StudyReport:
    cells: tuple
    R: int
    seed: int
    estimates: dict = field(default_factory=dict)

    def __post_init__(self):
        for c in self.cells:
            c.check()

    def cell(self, model, family, tau, n, estimator, path):
        for c in self.cells:
            if c.key == (model, family, tau, n, estimator, path):
                return c
        raise KeyError((model, family, tau, n, estimator, path))

    def to_csv(self):
        """One row per cell, stable column names, full precision."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["model", "family", "tau", "n", "estimator", "path", "R", "ok", "failures",
                "bias", "sd", "rmse", "mean_W", "status", "failure_kinds"]
        w.writerow(cols)
        for c in self.cells:
            w.writerow([_fmt(getattr(c, k)) for k in cols])
        return buf.getvalue()


def _fmt(x):
    if isinstance(x, float):
        return "%.17g" % x
    return str(x)


def run_study(groups, R=200, seed=0, jobs=1, max_failure_rate=0.05, keep_estimates=False):
    """Run ``R`` replicates of every group and aggregate per (estimator, path).

    Results do not depend on ``jobs``.  A cell with more than
    ``max_failure_rate`` failed replicates is marked ``aborted``.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    cells = []
    estimates = {}
    pool = ProcessPoolExecutor(jobs) if jobs > 1 else None
    try:
        for group in groups:
            if pool is None:
                rows = _run_chunk((group, seed, range(R)))
            else:
                chunks = [(group, seed, range(s, min(R, s + 25))) for s in range(0, R, 25)]
                rows = [row for part in pool.map(_run_chunk, chunks) for row in part]
            rows.sort(key=lambda t: t[0])
            spec = group.spec
            for est, path in product(group.estimators, group.paths):
                vals = [out[(est, path)] for _, out in rows]
                good = [v[0] for v in vals if v[0] is not None]
                kinds = sorted({v[1] for v in vals if v[1] is not None})
                Ws = [v[2] for v in vals if v[2] is not None]
                fails = len(vals) - len(good)
                status = "ok" if fails <= max_failure_rate * R and good else "aborted"
                if status == "ok":
                    bias, sd, rmse = summarize(good, spec.tau)
                else:
                    bias = sd = rmse = math.nan
                    log.warning("cell %s %s %s tau=%s n=%d %s/%s aborted: %d failures",
                                spec.model, spec.family, est, spec.tau, spec.n, est, path, fails)
                model = spec.model if path == "residual" else "oracle"
                cells.append(CellResult(model, spec.family, spec.tau, spec.n, est, path, R,
                                        len(good), fails, bias, sd, rmse,
                                        float(np.mean(Ws)) if Ws else math.nan, status,
                                        ";".join(kinds)))
                if keep_estimates:
                    estimates[cells[-1].key] = np.array(good)
    finally:
        if pool is not None:
            pool.shutdown()
    return StudyReport(tuple(_dedupe(cells)), R, seed, estimates)


def _dedupe(cells):
    # oracle cells of different models share innovations, keep the first
    seen = set()
    for c in cells:
        if c.key in seen:
            continue
        seen.add(c.key)
        yield c


def table_groups(family, taus=(0.25, 0.5, 0.75), ns=(200, 500, 1000), models=MODELS,
                 burn_in=500, oracle_extra=200, paths=PATHS, p=1, variance="residual"):
    """Groups for one family's table: every model x tau x n."""
    groups = []
    for model, tau, n in product(models, taus, ns):
        groups.append(StudyGroup(DgpSpec(model, family, tau, n, burn_in, oracle_extra), ESTIMATORS,
                                 paths, p, variance))
    return groups


# ---------------------------------------------------------------------------
# table layout


def _bold_flags(a, b):
    """Per metric, which of the IK (a) / MPL (b) cells has the larger value."""
    flags = {}
    for metric in ("bias", "sd", "rmse"):
        x = abs(getattr(a, metric))
        y = abs(getattr(b, metric))
        flags[metric] = (x > y, y > x)
    return flags


def report(study, format="csv"):
    """Tables in the familiar layout: rows (model, tau, estimator), columns bias/SD/RMSE per n.

    Oracle rows come first ("oracle" model), then residual rows by model.  In
    the text form the larger of IK/MPL per metric is starred; the CSV form
    carries 0/1 ``*_larger`` columns.
    """
    for c in study.cells:
        c.check()
    ns = sorted({c.n for c in study.cells})
    rows = {}
    for c in study.cells:
        rows.setdefault((c.family, c.model, c.tau, c.estimator), {})[c.n] = c
    order = sorted(rows, key=lambda k: (k[0], 0 if k[1] == "oracle" else 1,
                                        k[1], k[2], ESTIMATORS.index(k[3])
                                        if k[3] in ESTIMATORS else 9))
    flags = {}
    for (fam, model, tau, est), byn in rows.items():
        if est != "IK" or model == "oracle":
            continue
        other = rows.get((fam, model, tau, "MPL"))
        if not other:
            continue
        for n, a in byn.items():
            b = other.get(n)
            if b is None or a.status != "ok" or b.status != "ok":
                continue
            f = _bold_flags(a, b)
            for metric, (fa, fb) in f.items():
                flags[(fam, model, tau, "IK", n, metric)] = fa
                flags[(fam, model, tau, "MPL", n, metric)] = fb
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["family", "model", "tau", "estimator"]
        for n in ns:
            head += [f"bias_{n}", f"sd_{n}", f"rmse_{n}"]
        for n in ns:
            head += [f"bias_{n}_larger", f"sd_{n}_larger", f"rmse_{n}_larger"]
        w.writerow(head)
        for key in order:
            fam, model, tau, est = key
            line = [fam, model, _fmt(float(tau)), est]
            for n in ns:
                c = rows[key].get(n)
                line += [_fmt(getattr(c, m)) if c else "" for m in ("bias", "sd", "rmse")]
            for n in ns:
                line += [int(flags.get((fam, model, tau, est, n, m), False))
                         for m in ("bias", "sd", "rmse")]
            w.writerow(line)
        return buf.getvalue()
    if format != "text":
        raise ValueError("format must be 'csv' or 'text'")
    out = []
    head = f"{'family':<9}{'model':<8}{'tau':>5} {'est':<4}"
    for n in ns:
        head += f" | {'n=' + str(n):^23}"
    out.append(head)
    sub = " " * 27
    for _ in ns:
        sub += f" | {'bias':>7}{'SD':>8}{'RMSE':>8}"
    out.append(sub)
    out.append("-" * len(head))
    for key in order:
        fam, model, tau, est = key
        line = f"{fam:<9}{model:<8}{tau:>5.2f} {est:<4}"
        for n in ns:
            c = rows[key].get(n)
            if c is None:
                line += " | " + " " * 23
                continue
            if c.status != "ok":
                line += f" | {'aborted':>23}"
                continue
            cells = []
            for m in ("bias", "sd", "rmse"):
                star = "*" if flags.get((fam, model, tau, est, n, m), False) else " "
                cells.append(f"{getattr(c, m):>7.2f}{star}")
            line += " | " + "".join(cells)[:-1].rjust(23)
        out.append(line)
    return "\n".join(out) + "\n"


def with_oracle_extra(groups, extra):
    return [replace(g, spec=replace(g.spec, oracle_extra=extra)) for g in groups]
