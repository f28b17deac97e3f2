"""Command-line front end.

    tscopula ingest   --config run.ini --out out/
    tscopula fit      --config run.ini
    tscopula gof      --config run.ini --seed 7
    tscopula simulate --config study.ini --jobs 4
    tscopula tables   --config study.ini

Every command writes ``resolved.ini`` (the fully resolved config, seeds
included) into the output directory, and every CSV it emits starts with a
``# config_sha256=<hex>`` line naming that resolved config.  Failures exit
nonzero and print one ``error category=<name> message=<text>`` line on
stderr.

CSV headers:

    sample.csv         y1, y2, x1_0, x2_0           (observations used)
    rates_<CUR>.csv    date, rate                    (CNB input only)
    surface.csv        series, x, mean, sd           (fitted curves on the weight region)
    residuals.csv      index, e1, e2, weight
    pseudo.csv         index, u1, u2                 (weighted observations only)
    estimates.csv      family, method, tau, param1, param2, std_error_tau, W
    gof.csv            family, estimator, statistic, p_value, B, W, tau, param1, param2, selected
    study.csv          long format, one row per study cell
    table_<fam>.csv    wide layout, rows (model, tau, estimator), columns per n
"""

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import study as st
from .config import load_config
from .copulas import FAMILIES
from .data import expected_count_report, fx_sample, ingest_cnb, ingest_csv
from .errors import TSCopulaError
from .estimation import fit
from .gof import parametric_bootstrap_test
from .residual_copula import estimate_residuals
from .smoothing import WeightRegion, local_poly_eval

log = logging.getLogger("tscopula")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_DATA_CATEGORIES = {"parse", "schema", "network", "format"}

SURFACE_POINTS = 101


def _f(x):
    return "%.17g" % x if isinstance(x, (float, np.floating)) else str(x)


class Run:
    """Output directory bound to one resolved config."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.sha = cfg.sha256
        (self.out / "resolved.ini").write_text(
            f"# config_sha256={self.sha}\n" + cfg.resolved_text(), encoding="utf-8")

    def write(self, name, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_f(v) for v in row])
        self.write_text(name, buf.getvalue())

    def write_text(self, name, body):
        path = self.out / name
        path.write_text(f"# config_sha256={self.sha}\n" + body, encoding="utf-8")
        log.info("wrote %s", path)
        return path


# ---------------------------------------------------------------------------
# shared pipeline pieces


def load_sample(run):
    cfg = run.cfg
    if cfg.source == "csv":
        y1, y2, x1, x2 = cfg.columns
        return ingest_csv(cfg.path, y1, y2, x1 or None, x2 or None, lag=cfg.covariate == "lag")
    series = [ingest_cnb(cur, cfg.date_from, cfg.date_to, cfg.cache_dir or None,
                         offline=cfg.offline) for cur in cfg.currencies]
    for s in series:
        expected_count_report(s)
        run.write(f"rates_{s.currency}.csv", ["date", "rate"],
                  zip((str(d) for d in s.dates), s.rates.tolist()))
    return fx_sample(series[0], series[1])


def residual_data(run, sample):
    cfg = run.cfg
    region = None
    if cfg.region is not None:
        region = WeightRegion((cfg.region[0],), (cfg.region[1],))
    return estimate_residuals(sample, cfg.p, bandwidth=cfg.bandwidth, region=region,
                              variance=cfg.variance)


def _params(model):
    p = list(model.params) + [float("nan")] * 2
    return p[:2]


# ---------------------------------------------------------------------------
# commands


def cmd_ingest(cfg):
    run = Run(cfg)
    sample = load_sample(run)
    c1, c2 = sample.covariates
    header = (["y1", "y2"] + [f"x1_{k}" for k in range(c1.shape[1])]
              + [f"x2_{k}" for k in range(c2.shape[1])])
    rows = np.column_stack([sample.y1, sample.y2, c1, c2]).tolist()
    run.write("sample.csv", header, rows)
    print(f"{sample.n} observations -> {run.out / 'sample.csv'}")
    return EXIT_OK


def cmd_fit(cfg):
    run = Run(cfg)
    sample = load_sample(run)
    data = residual_data(run, sample)

    surface = []
    for j, sf in enumerate(data.diagnostics["series"], start=1):
        if sf.fit.covariates.shape[1] != 1:
            continue
        grid = np.linspace(sf.region.lower[0], sf.region.upper[0], SURFACE_POINTS)
        fitted = sf.fit
        m = local_poly_eval(fitted.covariates, fitted.responses, grid, fitted.p,
                            fitted.bandwidth_mean, fitted.kernel, raise_singular=False)
        s2 = local_poly_eval(fitted.covariates, fitted.responses ** 2, grid, fitted.p,
                             fitted.bandwidth_variance, fitted.kernel, raise_singular=False)
        sd = np.sqrt(np.maximum(s2 - m * m, fitted.floor))
        surface += [(j, x, a, b) for x, a, b in zip(grid, m, sd)]
    run.write("surface.csv", ["series", "x", "mean", "sd"], surface)

    e = data.pairs
    run.write("residuals.csv", ["index", "e1", "e2", "weight"],
              zip(range(sample.n), e[:, 0], e[:, 1], data.weights.astype(int).tolist()))
    idx = np.flatnonzero(data.used)
    u = data.pseudo
    run.write("pseudo.csv", ["index", "u1", "u2"], zip(idx.tolist(), u[:, 0], u[:, 1]))

    rows = []
    for fam in cfg.families:
        res = _try(fit, data, fam, cfg.estimator,
                   **({"nu": cfg.nu} if fam == "student" else {}))
        if res is None:
            rows.append((fam, cfg.estimator, float("nan"), float("nan"), float("nan"),
                         float("nan"), data.W))
            continue
        se = res.std_error if res.std_error is not None else float("nan")
        rows.append((fam, cfg.estimator, res.tau, *_params(res.model), se, data.W))
    if "student" in cfg.families and cfg.free_nu:
        res = fit(data, "student", "MPL", free_nu=True)
        rows.append(("student", "MPL_free_nu", res.tau, *_params(res.model), float("nan"),
                     data.W))
        print(f"student free-nu MPL: rho={res.params[0]:.4f} nu={res.params[1]:.3f}")
    run.write("estimates.csv",
              ["family", "method", "tau", "param1", "param2", "std_error_tau", "W"], rows)
    print(f"W={data.W} of n={sample.n}; artifacts in {run.out}")
    return EXIT_OK


def _try(fn, *args, **kwargs):
    # per-family failures are reported in the table rather than aborting the run
    try:
        return fn(*args, **kwargs)
    except TSCopulaError as exc:
        log.warning("%s: %s", exc.category, exc)
        return None


def cmd_gof(cfg):
    run = Run(cfg)
    sample = load_sample(run)
    data = residual_data(run, sample)
    codes = {name: k for k, name in enumerate(FAMILIES)}
    results = []
    for fam in cfg.families:
        seed = np.random.SeedSequence(cfg.seed, spawn_key=(codes[fam],))
        res = parametric_bootstrap_test(data, fam, cfg.gof_estimator, cfg.B, seed,
                                        nu=cfg.nu if fam == "student" else None)
        results.append(res)
    best = max(results, key=lambda r: r.p_value)
    rows = [(r.family, r.method, r.statistic, r.p_value, r.B, r.W, r.estimate.tau,
             *_params(r.estimate.model), int(r is best)) for r in results]
    run.write("gof.csv", ["family", "estimator", "statistic", "p_value", "B", "W", "tau",
                          "param1", "param2", "selected"], rows)
    for r in results:
        print(f"{r.family:<9} S={r.statistic:.5f} p={r.p_value:.3f}")
    print(f"selected: {best.family}")
    return EXIT_OK


def _study(cfg):
    groups = []
    for fam in cfg.study_families:
        groups += st.table_groups(fam, cfg.taus, cfg.ns, cfg.models, cfg.burn_in,
                                  cfg.oracle_extra, cfg.paths, cfg.p, cfg.variance)
    return st.run_study(groups, cfg.R, cfg.seed, cfg.jobs)


def cmd_simulate(cfg):
    run = Run(cfg)
    report = _study(cfg)
    run.write_text("study.csv", report.to_csv())
    aborted = sum(c.status != "ok" for c in report.cells)
    print(f"{len(report.cells)} cells ({aborted} aborted) -> {run.out / 'study.csv'}")
    return EXIT_OK


def cmd_tables(cfg):
    run = Run(cfg)
    report = _study(cfg)
    run.write_text("study.csv", report.to_csv())
    for fam in cfg.study_families:
        sub = st.StudyReport(tuple(c for c in report.cells if c.family == fam), report.R,
                             report.seed)
        run.write_text(f"table_{fam}.csv", st.report(sub, "csv"))
        text = st.report(sub, "text")
        (run.out / f"table_{fam}.txt").write_text(text, encoding="utf-8")
        print(text)
    return EXIT_OK


COMMANDS = {"ingest": cmd_ingest, "fit": cmd_fit, "gof": cmd_gof,
            "simulate": cmd_simulate, "tables": cmd_tables}


def build_parser():
    parser = argparse.ArgumentParser(prog="tscopula", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__name__.replace("cmd_", "") + " workflow")
        p.add_argument("--config", "-c", help="INI config file")
        p.add_argument("--seed", type=int, help="override run.seed")
        p.add_argument("--out", "-o", help="override output.dir")
        p.add_argument("--jobs", "-j", type=int, help="override run.jobs")
    return parser


def _report_error(category, message):
    text = " ".join(str(message).split())
    print(f"error category={category} message={text}", file=sys.stderr)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {"run.seed": args.seed, "output.dir": args.out, "run.jobs": args.jobs}
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except TSCopulaError as exc:
        _report_error(exc.category, exc)
        if exc.category == "config":
            return EXIT_CONFIG
        return EXIT_DATA if exc.category in _DATA_CATEGORIES else EXIT_NUMERIC
    except (OSError, ValueError) as exc:
        _report_error("io" if isinstance(exc, OSError) else "value", exc)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
