"""Pipeline configuration: INI parsing, validation and the resolved echo.

Example::

    [input]
    source = cnb              ; csv | cnb
    currencies = USD, GBP
    date_from = 2010-01-04
    date_to = 2012-12-31

    [smoothing]
    p = 1
    bandwidth = auto          ; auto | h | h_mean, h_var
    region = auto             ; auto | lower, upper
    variance = residual       ; residual | moment

    [copula]
    families = clayton, frank, gumbel, gaussian, student
    estimator = IK
    nu = 4

    [gof]
    B = 999

    [run]
    seed = 20240101

Missing seeds are drawn from OS entropy and written into the resolved
config, so re-running from the echo reproduces every artifact.
"""

import configparser
import hashlib
import io
from dataclasses import dataclass, field

import numpy as np

from .copulas import family_class
from .errors import ConfigError
from .study import MODELS

__all__ = ["PipelineConfig", "load_config", "parse_config", "DEFAULTS"]

DEFAULTS = {
    "input": {"source": "csv", "path": "", "y1": "y1", "y2": "y2", "x1": "", "x2": "",
              "covariate": "lag", "currencies": "USD, GBP", "date_from": "2010-01-04",
              "date_to": "2012-12-31", "cache_dir": "", "offline": "false"},
    "smoothing": {"p": "1", "bandwidth": "auto", "region": "auto", "variance": "residual"},
    "copula": {"families": "clayton, frank, gumbel, gaussian, student", "estimator": "IK",
               "nu": "4", "free_nu": "true", "se_draws": "100000"},
    "gof": {"B": "999", "estimator": "IK"},
    "study": {"families": "clayton, frank, gumbel, gaussian, student",
              "models": "Mod1, Mod2, Mod3, Mod4", "taus": "0.25, 0.5, 0.75",
              "ns": "200, 500, 1000", "R": "200", "burn_in": "500", "oracle_extra": "200",
              "paths": "oracle, residual"},
    "run": {"seed": "", "jobs": "1"},
    "output": {"dir": "out"},
}

# settings that cannot change any emitted number
_UNHASHED = ("output.dir", "run.jobs")


def _split(text):
    return [t.strip() for t in text.split(",") if t.strip()]


@dataclass(frozen=True)
class PipelineConfig:
    source: str
    path: str
    columns: tuple
    covariate: str
    currencies: tuple
    date_from: str
    date_to: str
    cache_dir: str
    offline: bool
    p: int
    bandwidth: object          # None (auto) or tuple of floats
    region: object             # None (auto) or (lower, upper)
    variance: str              # residual | moment
    families: tuple
    estimator: str
    nu: float
    free_nu: bool
    se_draws: int
    B: int
    gof_estimator: str
    study_families: tuple
    models: tuple
    taus: tuple
    ns: tuple
    R: int
    burn_in: int
    oracle_extra: int
    paths: tuple
    seed: int
    jobs: int
    out_dir: str
    raw: dict = field(default_factory=dict, compare=False)

    def resolved_text(self, _skip=()):
        """Canonical INI text of the fully resolved configuration."""
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for section in sorted(self.raw):
            keys = [k for k in sorted(self.raw[section]) if f"{section}.{k}" not in _skip]
            if keys:
                cp[section] = {k: self.raw[section][k] for k in keys}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @property
    def sha256(self):
        """Hash of the result-determining settings (output dir and job count excluded)."""
        text = self.resolved_text(_UNHASHED)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _merge(user):
    raw = {s: dict(v) for s, v in DEFAULTS.items()}
    unknown = []
    for section, values in user.items():
        if section not in raw:
            unknown.append(f"unknown section [{section}]")
            continue
        for k, v in values.items():
            if k not in raw[section]:
                unknown.append(f"unknown key {section}.{k}")
                continue
            raw[section][k] = v
    return raw, unknown


def parse_config(text="", overrides=None):
    """Parse INI ``text``; ``overrides`` maps "section.key" to values (CLI flags)."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"unreadable config: {exc}"]) from None
    user = {s: dict(cp[s]) for s in cp.sections()}
    raw, problems = _merge(user)
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        section, key = dotted.split(".", 1)
        raw[section][key] = str(value)
    if not raw["run"]["seed"].strip():
        raw["run"]["seed"] = str(int(np.random.SeedSequence().entropy % (2 ** 63)))
    cfg, more = _validate(raw)
    problems += more
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path=None, overrides=None):
    text = ""
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError([f"cannot read config {path}: {exc}"]) from None
    return parse_config(text, overrides)


def _validate(raw):
    problems = []

    def get_int(section, key, lo=None):
        try:
            v = int(raw[section][key])
        except ValueError:
            problems.append(f"{section}.{key} must be an integer, got {raw[section][key]!r}")
            return None
        if lo is not None and v < lo:
            problems.append(f"{section}.{key} must be >= {lo}, got {v}")
        return v

    def get_float_list(section, key):
        try:
            return tuple(float(t) for t in _split(raw[section][key]))
        except ValueError:
            problems.append(f"{section}.{key} must be a list of numbers")
            return ()

    def get_bool(section, key):
        v = raw[section][key].strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        problems.append(f"{section}.{key} must be a boolean, got {v!r}")
        return False

    def families(section):
        out = []
        names = _split(raw[section]["families"])
        for name in names:
            try:
                out.append(family_class(name).family)
            except ValueError:
                problems.append(f"{section}.families: unknown family {name!r}")
        if not names:
            problems.append(f"{section}.families is empty")
        return tuple(out)

    inp = raw["input"]
    source = inp["source"].strip().lower()
    if source not in ("csv", "cnb"):
        problems.append(f"input.source must be csv or cnb, got {source!r}")
    if source == "csv" and not inp["path"].strip():
        problems.append("input.path is required when input.source = csv")
    covariate = inp["covariate"].strip().lower()
    if covariate not in ("lag", "exogenous"):
        problems.append(f"input.covariate must be lag or exogenous, got {covariate!r}")
    if source == "csv" and covariate == "exogenous" and not inp["x1"].strip():
        problems.append("input.x1 is required when input.covariate = exogenous")
    currencies = tuple(c.upper() for c in _split(inp["currencies"]))
    if source == "cnb" and len(currencies) != 2:
        problems.append("input.currencies must name exactly two currencies")
    for key in ("date_from", "date_to"):
        try:
            np.datetime64(inp[key].strip(), "D")
        except ValueError:
            problems.append(f"input.{key} is not an ISO date: {inp[key]!r}")
    offline = get_bool("input", "offline")

    p = get_int("smoothing", "p", 1)
    bw = raw["smoothing"]["bandwidth"].strip().lower()
    bandwidth = None
    if bw != "auto":
        vals = get_float_list("smoothing", "bandwidth")
        if len(vals) not in (1, 2) or any(v <= 0 for v in vals):
            problems.append("smoothing.bandwidth must be auto or one/two positive numbers")
        else:
            bandwidth = vals if len(vals) == 2 else (vals[0], vals[0])
    reg = raw["smoothing"]["region"].strip().lower()
    region = None
    if reg != "auto":
        vals = get_float_list("smoothing", "region")
        if len(vals) != 2 or not vals[0] < vals[1]:
            problems.append("smoothing.region must be auto or 'lower, upper' with lower < upper")
        else:
            region = vals
    variance = raw["smoothing"]["variance"].strip().lower()
    if variance not in ("residual", "moment"):
        problems.append(f"smoothing.variance must be residual or moment, got {variance!r}")

    fams = families("copula")
    estimator = raw["copula"]["estimator"].strip().upper()
    if estimator not in ("IK", "MPL", "MD"):
        problems.append(f"copula.estimator must be IK, MPL or MD, got {estimator!r}")
    try:
        nu = float(raw["copula"]["nu"])
        if not nu > 0:
            problems.append("copula.nu must be positive")
    except ValueError:
        problems.append("copula.nu must be a number")
        nu = 4.0
    free_nu = get_bool("copula", "free_nu")
    se_draws = get_int("copula", "se_draws", 1000)

    B = get_int("gof", "B", 99)
    gof_est = raw["gof"]["estimator"].strip().upper()
    if gof_est not in ("IK", "MPL"):
        problems.append(f"gof.estimator must be IK or MPL, got {gof_est!r}")

    sfams = families("study")
    models = tuple(_split(raw["study"]["models"]))
    for m in models:
        if m not in MODELS:
            problems.append(f"study.models: unknown model {m!r}")
    taus = get_float_list("study", "taus")
    for t in taus:
        if not 0 < t < 1:
            problems.append(f"study.taus: {t} outside (0, 1)")
    try:
        ns = tuple(int(t) for t in _split(raw["study"]["ns"]))
    except ValueError:
        problems.append("study.ns must be integers")
        ns = ()
    for n in ns:
        if n < 20:
            problems.append(f"study.ns: {n} < 20")
    R = get_int("study", "R", 1)
    burn_in = get_int("study", "burn_in", 200)
    extra = get_int("study", "oracle_extra", 0)
    if burn_in is not None and extra is not None and extra > burn_in:
        problems.append("study.oracle_extra must not exceed study.burn_in")
    paths = tuple(t.lower() for t in _split(raw["study"]["paths"]))
    for t in paths:
        if t not in ("oracle", "residual"):
            problems.append(f"study.paths: unknown path {t!r}")

    seed = get_int("run", "seed", 0)
    jobs = get_int("run", "jobs", 1)
    out_dir = raw["output"]["dir"].strip() or "out"

    cfg = None
    if not problems:
        cfg = PipelineConfig(
            source, inp["path"].strip(),
            (inp["y1"].strip(), inp["y2"].strip(), inp["x1"].strip(), inp["x2"].strip()),
            covariate, currencies, inp["date_from"].strip(), inp["date_to"].strip(),
            inp["cache_dir"].strip(), offline, p, bandwidth, region, variance, fams, estimator, nu,
            free_nu, se_draws, B, gof_est, sfams, models, taus, ns, R, burn_in, extra, paths,
            seed, jobs, out_dir, raw)
    return cfg, problems
