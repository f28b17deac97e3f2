"""USD/CZK and GBP/CZK daily log returns 2010-2012: residual copula and family selection.

Needs the CNB daily fixing feed (or a populated cache, see TSCOPULA_CACHE).
"""
import sys

from tscopula.copulas import FAMILIES
from tscopula.data import expected_count_report, fx_sample, ingest_cnb
from tscopula.errors import NetworkError
from tscopula.estimation import fit
from tscopula.gof import parametric_bootstrap_test
from tscopula.residual_copula import estimate_residuals

try:
    usd = ingest_cnb("USD", "2010-01-04", "2012-12-31")
    gbp = ingest_cnb("GBP", "2010-01-04", "2012-12-31")
except NetworkError as exc:
    sys.exit(f"CNB feed unavailable: {exc}")

for s in (usd, gbp):
    print(s.currency, s.rates.size, "rates", expected_count_report(s))
data = estimate_residuals(fx_sample(usd, gbp))
print("W =", data.W)
for k, name in enumerate(FAMILIES):
    res = parametric_bootstrap_test(data, name, "IK", B=999, seed=k, nu=4.0)
    print(f"{name:<9} tau={res.estimate.tau:.3f}  p={res.p_value:.3f}")
t = fit(data, "student", "MPL", free_nu=True)
print("student MPL: rho=%.3f nu=%.2f" % t.model.params)
