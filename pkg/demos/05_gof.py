"""Parametric bootstrap goodness of fit for every family on one residual sample."""
from tscopula.copulas import FAMILIES
from tscopula.gof import independence_test, parametric_bootstrap_test
from tscopula.residual_copula import estimate_residuals
from tscopula.study import DgpSpec, generate

gen = generate(DgpSpec("Mod2", "gumbel", 0.5, 500), seed=11)
data = estimate_residuals(gen.sample)
for k, name in enumerate(FAMILIES):
    res = parametric_bootstrap_test(data, name, "IK", B=199, seed=k)
    print(f"{name:<9} S={res.statistic:.5f}  p={res.p_value:.3f}")
ind = independence_test(data, B=199, seed=99)
print(f"independence S={ind.statistic:.5f}  p={ind.p_value:.3f}")
