"""IK, MPL and MD on residuals of one simulated sample."""
from tscopula.estimation import fit
from tscopula.residual_copula import estimate_residuals
from tscopula.study import DgpSpec, generate

gen = generate(DgpSpec("Mod3", "clayton", 0.5, 500), seed=3)
data = estimate_residuals(gen.sample)
print(f"W = {data.W} of n = {gen.sample.n}")
for method in ("IK", "MPL", "MD"):
    kw = {"std_error": True} if method != "MD" else {}
    res = fit(data, "clayton", method, **kw)
    se = "" if res.std_error is None else f" (se {res.std_error:.4f})"
    print(f"{method:<4} theta={res.model.theta:.4f}  tau={res.tau:.4f}{se}")
