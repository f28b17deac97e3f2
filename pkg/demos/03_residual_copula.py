"""Copula of estimated residuals versus the copula of the true innovations."""
import numpy as np

from tscopula.residual_copula import empirical_copula, estimate_residuals, sup_distance
from tscopula.study import DgpSpec, generate

for n in (200, 500, 1000):
    dist = []
    for r in range(10):
        gen = generate(DgpSpec("Mod2", "gaussian", 0.5, n), seed=r)
        data = estimate_residuals(gen.sample)
        oracle = empirical_copula(gen.innovations)
        dist.append(np.sqrt(n) * sup_distance(empirical_copula(data), oracle))
    print(f"n={n:5d}  median sqrt(n)*sup|C_res - C_oracle| = {np.median(dist):.3f}")
