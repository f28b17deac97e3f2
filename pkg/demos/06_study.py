"""A reduced Monte Carlo table: Frank copula, tau = 0.5, two models, R = 40."""
from tscopula.study import report, run_study, table_groups

groups = table_groups("frank", taus=(0.5,), ns=(200, 500), models=("Mod2", "Mod4"))
study = run_study(groups, R=40, seed=2024)
print(report(study, "text"))
