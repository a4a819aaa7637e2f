"""Return probabilities p^n(e, e) ~ C R^-n n^-3/2 on regular trees.

Run with ``python3 demos/local_limit.py``.
"""
from greenwalk.ancona import local_limit_fit
from greenwalk.groups import free_group, free_product
from greenwalk.measures import lazy, srw

for name, mu in (("F_2", srw(free_group(2))), ("lazy F_2", lazy(srw(free_group(2)))),
                 ("Z/2*Z/2*Z/2", srw(free_product(2, 2, 2)))):
    fit = local_limit_fit(mu, n_max=4000)
    print(f"{name:12s} R = {fit.R_est:.7f} (geometric mean {fit.R_geomean:.7f}), "
          f"exponent = {fit.exponent_est:.4f}, C = {fit.C_est:.4f}, step {fit.step}")
