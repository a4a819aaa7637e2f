"""The superexponential counterexample: parameters, certificates, oscillation bounds.

Run with ``python3 demos/counterexample.py``.
"""
from greenwalk.groups import free_group
from greenwalk.measures import srw
from greenwalk.pathological import (assemble, certify_violation, oscillation_report, prop_spec,
                                    solve_parameters, thm_spec)

F2 = free_group(2)
nu = srw(F2)

U = solve_parameters(nu, r_limit=0.05, depth=2, rho_bound=0.8661)
print("r =", U.r, " s =", U.s, " n =", U.n)

spec = prop_spec(nu, U)
mu, mup = assemble(spec)
print(f"mu(Gamma) = {float(mu.total_mass):.17g}")
for i in range(U.depth):
    c = certify_violation(spec, i)
    print(f"level {i}: G'(e,z_i) >= {c.lower:.3e}, G'(e,y_i)G'(y_i,z_i) <= {c.upper:.3e}, "
          f"ratio >= {c.ratio:.4g}")

rep = oscillation_report(thm_spec(nu, U, "b"))
for b in rep.levels:
    print(f"level {b.level} ({b.parity}): G'(e, z y_i)/G'(e, y_i) in [{b.lower:.3g}, {b.upper:.3g}]")
print("verdict:", rep.verdict)
