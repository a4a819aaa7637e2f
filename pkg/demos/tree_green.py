"""Green functions of nearest-neighbour walks on F_2 and the cut-vertex identity.

Run with ``python3 demos/tree_green.py``.
"""
from greenwalk.ancona import TripleOnGeodesic, ancona_ratio
from greenwalk.green import GreenConfig, first_visit, green, spectral_radius
from greenwalk.groups import free_group
from greenwalk.measures import TailFamily, nearest_neighbor, realize, srw

F2 = free_group(2)
mu = srw(F2)
cfg = GreenConfig(working_radius=30)

# the radial chain gives G(e, e) = 3/2 and G(e, g) = (3/2) 3^-|g|
for w in ("e", "a", "ab", "abA"):
    gv = green("e", w, mu, cfg)
    print(f"G(e, {w:4s}) = {gv.value:.12f}   tail ~ {gv.tail_estimate:.1e}   {gv.method}")
print(f"F(e, e)    = {first_visit('e', 'e', mu, cfg).value:.12f}")

est = spectral_radius(mu)
print(f"spectral radius: even-return {est.even_return:.6f}, power {est.power:.6f}, "
      f"extrapolated {est.extrapolated:.6f}")

# every path from x to z passes y, so G(x,z) G(e,e) = G(x,y) G(y,z)
nn = nearest_neighbor(F2, {"a": 0.4, "A": 0.4, "b": 0.1, "B": 0.1})
tube = GreenConfig(working_radius=7, center="tube")
t = TripleOnGeodesic.make(F2, "Ab", "b", "bab")
r = ancona_ratio(t, nn, tube)
print(f"nearest-neighbour normalized ratio {r.normalized:.6f} in "
      f"[{r.normalized_lower:.6f}, {r.normalized_upper:.6f}]")

# long jumps break the identity, but the ratio stays >= 1
gauss, receipt = realize(F2, TailFamily.gaussian(0.7), 1e-8)
r = ancona_ratio(TripleOnGeodesic.make(F2, "AA", "e", "aa"), gauss, GreenConfig(working_radius=14, center="tube"))
print(f"gaussian tails (radius {receipt.radius}): normalized ratio {r.normalized:.6f}")
