"""Integrability window of the broken competitor's gradient.

The explicit competitor u_* ramps from -1/2 to +1/2 across a thin slab over
the Cantor set, so |Du_*| ~ 1/dist.  Its gradient lies in L^p exactly for
p < 1 + eps: the per-level partial integrals of |Du_*|^p over dyadic depth
bands stay bounded below the threshold and grow geometrically above it
(factor about 2^{5(p - 1 - eps)} per level of 5 bands).

Run:  python3 demos/blowup_dichotomy.py
"""

from dplab.fractal import CantorParams, CounterexampleConfig
from dplab.experiments import sobolev_blowup_diagnostic

config = CounterexampleConfig(cantor=CantorParams(n=2, eps=0.15, depth=10))
eps = config.cantor.eps
table = sobolev_blowup_diagnostic(config, levels=8)

print(f"eps = {eps}: gradient is L^p integrable iff p < 1 + eps = {1 + eps}")
print(f"({table['levels']} levels after {table['burn_in']} burn-in, "
      f"5 dyadic depth bands per level)")
print()
for p, row in table["probes"].items():
    side = ("below threshold" if p < 1 + eps else "above threshold")
    print(f"p = {p:<6g} ({side})")
    print("  partial integrals: "
          + ", ".join(f"{v:.4e}" for v in row["values"]))
    print("  growth per level:  "
          + ", ".join(f"{g:.4f}" for g in row["growth_per_level"]))
    last = row["growth_per_level"][-1]
    print("  verdict: " + ("converging (summable tail)\n" if last < 1.02
                           else f"diverging geometrically (x{last:.2f}/level)\n"))
