"""Tour of the fat-Cantor construction behind the fractal coefficient.

Builds the depth-J interval approximation of a Cantor set with Hausdorff
dimension n - 1 - eps on each axis, verifies its box-counting dimension,
and probes the distance function and neighborhood measure that drive the
coefficient a(x) = dist(x, C)^alpha and the layer integrals.

Run:  python3 demos/cantor_geometry.py
"""

import numpy as np

from dplab.fractal import (
    CantorParams,
    build_cantor,
    true_neighborhood_measure,
)

for eps in (0.15, 0.5):
    p = CantorParams(n=2, eps=eps, depth=10)
    approx, measure = build_cantor(p)
    print(f"eps = {eps}: lambda = {p.lam:.6f}, "
          f"target dimension n-1-eps = {p.dimension:.3f}")
    print(f"  intervals at depth 10: {len(approx.lefts)}, "
          f"each of length {approx.length:.3e}, "
          f"total measure {(len(approx.lefts) * approx.length):.4f}")
    print(f"  exact box-counting slope:  {approx.box_counting_slope():.6f}")
    print(f"  dyadic box-counting slope: {approx.dyadic_box_counting_slope():.4f}")
    print(f"  atoms in the singular measure: {measure.atoms.shape[0]}, "
          f"total mass {measure.total_mass:.6f}")

    # neighborhood measure |{dist <= s}| on one axis: exact self-similar law
    print("  neighborhood measure m(s) at dyadic s:")
    for k in (2, 5, 8):
        s = 2.0 ** (-k)
        print(f"    m(2^-{k}) = {true_neighborhood_measure(p, s):.6e}")

    # distance function sampled on a line through the set
    xs = np.linspace(-0.5, 0.5, 7)
    ds = approx.distance_1d(xs)
    print("  dist( x, C ) on [-1/2, 1/2]: "
          + ", ".join(f"{d:.4f}" for d in ds))
    print()
