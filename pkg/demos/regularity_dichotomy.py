"""Gradient-bound dichotomy across the q = 1 + alpha threshold.

Solves the same kind of problem on three refinement levels and tracks the
interior max |Du|.  With a smooth |x_n|^alpha coefficient and q < 1 + alpha
the gradients stabilize under refinement; with the fractal coefficient and
q > 1 + alpha they keep growing — the discrete echo of the Lavrentiev gap.

Run:  python3 demos/regularity_dichotomy.py        (default counts 33/65/129)
      python3 demos/regularity_dichotomy.py fast   (counts 17/33/65)
"""

import sys

from dplab.experiments import regularity_sweep

counts = (17, 33, 65) if "fast" in sys.argv[1:] else (33, 65, 129)
report = regularity_sweep(counts=counts)

for cell in report.cells:
    print(f"{cell['kind']:>8} cell  q = {cell['q']}, alpha = {cell['alpha']}"
          f"  (q {'<' if cell['kind'] == 'smooth' else '>'} 1 + alpha)")
    for lv, mx, en in zip(cell["levels"], cell["max_grad"], cell["energy"]):
        print(f"    grid {lv:>4}: max|Du| = {mx:12.4f}   energy = {en:.6e}")
    ratios = ", ".join(f"{r:.4f}" for r in cell["ratios"])
    verdict = ("stable (Lipschitz regime)" if cell["kind"] == "smooth"
               else "growing (gap regime)")
    print(f"    refinement ratios: {ratios}  ->  {verdict}")
    print()
