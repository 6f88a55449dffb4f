"""Defects of two quasi-actions: Z/12 translating itself (exact) and Z pushed
onto {0..n-1} by truncated shifts (defect 2r/n on the ball of radius r)."""

from soficperm.groups import CyclicGroup, Integers
from soficperm.sofic import measure_defect, regular_action, truncated_shift_action

G = CyclicGroup(12)
rep = measure_defect(regular_action(G), G.elements())
print(f"Z/12 regular: multiplicativity {rep.multiplicativity_defect}, freeness {rep.freeness_defect}")

ball = Integers().ball(3)
for n in (8, 64, 512):
    rep = measure_defect(truncated_shift_action(n), ball)
    print(f"Z on {n:>3} points, r=3: multiplicativity {rep.multiplicativity_defect} (2r/n = 6/{n})")
