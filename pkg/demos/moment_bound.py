"""Exact moments of B1 U B2 U* ... against the partition bound, for trace-zero
cycles as d grows. The exact value and the bound both shrink like 1/d."""

from soficperm.moments import MomentSpec, bound_constant, exact_moment, paper_bound
from soficperm.perm import Permutation

for n in (1, 2):
    print(f"n = {n}, C_n = D_n = {bound_constant(n)}")
    print(f"{'d':>4} {'exact':>12} {'partition bound':>16} {'C_n f + D_n/d':>14}")
    for d in (8, 16, 32):
        spec = MomentSpec(tuple(Permutation.cycle(d, j + 1).to_matrix() for j in range(2 * n)))
        exact = exact_moment(spec)
        rep = paper_bound(spec, exact)
        print(f"{d:>4} {str(exact):>12} {float(rep.paper_bound):>16.5f} {float(rep.cn_dn_bound):>14.2f}")
