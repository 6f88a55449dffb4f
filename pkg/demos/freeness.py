"""Trace decay of the commutator in independent uniform permutations, and of a
mixed pattern that interleaves deterministic cycle powers with random words."""

from soficperm.freeness import (CyclePowerFamily, MixedMomentSpec, commutator, mixed_decay,
                                nica_decay)

SEED = 7
print("E tr(x1 x2 x1^-1 x2^-1)")
for p in nica_decay(commutator(), [50, 200, 800], samples=2000, seed=SEED, workers=4):
    print(f"  d={p.d:<5} {p.estimate:.5f} +- {p.std_error:.5f}  [{p.seed_label}]")

fam = CyclePowerFamily([1, 2])
spec = MixedMomentSpec(("", "x1 x2 x1^-1 x2^-1", "x1 x2 x1^-1 x2^-1"), (1, 2))
plain = mixed_decay(spec, fam, [64, 256, 1024], 2000, SEED, workers=4)
conj = mixed_decay(spec, fam, [64, 256, 1024], 2000, SEED, workers=4, conjugated=True)
print("E tr(C w C^2 w), w the commutator: direct vs. extra conjugation")
for a, b in zip(plain, conj):
    print(f"  d={a.d:<5} {a.estimate:.5f} +- {a.std_error:.5f}   {b.estimate:.5f} +- {b.std_error:.5f}")
