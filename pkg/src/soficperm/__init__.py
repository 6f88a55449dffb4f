"""Random permutation matrices, set-partition bounds and sofic approximations."""

from .perm import Permutation, SubPermMatrix, compose, dist_to_identity, normalized_hamming
from .partitions import Partition, enumerate_partitions, join, meet
from .moments import MomentSpec, brute_force_moment, exact_moment, mc_moment, paper_bound, s_sum
from .sofic import QuasiAction, Tile, measure_defect
from .amalgam import align_to_tile, build_amalgam, certify_vanishing, extract_blocks
from .freeness import FreeWord, MixedMomentSpec, mixed_decay, nica_decay, verify_family

__version__ = "0.1.0"

__all__ = [
    "Permutation", "SubPermMatrix", "compose", "dist_to_identity", "normalized_hamming",
    "Partition", "enumerate_partitions", "join", "meet",
    "MomentSpec", "brute_force_moment", "exact_moment", "mc_moment", "paper_bound", "s_sum",
    "QuasiAction", "Tile", "measure_defect",
    "align_to_tile", "build_amalgam", "certify_vanishing", "extract_blocks",
    "FreeWord", "MixedMomentSpec", "mixed_decay", "nica_decay", "verify_family",
]
