"""Low/high frequency split and Besov norms of a random stress field.

The dyadic blocks sum back to the field, and the high part carries the
bulk of any norm with positive regularity index.

    python demos/besov_split.py
"""

import numpy as np

from oldroydb import littlewood_paley as lp
from oldroydb import spectral as sp


def main():
    grid = sp.PeriodicGrid(2, 64)
    ladder = lp.build_ladder(grid, k0=2)
    tau = sp.symmetrize(sp.random_field(grid, sp.TENSOR, 7, kmax=16, decay=1.5))

    blocks = sum(lp.dyadic_block(ladder, k, tau) for k in ladder.k_range)
    mean_free = tau.copy()
    mean_free[..., 0, 0] = 0
    print(f"partition defect {lp.partition_defect(ladder):.1e}, "
          f"block sum error {np.max(np.abs(blocks - mean_free)):.1e}")

    low, high = lp.low_high_split(ladder, tau)
    for s in (0.0, 1.0, 2.0):
        spec = lp.NormSpec(s=s, p=2, r=1)
        parts = [lp.besov_norm(ladder, f, spec) for f in (tau, low, high)]
        print(f"B^{s:g}_(2,1): full {parts[0]:.3e}  low {parts[1]:.3e}  high {parts[2]:.3e}")
    print("block L2 norms:", np.round(lp.block_norms(ladder, tau), 4))


if __name__ == "__main__":
    main()
