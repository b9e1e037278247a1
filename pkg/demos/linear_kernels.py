"""Green's matrix of the damped linear system, checked mode by mode.

Prints the closed-form matrix against a Pade(6,6) exponential of the 2x2
mode matrix, then the band-limited decay ratios of each kernel. The sign
change of G2 at |xi| = 1 shows up as a dip and rebound in its ratio.

    python demos/linear_kernels.py
"""

import numpy as np

from oldroydb import linear
from oldroydb import spectral as sp
from oldroydb.experiment import kernel_oracle_table


def main():
    print(f"{'t':>6} {'|xi|':>6} {'G1':>12} {'G2':>12} {'G3':>12} {'rel err':>9}")
    for t, xi, g1, g2, g3, err in kernel_oracle_table([0.0, 1.0, 2.0, 8.0], (0.1, 1.0, 4.0)):
        print(f"{t:6.2f} {xi:6.2f} {g1:12.4e} {g2:12.4e} {g3:12.4e} {err:9.1e}")

    # G2 crosses zero once on each ray |xi| = const
    ts = np.linspace(0.0, 3.0, 3001)
    for xi in (1.0, 2.0):
        g2 = linear.green_kernels(ts, xi)[1]
        print(f"G2 changes sign at t = {ts[np.argmax(g2 < 0)]:.3f} for |xi| = {xi:g}")

    grid = sp.PeriodicGrid(2, 32)
    times = (0.5, 1.0, 2.0, 4.0)
    for p in (2, np.inf):
        rep = linear.verify_decay_bound(grid, band=(1.0, 2.0), p=p, times=times)
        print(f"\np = {p}, theta = {rep.theta:g}")
        for i in range(3):
            ratios = " ".join(f"{r:9.3e}" for r in rep.ratios[i])
            print(f"  G{i + 1}: {ratios}  c = {rep.fitted_c[i]:.3f}")


if __name__ == "__main__":
    main()
