"""A harmonically bound mirror under coherent illumination.

The unconditional state feels a constant radiation-pressure force; quantum
trajectories under homodyne and counting detection average back to it.
"""

import numpy as np

from qscatter import filtering, qsde
from qscatter.filtering import FilterConfig
from qscatter.operators import truncated_oscillator
from qscatter.qsde import CoherentDrive


def main():
    k = 0.1
    q, p = truncated_oscillator(32)
    model = qsde.perfect_mirror(q, p, k, potential=qsde.harmonic_potential(1.0, 1.0))
    rho0 = np.zeros((32, 32), complex)
    rho0[0, 0] = 1
    ms = qsde.langevin_moments(model, CoherentDrive(1.0), rho0, 5.0, 5e-3)
    line = np.gradient(ms.p, ms.t, edge_order=2) + ms.q
    print(f"force line d<p>/dt + <q>: mean {line.mean():+.6f}, expected {-2 * k:+.6f}")
    for t in (0.0, 1.0, 2.5, 5.0):
        i = int(round(t / 5e-3))
        print(f"  t={t:3.1f}  <q>={ms.q[i]:+.5f}  <p>={ms.p[i]:+.5f}  var q={ms.var_q[i]:.4f}")

    q, p = truncated_oscillator(8)
    model = qsde.perfect_mirror(q, p, 0.5, potential=qsde.harmonic_potential(1.0, 1.0))
    rho0 = np.zeros((8, 8), complex)
    rho0[0, 0] = 1
    M = 300
    for scheme in ("homodyne", "counting"):
        res = filtering.run_ensemble(FilterConfig(scheme, model, CoherentDrive(1.0), rho0, 2e-3, 1.0,
                                                  seed=1, trajectories=M))
        stats = res.innovation_stats()
        print(f"\n{scheme}: ensemble gap to unconditional {res.gap:.3f} (5/sqrt(M) = {5 / np.sqrt(M):.3f})")
        print(f"  innovation mean {stats['mean'][0]:+.3f}, variance {stats['var'][0]:.3f}, "
              f"min eigenvalue {res.min_eigenvalue:.1e}")


if __name__ == "__main__":
    main()
