"""Scattering coefficients of simple dielectric geometries.

Sweeps frequency for a refractive step, checks the closed forms against the
boundary-condition solve, and follows two geometries into their mirror limits.
"""

import numpy as np

from qscatter import modes


def main():
    print("refractive step n_r = 1 | n_l = 3 at q = 0")
    for om in (0.5, 1.0, 2.0):
        cf = modes.closed_form("two_sided_boundary", om, n_r=1.0, n_l=3.0, q=0.0)
        orc = modes.boundary_oracle(modes.model_for("two_sided_boundary", n_r=1.0, n_l=3.0, q=0.0), om)
        S = modes.normalize_smatrix(cf, 1.0, 3.0).entries
        print(f"  omega={om:.1f}  t_rr={cf.t_rr:+.4f}  t_lr={cf.t_lr:+.4f}  "
              f"oracle gap={np.max(np.abs(cf.as_array() - orc.as_array())):.1e}  "
              f"|S^dag S - I|={np.max(np.abs(S.conj().T @ S - np.eye(2))):.1e}")

    print("\nslab of fixed optical strength shrinking to a sheet (n^2 a = 1/2)")
    target = modes.closed_form("singular_boundary", 1.0, n_r=1.0, n_l=1.5, mu=1.0, q=0.2)
    for a in (1e-1, 1e-2, 1e-3, 1e-4):
        cf = modes.closed_form("slab", 1.0, n_r=1.0, n_l=1.5, n=np.sqrt(1 / (2 * a)), a=a, q=0.2)
        print(f"  a={a:.0e}  gap to sheet={np.max(np.abs(cf.as_array() - target.as_array())):.2e}")

    print("\nwall with a dielectric sheet in front: strong sheets act as the mirror")
    for mu in (0.0, 1.0, 100.0, 1e4):
        r = modes.boundary_oracle(modes.model_for("mirror_singular_boundary", mu=mu, q=0.7), 1.0).r_r
        print(f"  mu={mu:8.1f}  r={r:+.4f}  distance to -exp(-2iq)={abs(r + np.exp(-1.4j)):.2e}")


if __name__ == "__main__":
    main()
