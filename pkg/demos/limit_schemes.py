"""Two singular limits of a quantum exchange interaction.

The exponential and Cayley scattering laws agree to second order in the
coupling; the third-order discrepancy is visible in a log-log fit.  Both
limits, and the adiabatic cavity elimination, give unitary S and hermitian H.
"""

import numpy as np

from qscatter import limits, particle
from qscatter.limits import ExchangeMatrix


def main():
    rng = np.random.default_rng(3)
    E = ExchangeMatrix.random(rng, m=2, d=2)
    for name, t in (("exponential", limits.scheme1_triple(E)), ("Cayley", limits.scheme2_triple(E))):
        iso, co = limits.qsde_generator(t).unitarity_residuals()
        print(f"{name:12s} |S^dag S - I|={t.unitarity_residual():.1e}  |H - H^dag|={t.hermiticity_residual():.1e}"
              f"  Ito residuals {iso:.1e}, {co:.1e}")

    eps = np.logspace(-3, -1, 9)
    d = limits.scheme_discrepancy(E, eps)
    print(f"\nscheme discrepancy slope on the 2x2 exchange block: {limits.loglog_slope(eps, d):.3f}")

    print("\nparticle phase jumps on a grid (n = 256) vs their sharp limits")
    for kind in ("scalar_delta", "rank_one"):
        for eps_ in (0.5, 1.0, 2.0):
            res = particle.solve(particle.ScatterProblem(kind, eps_, 1.0, particle.Mollifier("raised_cosine", 256)))
            print(f"  {kind:12s} eps={eps_}  s={res.s_numeric:+.5f}  error={res.error:.1e}")

    print("\natom-cavity mirror: reflection phase along the standing wave")
    for x in np.linspace(0, np.pi / 2, 5):
        s = limits.cavity_qed_smatrix(np.cos(x) ** 2, g0=1.0, gamma=2.0, delta=1.0)
        print(f"  kq={x:.3f}  S={s:+.4f}")


if __name__ == "__main__":
    main()
