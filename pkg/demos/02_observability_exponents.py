"""Estimate weak-observability exponents from shell Gramian minima.

For each frequency shell [L, 2L) the smallest eigenvalue of the restricted
Gramian of the free flow measures the worst observability constant on that
shell; its log-log slope against L estimates -2/rho.  The synthetic family
recovers its planted exponent; the rectangle with strip control shows the
cluster-driven loss (implied exponent near 3/2, i.e. rho near 4/3).
"""

import numpy as np

from wavelq import build_rectangle, build_star_network, build_synthetic, fit_weak_observability

SHELLS = [8.0, 16.0, 32.0, 64.0]


def synthetic_recovery():
    print("== planted-exponent recovery, shells", SHELLS, "==")
    print(f"{'rho':>8} {'rho_hat':>9} {'slope':>8} {'r2':>7}")
    for rho in (1.0, 4.0 / 3.0, 2.0, 4.0):
        sys_ = build_synthetic(rho, 2.0, 128)
        rep = fit_weak_observability(sys_, 20.0, SHELLS, use_control=True)
        print(f"{rho:8.3f} {rep.rho_hat:9.3f} {rep.fitted_exponent:8.3f} {rep.fit_r2:7.4f}")
    sys_e = build_synthetic(np.inf, np.inf, 128)
    rep_e = fit_weak_observability(sys_e, 20.0, SHELLS)
    print(f"{'inf':>8} {'inf' if np.isinf(rep_e.rho_hat) else rep_e.rho_hat:>9} "
          f"{rep_e.fitted_exponent:8.3f} {rep_e.fit_r2:7.4f}  (exactly observable)\n")


def rectangle_strip():
    print("== rectangle, strip (1, 2), shells to Lambda = 32 ==")
    sys_ = build_rectangle(1.0, 2.0, 64.0)
    for mult in (4, 6, 8):
        rep = fit_weak_observability(sys_, mult * np.pi, [4.0, 8.0, 16.0, 32.0])
        consts = ", ".join(f"{c:.3e}" for c in rep.shell_constants)
        print(f"T = {mult}pi: constants [{consts}]")
        print(f"         weight exponent {abs(rep.fitted_exponent):.3f} "
              f"(cluster theory predicts 3/2, i.e. rho = 4/3), r2 = {rep.fit_r2:.3f}")
    print("the crossover horizon matters: short T starves the top shell,")
    print("long T saturates the low shells; T = 6pi keeps all four in the")
    print("power-law window.\n")


def star_quasimodes():
    print("== star network (1, pi, pi^2), control on edge 0 ==")
    sys_ = build_star_network([1.0, np.pi, np.pi**2], 0, 1, 40.0)
    rep = fit_weak_observability(sys_, 25.0, [4.0, 8.0, 16.0])
    consts = ", ".join(f"{c:.3e}" for c in rep.shell_constants)
    print(f"shell constants [{consts}], slope {rep.fitted_exponent:.3f}")
    print("network weights have no closed form; the trend is the observable\n")


if __name__ == "__main__":
    synthetic_recovery()
    rectangle_strip()
    star_quasimodes()
