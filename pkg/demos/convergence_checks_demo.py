#!/usr/bin/env python3
"""Desk-scale convergence diagnostics for the two limit mechanisms.

First: over horizons T = l * m(u), the scaled sojourn tail should approach
the compound Poisson tail with jump law F_alpha; the sup-discrepancy over l
should shrink as u grows. Second: over deterministic windows A(u) between
1/v and m, the tail should match B(x) A v Psi; the ratio should approach 1.
"""
from sojourn_mc import covariance as cov
from sojourn_mc.berman import estimate_berman
from sojourn_mc.experiments import (
    compound_poisson_convergence_check,
    intermediate_horizon_ratio_check,
)


def main():
    tab = estimate_berman(1.0, [0.0, 0.5, 1.0], S=20.0, step=0.01, R=20_000,
                          seed=0)
    model = cov.frac_ou(1.0)

    out = compound_poisson_convergence_check(
        1.0, tab, model, u_grid=[2.5, 3.0], l_grid=[0.5, 1.0, 2.0], x=0.0,
        R=10_000, seed=0)
    print("compound-Poisson check (x = 0, target 1 - exp(-l)):")
    for row in out["rows"]:
        print(f"  u={row['u']:.1f} l={row['l']:.1f} emp={row['empirical']:.4f} "
              f"target={row['target']:.4f} |d|={row['discrepancy']:.4f} "
              f"(se {row['se']:.4f})")
    for s in out["sup_discrepancy"]:
        print(f"  sup over l at u={s['u']:.1f}: {s['sup_discrepancy']:.4f}")

    out = intermediate_horizon_ratio_check(
        1.0, tab, model, u_grid=[2.5, 3.0, 3.5], A_rule="sqrt(m/v)", x=0.0,
        R=20_000, seed=0)
    print("intermediate-window ratio check (A = sqrt(m/v)):")
    for row in out["rows"]:
        print(f"  u={row['u']:.1f} A={row['A']:.2f} ratio={row['ratio']:.3f} "
              f"(se/pred {row['se'] / row['predicted']:.3f})")


if __name__ == "__main__":
    main()
