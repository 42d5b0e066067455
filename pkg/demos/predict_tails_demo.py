#!/usr/bin/env python3
"""Tabulate limit tail predictions for all four horizon regimes.

For the exponential-correlation model at alpha = 1 and one level u, prints
P{v(u) L_u[0,T] > x} under each horizon family together with the scaling
ingredients (v, Psi, m) and the closed-form large-u equivalent.
"""
from sojourn_mc import covariance as cov
from sojourn_mc import heavy_tail as ht
from sojourn_mc.asymptotics import predict_tail, predictions_csv
from sojourn_mc.berman import estimate_berman

HORIZONS = [
    ht.pareto(1.5),            # integrable: tail ~ B(x) E[T] v Psi
    ht.pareto(1.0),            # index 1: E[T] replaced by truncated mean l(m)
    ht.pareto(0.5),            # index in (0,1): compound-sum series * tail_T(m)
    ht.log_pareto(),           # slowly varying: threshold-free tail_T(m)
]


def main():
    tab = estimate_berman(1.0, [0.0, 0.5, 1.0], S=20.0, step=0.01, R=20_000,
                          seed=0)
    model = cov.frac_ou(1.0)
    u = 3.5
    scaling = cov.scaling_bundle(model, u, tab.b0)
    print(f"u = {u}: v = {scaling.v:.4f}  Psi = {scaling.psi:.3e}  "
          f"m = {scaling.m:.1f}")

    preds = [predict_tail(h.scenario, model, h, tab, u, x)
             for h in HORIZONS for x in (0.0, 0.5, 1.0)]
    print(predictions_csv(preds))


if __name__ == "__main__":
    main()
