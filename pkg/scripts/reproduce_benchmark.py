#!/usr/bin/env python3
"""Print the full theoretical benchmark: success curves, equilibrium
conditions, risk-neutral and robust equilibrium tables, and the cross-arm
hypothesis comparison, under both the pessimist (alpha=1) and optimist
(alpha=0) evaluations."""
from thresholdgame.game import TREATMENTS, build_success_curve, make_scenario, prob_to_str
from thresholdgame.preferences import RISK_NEUTRAL
from thresholdgame.solver import equilibrium_table, hypothesis_report, robust_table


def main() -> None:
    for alpha, tag in ((1.0, "pessimist (alpha=1)"), (0.0, "optimist (alpha=0)")):
        print(f"===== {tag} =====")
        for label in TREATMENTS:
            curve = build_success_curve(make_scenario(label), alpha)
            steps = ", ".join(f"p={prob_to_str(p)} from C={c.compact()}"
                              for c, p in curve.breakpoints)
            print(f"  {label}: {steps}")
        print()
        print("Risk-neutral equilibrium totals:")
        print(equilibrium_table(RISK_NEUTRAL, alpha).render())
        print()
        print("Totals robust to every power utility in [0.2, 10]:")
        print(robust_table(alpha=alpha).render())
        print()
        print(hypothesis_report(alpha).render())
        print()


if __name__ == "__main__":
    main()
