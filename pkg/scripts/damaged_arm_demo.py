"""Decompose the four-damaged-link layout and solve a reachable position target.

    python scripts/damaged_arm_demo.py [--seed 0]
"""
import argparse

import numpy as np

from hyperkin import ArmLayout, SolverSettings, count_dofs, decompose, expand_configuration, reduced_forward
from hyperkin.meta import solve_with_escalation, state_from_layout

H = (1, -1, -1, 1, 0, 0, 0, 0, -1, 1, 1, 0, 0, 0, -1, 1)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    layout = ArmLayout(16, 1.0, H, {i: (0.0, 0.0) for i in (2, 3, 9, 15)})
    decomp = decompose(layout)
    control, mobile = count_dofs(decomp)
    print("damaged links:", decomp.damaged)
    for s in decomp.sectors:
        print(f"  sector head={s.first_link} body={s.body_count}")
    print(f"control variables {control}, mobile joints {mobile}")

    rng = np.random.default_rng(args.seed)
    target = reduced_forward(decomp, layout, rng.uniform(-0.8, 0.8, decomp.size))
    q0 = expand_configuration(decomp, layout, np.zeros(decomp.size))
    settings = SolverSettings.for_arm(16, 1.0, position_only=True)
    result = solve_with_escalation(state_from_layout(layout), q0, target, settings)
    r = result.report
    print(f"{r.status.value} after {r.iterations} iterations, position error {r.final_error[0]:.2e}, "
          f"restructures {result.restructures}")


if __name__ == "__main__":
    main()
