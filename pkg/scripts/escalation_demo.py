"""Walk the halving controller on an N-link arm and show each escalation attempt.

    python scripts/escalation_demo.py --links 32 --seed 3
"""
import argparse

import numpy as np

from hyperkin import ArmLayout, SolverSettings, classic_forward
from hyperkin.meta import initial_state, solve_with_escalation, state_count
from hyperkin.sectors import count_dofs, decompose


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--links", type=int, default=32)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-iterations", type=int, default=300)
    args = parser.parse_args()
    n = args.links

    rng = np.random.default_rng(args.seed)
    target = classic_forward(ArmLayout.all_heads(n), rng.uniform(-1, 1, 2 * n))
    settings = SolverSettings.for_arm(n, 1.0, max_iterations=args.max_iterations)
    print(f"{n} links, {state_count(n)} controller states")
    result = solve_with_escalation(initial_state(n), np.zeros(2 * n), target, settings)
    for a, report in result.attempts:
        print(f"  state {a}: {report.status.value:<13} iterations {report.iterations:4d} "
              f"position error {report.final_error[0]:.2e}")
    control, mobile = count_dofs(decompose(result.state.layout))
    print(f"final state {result.state.a} (k={result.state.k}): {control} control variables, {mobile} mobile joints")


if __name__ == "__main__":
    main()
