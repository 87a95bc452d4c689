"""Block-sparse multi-task regression on its own, no VAE involved.

Builds a synthetic problem whose coefficient matrix is the sum of a
dense-within-rows shared part and a few task-specific spikes, then shows
how the two penalties split the fit: the max-norm penalty catches rows
that matter for every task, the entrywise penalty catches one-off
coefficients, and the objective trace is monotone the whole way down.
"""

import numpy as np

from latentprobe import DirtyModelProblem, dirty_objective, dirty_solve


def main():
    rng = np.random.default_rng(42)
    n, p, kdim = 240, 8, 3
    x = rng.standard_normal((n, p))

    shared_true = np.zeros((p, kdim))
    shared_true[1] = (1.2, 1.0, 0.9)     # rows 1 and 4 drive every task
    shared_true[4] = (-0.8, -1.1, -0.7)
    specific_true = np.zeros((p, kdim))
    specific_true[6, 0] = 1.5            # two one-task spikes
    specific_true[2, 2] = -1.3
    y = x @ (shared_true + specific_true) + 0.05 * rng.standard_normal((n, kdim))

    problem = DirtyModelProblem(x=x, mu=y, lambda_specific=0.05,
                                lambda_shared=0.08)
    sol = dirty_solve(problem)
    print(f"converged in {sol.iterations} iterations, "
          f"objective {dirty_objective(problem, sol.specific, sol.shared):.4f}")
    drops = np.diff(np.array(sol.trace))
    print(f"trace monotone: {bool(np.all(drops <= 1e-12))}")

    shared_rows = np.where(np.abs(sol.shared).max(axis=1) > 0.05)[0]
    spec_cells = list(zip(*np.where(np.abs(sol.specific) > 0.05)))
    print(f"\nshared support rows      {shared_rows.tolist()}    (true: [1, 4])")
    print(f"specific cells (row,task) {spec_cells}    (true: [(2, 2), (6, 0)])")

    print("\npenalty sweep, shared rows surviving:")
    for lam in (0.02, 0.08, 0.3, 1.0):
        prob = DirtyModelProblem(x=x, mu=y, lambda_specific=0.05,
                                 lambda_shared=lam)
        s = dirty_solve(prob)
        rows = int(np.sum(np.abs(s.shared).max(axis=1) > 0.05))
        print(f"  lambda_shared {lam:4.2f} -> {rows} rows")


if __name__ == "__main__":
    main()
