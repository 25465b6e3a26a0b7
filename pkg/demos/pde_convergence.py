"""Finite-difference solution of the maximal heat equation versus the exact formula."""
import numpy as np

from maxfield import parse
from maxfield.pde import PdeProblem, closed_form, convergence_study, solve_fd

problem = PdeProblem([(-1, 1)], parse("-abs(x0)"), 1.0, [(-1, 1)], 1 / 32)

res = solve_fd(problem)
k = int(np.argmin(np.abs(res.axes[0])))
print("u(1, 0) numeric:", res.u_numeric[k], " exact:", closed_form(problem, 1.0, [0.0]))
print("sup error on the box:", res.error)

# the kink at the origin limits the rate to about h^(1/2)
table, rep = convergence_study(problem, [1 / 32, 1 / 64, 1 / 128], threshold=0.05)
for row in table:
    print(row)
print("passed:", rep.passed)

# linear data is transported exactly
lin = PdeProblem([(-1, 2)], parse("2 * x0 - 0.5"), 1.0, [(-1, 1)], 1 / 32)
print("linear data error:", solve_fd(lin).error)
