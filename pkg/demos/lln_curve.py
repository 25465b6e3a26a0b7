"""Sample means under an adversarial family of mean paths approach the worst-case value."""
from maxfield import parse
from maxfield.lln import MeasureFamily, convergence_curve

family = MeasureFamily.standard((-1, 2), noise="uniform", sigma=1.0)
phi = parse("x0^2")  # worst case over [-1, 2] is 4

rows, rep = convergence_curve(family, phi, [10, 100, 1000, 10000], samples=4000, seed=0)
for r in rows:
    print(f"n={r.n:6d}  value={r.value:.4f}  se={r.std_error:.4f}  "
          f"gap={r.gap:.4f}  best={r.best_strategy}")
print("shrinking:", rep.details["shrinking"])
