"""Worst-case expectations of white noise over overlapping regions."""
import numpy as np

from maxfield import parse, region, interval, atoms
from maxfield.whitenoise import WhiteNoiseModel, expect, fdd_generating

model = WhiteNoiseModel(1, (-1, 2))  # mean uncertainty [-1, 2] per unit measure

A = interval(0, 1)
B = interval(0.5, 2)

# overlapping regions split into disjoint atoms
dec = atoms([A, B])
for mask, m in dec.table():
    print(f"atom {mask}  measure {m}")

# noise on A minus noise on B: the shared part cancels
r = expect(model, [A, B], parse("x0 - x1"))
print("E[W_A - W_B] =", r.value, "+/-", r.error_bound)

# linear functionals reduce to the generating function
for p in np.linspace(-2, 2, 5):
    print(f"p={p:+.1f}  E[p W_A] = {fdd_generating(model, [A], [p]):+.3f}")

# a nonlinear payoff needs the box search
r = expect(model, [A, B], parse("max(x0, x1) - abs(x0 - x1)"), epsilon=1e-6)
print("E[max - |diff|] =", round(r.value, 6), "certified:", r.certified)

# a 2D region: unit square and a shifted copy
S = region(((0, 1), (0, 1)))
T = region(((0.5, 1.5), (0, 1)))
m2 = WhiteNoiseModel(2, (0, 1))
print("E[W_S * W_T] on [0,1] means =", expect(m2, [S, T], parse("x0 * x1")).value)
