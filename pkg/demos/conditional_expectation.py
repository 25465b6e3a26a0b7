"""Conditioning on the noise seen before a time cut."""
from maxfield import expr as ex, region
from maxfield.integral import conditional_expect, measurable_before, noise
from maxfield.whitenoise import WhiteNoiseModel

model = WhiteNoiseModel(2, (0, 1))  # axis 0 is time

past = noise(region(((0, 1), (0, 1))))
future = noise(region(((1, 2), (0, 1))))
X = past + future

psi = conditional_expect(X, 1, model)
print("depends only on the past:", measurable_before(psi, 1))

# at a fixed past value w the future adds its worst-case mean
for w in (0.0, 0.5, 1.0):
    v = psi.apply(lambda e: ex.substitute(e, {0: ex.Const(w)}))
    print(f"W_past = {w}:  E[X | past] = {v.expect(model).value:.6f}")

# the tower property: conditioning at 0 recovers the plain expectation
print("E[E[X | past]] =", conditional_expect(psi, 0, model).expect(model).value)
print("E[X] =", X.expect(model).value)
