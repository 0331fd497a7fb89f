"""One-sided derivatives of a double eigenvalue under a horizontal stretch.

Stretching the square to [0, 1+t] x [0, 1] moves the modes (1,2) and (2,1) at
different speeds: their eigenvalues are pi^2 (i^2/(1+t)^2 + j^2). At t = 0 the
sorted second eigenvalue therefore has a kink. The right derivative follows
the fast branch (-8 pi^2), the left derivative the slow one (-2 pi^2).
"""

import warnings

import numpy as np

from hadamard_eig import AnalyticField, affine_family, full_report, generate_rect_mesh
from hadamard_eig.oracle import fd_first_derivative, fd_second_derivative, mesh_curve

PI2 = np.pi ** 2
fam = affine_family(AnalyticField("stretch_x"))

mesh = generate_rect_mesh(16, 16)
rep = full_report(mesh, fam, 0.0, 3)
print("eigenvalues / pi^2:", np.round(rep.eigenvalues / PI2, 4))
print("clusters (k, m):", [(c.k, c.m) for c in rep.clusters])

right, left = rep.right_first(), rep.left_first()
right2, left2 = rep.right_second(), rep.left_second()
print("right first derivatives / pi^2:", np.round(right / PI2, 4))
print("left  first derivatives / pi^2:", np.round(left / PI2, 4))
print("right second derivatives / pi^2:", np.round(right2 / PI2, 4))
print("continuum: first -2, -8, -2 and second 6, 24, 6")

# The derivatives come from small matrices on the cluster. Finite differences
# of the sorted eigenvalues see the same numbers from each side.
curve = mesh_curve(mesh, fam, 3)
print("\nindex side   G/H value      finite difference")
with warnings.catch_warnings():
    warnings.simplefilter("ignore", RuntimeWarning)
    for j in (2, 3):
        for side, d1, d2 in (("+", right, right2), ("-", left, left2)):
            f1 = fd_first_derivative(curve, 0.0, j, side=side).value
            f2 = fd_second_derivative(curve, 0.0, j, d1[j - 1], side=side).value
            print(f"  {j}    {side}   {d1[j - 1]:12.6f}   {f1:12.6f}")
            print(f"  {j}    {side}'' {d2[j - 1]:12.4f}   {f2:12.4f}")

# Refining the mesh drives the second derivatives of the split pair towards
# 24 pi^2 and 6 pi^2 at second order.
print("\nmesh   sigma / pi^2")
for n in (8, 16, 32):
    r = full_report(generate_rect_mesh(n, n), fam, 0.0, 3)
    print(f"  {n:2d}   {np.round(r.right_second()[1:3] / PI2, 4)}")
