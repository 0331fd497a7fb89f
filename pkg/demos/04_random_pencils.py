"""The derivative formulas on plain matrix pencils.

Nothing in the G/H computation depends on the mesh: any smooth symmetric
family A(t) x = lambda B(t) x works. random_pencil plants a double and a
triple eigenvalue at t = 0, with distinct first-order splittings.
"""

import warnings

import numpy as np

from hadamard_eig import sensitivity, solve_gevp
from hadamard_eig.hadamard import GammaSolver, make_cluster
from hadamard_eig.oracle import fd_first_derivative, fd_second_derivative, random_pencil, vsplit_gamma

fam = random_pencil(20, seed=3, plan=[(2.0, 2), (4.0, 3)])
bundle = fam.bundle(0.0)
rep = sensitivity(bundle, 8)
print("eigenvalues:", np.round(rep.eigenvalues, 6))

with warnings.catch_warnings():
    warnings.simplefilter("ignore", RuntimeWarning)
    for fo in rep.first:
        cl = fo.cluster
        if cl.m == 1:
            continue
        print(f"\ncluster k={cl.k}, m={cl.m}, lambda={cl.lam:.6f}")
        for j in cl.indices:
            g1 = rep.right_first()[j - 1]
            g2 = rep.right_second()[j - 1]
            f1 = fd_first_derivative(fam.eigenvalues, 0.0, j).value
            f2 = fd_second_derivative(fam.eigenvalues, 0.0, j, g1).value
            print(f"  j={j}: lambda'+ {g1:+.8f} (fd {f1:+.8f})   lambda''+ {g2:+.5f} (fd {f2:+.5f})")

# The correction vectors entering the second derivative solve a bordered
# system. With the full eigendecomposition the same vectors come from two
# definite solves, one below and one above the cluster.
full = solve_gevp(bundle, bundle.dim)
for fo in rep.first:
    if fo.cluster.m > 1:
        cl = make_cluster(full, fo.cluster.k, fo.cluster.m)
        solver = GammaSolver(bundle, cl)
        u, lp = fo.rotated_basis[:, 0], fo.nu[0]
        w, _ = solver.solve(u, lp)
        print(f"cluster {cl.k}: bordered vs split correction differ by {np.abs(w - vsplit_gamma(bundle, full, cl, u, lp)).max():.1e}")
