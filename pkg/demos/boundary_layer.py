"""eps u'' + x u' + sin(x) u = 0 on [-1, 1], u(+-1) = 1, for shrinking eps.

Prints the degree the adaptive solver settles on and the boundary errors.
"""

import time

import numpy as np

from spectra_pde import LinearODO, OdeProblem, interp1_adaptive, solve_ode

sin = interp1_adaptive(np.sin)
for eps in (1e-1, 1e-3, 1e-5, 1e-7):
    p = OdeProblem.dirichlet(LinearODO({2: eps, 1: [0.0, 1.0], 0: sin}), 1.0, 1.0)
    t0 = time.perf_counter()
    u = solve_ode(p, max_degree=2**17)
    wall = time.perf_counter() - t0
    err = max(abs(u(-1.0) - 1), abs(u(1.0) - 1))
    print(f"eps={eps:.0e}  degree {u.degree:6d}  boundary error {err:.1e}  {wall:.2f} s")
