"""Solve a few 2D problems with known answers and print errors and diagnostics.

Usage: python3 demos/gallery.py [helmholtz|variable|biharmonic|klein-gordon ...]
"""

import sys
import time

import numpy as np

from spectra_pde import BcSpec, PdeProblem, solve_pde


def dirichlet_from(f):
    return {
        "left": BcSpec.dirichlet(lambda y: f(-1.0 + 0 * y, y)),
        "right": BcSpec.dirichlet(lambda y: f(1.0 + 0 * y, y)),
        "down": BcSpec.dirichlet(lambda x: f(x, -1.0 + 0 * x)),
        "up": BcSpec.dirichlet(lambda x: f(x, 1.0 + 0 * x)),
    }


def helmholtz():
    w = 10 * np.pi
    exact = lambda x, y: np.cos(w * x) * np.cos(w * y)
    return PdeProblem(f"lap(u) + {2 * w * w!r}*u", bcs=dirichlet_from(exact)), exact


def variable():
    exact = lambda x, y: np.cos(np.cos(x * (y + 1)))
    p = PdeProblem("lap(u) + (x^2+(y+1)^2)*sin(x*(y+1))^2*u", bcs=dirichlet_from(exact),
                   rhs="(x^2+(y+1)^2)*cos(x*(y+1))*sin(cos(x*(y+1)))")
    return p, exact


def biharmonic():
    def w(x, y):
        z = x + 1j * y
        return np.conj(z) * np.exp(-2 * z) + np.cos(np.cos(z))

    def grad(x, y):
        z = x + 1j * y
        core = -2 * np.conj(z) * np.exp(-2 * z) + np.sin(np.cos(z)) * np.sin(z)
        return np.imag(np.exp(-2 * z) + core), np.imag(-1j * np.exp(-2 * z) + 1j * core)

    v = lambda x, y: np.imag(w(x, y))
    bcs = {}
    for edge, c in (("left", -1.0), ("right", 1.0)):
        bcs[edge] = (BcSpec.dirichlet(lambda y, c=c: v(c + 0 * y, y))
                     + BcSpec.neumann(lambda y, c=c: grad(c + 0 * y, y)[0]))
    for edge, c in (("down", -1.0), ("up", 1.0)):
        bcs[edge] = (BcSpec.dirichlet(lambda x, c=c: v(x, c + 0 * x))
                     + BcSpec.neumann(lambda x, c=c: grad(x, c + 0 * x)[1]))
    return PdeProblem("biharm(u)", bcs=bcs), v


def klein_gordon():
    p = PdeProblem("diff(u,y,2) - diff(u,x,2) + 5*u", domain=(-1, 1, 0, 10),
                   bcs={"left": "dirichlet: 0", "right": "u/5 + diff(u) = 0",
                        "down": ["dirichlet: exp(-50*(x-0.2)^2)", "neumann: 0"]})
    return p, None


CASES = {"helmholtz": helmholtz, "variable": variable, "biharmonic": biharmonic, "klein-gordon": klein_gordon}


def run(name):
    p, exact = CASES[name]()
    t0 = time.perf_counter()
    s = solve_pde(p)
    wall = time.perf_counter() - t0
    d = s.diagnostics
    line = (f"{name:13s} rank {d.k}  path {d.path:5s} grid ({d.nx}, {d.ny})  "
            f"kept {s.u.X.shape[1]}x{s.u.X.shape[0]}  {wall:6.2f} s")
    if exact is not None:
        a, b, c, e = p.domain
        X, Y = np.meshgrid(np.linspace(a, b, 100), np.linspace(c, e, 100))
        line += f"  max error {np.abs(s(X, Y) - exact(X, Y)).max():.2e}"
    print(line)


if __name__ == "__main__":
    for name in sys.argv[1:] or list(CASES):
        run(name)
