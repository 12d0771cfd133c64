"""First-order finite volumes for Burgers and isentropic Euler.

The Rusanov scheme conserves every component to rounding error, converges
in L^1 at first order, and its weak companion residual recovers the shock
dissipation.  Away from shocks the residual is O(h) with either sign: the
scheme's numerical viscosity is not a pure dissipation there.
"""

# %% Burgers shock: conservation and L^1 convergence
import math

import numpy as np
from scipy.integrate import quad

from clcons import (
    TestFunction,
    burgers_riemann_profile,
    burgers_system,
    cell_grid,
    companion_weak_residual,
    euler_system,
    fv_solve,
    quadrature_tolerance,
    riemann_initial,
)

burgers = burgers_system()
for cells in (128, 256, 512, 1024):
    init = riemann_initial(cell_grid(cells), [1.0], [-1.0], 0.5)
    field, diag = fv_solve(burgers, init, 0.2, return_diagnostics=True)
    x = field.grid.axis_coordinates(1)
    exact = burgers_riemann_profile(x, 0.2, 1.0, -1.0, 0.5, 1.0)
    window = np.abs(x - 0.5) <= 0.25
    l1 = np.abs(field.values[-1, :, 0] - exact)[window].sum() / cells
    print(f"{cells:5d} cells  L1 error {l1:.3e}  max step drift {diag['max_step_drift'].max():.1e}")

# %% Dissipation rate of the computed shock
phi = TestFunction((0.1, 0.5), (0.09, 0.2))
line = math.exp(-1) * quad(lambda t: math.exp(-1 / (1 - ((t - 0.1) / 0.09) ** 2)), 0.01, 0.19)[0]
print("rate:", companion_weak_residual(burgers, field, phi) / line, "(exact 2/3)")

# %% Isentropic Euler: a shock and a rarefaction from (rho, v) = (2, 0) | (0.5, 0)
euler = euler_system(1, kappa=1.0, gamma0=1.5)
for cells in (512, 1024, 2048):
    init = riemann_initial(cell_grid(cells), [2.0, 0.0], [0.5, 0.0], 0.5)
    field = fv_solve(euler, init, 0.15)
    print(f"{cells} cells, min density {field.values[..., 0].min():.3f}")
    for xc, label in ((0.65, "shock"), (0.5, "rarefaction")):
        phi = TestFunction((0.075, xc), (0.04, 0.05))
        r = companion_weak_residual(euler, field, phi)
        tol = quadrature_tolerance(euler, field, phi)
        print(f"    {label:12s} residual {r:+.3e}   quadrature tolerance {tol:.1e}")
