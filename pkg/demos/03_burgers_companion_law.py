"""The energy balance for Burgers: smooth solutions versus a shock.

For u_t + (u^2/2)_x = 0 the companion pair is (u^2/2, u^3/3).  A classical
solution conserves it; a shock from u = 1 to u = -1 dissipates it at rate
(u_l - u_r)^3 / 12 = 2/3 per unit time.

Sign convention used throughout: the weak residual  int Q . grad(phi)  is
+dissipation, whereas R_eps and the dissipation density approximate the
distribution div Q, i.e. -dissipation.
"""

# %% Setup
import math

from scipy.integrate import quad

from clcons import (
    TestFunction,
    burgers_riemann,
    burgers_smooth,
    burgers_system,
    companion_residual_mollified,
    companion_weak_residual,
    dissipation_density,
    dyadic_epsilons,
    make_grid,
    make_kernel,
    snap_epsilon,
)

burgers = burgers_system()

# %% Smooth solution before its shock time: everything vanishes
grid = make_grid([1024, 1024], [0.5, 1.0], [False, True])
smooth = burgers_smooth(grid, 0.1)
phi = TestFunction((0.25, 0.5), (0.15, 0.3))
print("weak residual (smooth):", companion_weak_residual(burgers, smooth, phi))
for eps in dyadic_epsilons(grid):
    k = make_kernel(grid, snap_epsilon(grid, eps))
    print(f"  eps={k.epsilon:.5f}  R_eps={companion_residual_mollified(burgers, smooth, k, phi):.3e}")

# %% Stationary shock: the residual converges to (2/3) int phi(t, 1/2) dt
grid = make_grid([1024, 1024], [1.0, 1.0], [False, True])
shock = burgers_riemann(grid, 1.0, -1.0, 0.5)
phi = TestFunction((0.5, 0.5), (0.3, 0.2))
line = math.exp(-1) * quad(lambda t: math.exp(-1 / (1 - ((t - 0.5) / 0.3) ** 2)), 0.2, 0.8)[0]
oracle = 2 / 3 * line
print(f"oracle (2/3) int phi = {oracle:.6f}")
print(f"weak residual        = {companion_weak_residual(burgers, shock, phi):.6f}")
for eps in dyadic_epsilons(grid):
    k = make_kernel(grid, snap_epsilon(grid, eps))
    R = companion_residual_mollified(burgers, shock, k, phi)
    D = dissipation_density(burgers, shock, k).integrate(phi)
    print(f"  eps={k.epsilon:.5f}  -R_eps/oracle={-R / oracle:.4f}  -int D phi/oracle={-D / oracle:.4f}")
