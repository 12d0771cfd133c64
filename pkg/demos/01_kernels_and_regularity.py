"""Mollifiers, Besov seminorms and the VMO modulus on a lacunary series.

Run with ``python demos/01_kernels_and_regularity.py``.  Each ``# %%`` block
is a self-contained step and can be executed cell by cell in an editor.
"""

# %% Grid, kernel and a rough field
import numpy as np

from clcons import (
    besov_seminorm,
    make_grid,
    make_kernel,
    mollify,
    step_field,
    vmo_modulus,
    weierstrass_field,
)

grid = make_grid([4096], [1.0], [True])
field = weierstrass_field(grid, s=0.4, mode_count=11, seed=1)
kernel = make_kernel(grid, 2.0**-5)
print(f"kernel: {len(kernel.weights)} taps, mass {kernel.mass():.16f}")

# %% Mollification is an average: it never increases L^p norms
smooth = mollify(field, kernel)
print("max |u|      :", np.abs(field.values).max())
print("max |u * eta|:", np.abs(smooth.values).max())

# %% Besov seminorm: bounded below the true exponent, growing above it
for n_modes in (6, 8, 10, 12):
    f = weierstrass_field(grid, 0.4, n_modes, seed=0)
    below = besov_seminorm(f, 3, 0.35, max_shift_length=1 / 8)[0]
    above = besov_seminorm(f, 3, 0.60, max_shift_length=1 / 8)[0]
    print(f"K={n_modes:2d}  |u|_B^0.35 = {below:6.3f}   |u|_B^0.60 = {above:7.3f}")

# %% VMO modulus: tends to zero for the Weierstrass field, stalls for a jump
step = step_field(grid, -1.0, 1.0, 0.5)
print(" eps        omega(weierstrass)   omega(step)")
for j in range(4, 9):
    eps = 2.0**-j
    print(f" 2^-{j}      {vmo_modulus(field, 3, eps):12.4e}   {vmo_modulus(step, 3, eps):10.4f}")
