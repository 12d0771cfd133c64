"""Dyadic epsilon sweeps with log-log fits.

The flux commutator G(u * eta) - G(u) * eta of a field with Besov exponent
s = 0.4 shrinks like a power of epsilon, while the mollified gradient blows
up like eps^(s - 1).  A jump is the marginal case.
"""

# %% Setup
from clcons import (
    burgers_system,
    commutator_scaling,
    gradient_scaling,
    make_grid,
    step_field,
    weierstrass_field,
)

grid = make_grid([4096], [1.0], [True])
rough = weierstrass_field(grid, 0.4, 11, seed=1)
jump = step_field(grid, -1.0, 1.0, 0.5)
epsilons = [2.0**-j for j in range(4, 9)]
burgers = burgers_system()


def show(report):
    print(f"{report.quantity_name}: slope {report.slope:.3f}", end="")
    if report.ratio_slope is not None:
        print(f", ratio-to-bound slope {report.ratio_slope:.3f}", end="")
    print()
    for eps, value in report.pairs:
        print(f"    eps={eps:.5f}  value={value:.4e}")


# %% Commutator decay (q = 1.5)
show(commutator_scaling(burgers, rough, 1.5, epsilons))

# %% Gradient growth: about -0.6 for s = 0.4, about -2/3 for the jump at p = 3
show(gradient_scaling(rough, 3, "bump", epsilons))
show(gradient_scaling(jump, 3, "bump", epsilons))

# %% Reports serialise to CSV / JSON for later plotting
report = commutator_scaling(burgers, rough, 1.5, epsilons)
print(report.to_dict()["fit"])
