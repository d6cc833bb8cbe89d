"""Evolve a small random datum under NV and compare with the linear flow.

Halving the amplitude should divide the nonlinear deviation by four.
"""

import numpy as np

from nvlab.operators import linear_propagate
from nvlab.spectral import GridSpec, random_field
from nvlab.timestepper import EvolutionConfig, evolve


def main(seed: int = 0):
    grid = GridSpec(64, 64, 2 * np.pi * 4, 2 * np.pi * 4)
    rng = np.random.default_rng(seed)
    phi = random_field(grid, rng, grid.band_mask(2.0 / 3.0))
    phi = phi * (1.0 / phi.l2_norm())
    cfg = EvolutionConfig(dt=2e-3, t_end=0.5, save_every=50)
    for eps in (0.1, 0.05, 0.025):
        F = phi * eps
        tr = evolve(F, cfg)
        dev = (tr.final - linear_propagate(F, cfg.t_end)).l2_norm()
        print(f"eps = {eps:6.3f}  ||u - e^(itP) phi|| = {dev:.4e}  / eps^2 = {dev / eps ** 2:.4f}")


if __name__ == "__main__":
    main()
