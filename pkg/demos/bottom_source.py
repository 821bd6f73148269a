"""Burgers flow over a bump in the bottom.

Particles carry a source term through the obstacle with RK4. Upstream
values are recovered downstream, while the finite-volume oracle smears the
state over the obstacle.
"""
import numpy as np

from conspart.experiments import bottom_problem, comparison_rows
from conspart.flux import FluxModel
from conspart.sources import SourceModel, rk4_step

src, burgers = SourceModel.bottom_profile(), FluxModel.burgers()
for u0 in (2.0, 1.5):
    x, u = np.array([4.0]), np.array([u0])
    values = []
    for k in range(3000):
        x, u = rk4_step(x, u, burgers, src, 1e-3)
        values.append(u[0])
    print(f"u0 = {u0}: min {min(values):.4f}, max {max(values):.4f}, "
          f"after the obstacle {u[0]:.12f}")

rows = comparison_rows(bottom_problem(), [50, 100, 200], 6.0)
for r in rows:
    print(f"n = {r['n']:4d}: particle error {r['err_particle']:.3e}, "
          f"finite volume {r['err_fv']:.3e}")
