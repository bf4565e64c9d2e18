"""Shared oracle-side helpers: linearized-curvature combinations.

These recombine outputs of the finite-difference linearization into the
quantities the hand-coded structure equations predict, staying entirely on
the oracle side of the comparison.  The linearized static row returns
Ric'(g~) - 2 du~ (x) du_sc - 2 du_sc (x) du~, so Ric'(g~) itself is recovered
by adding the analytic bilinear correction; the linearized scalar curvature
for a transverse direction is the background-inverse trace of Ric'(g~),
because the correction <g~, Ric_sc> = 2 u_sc'^2 g~(dr, dr) vanishes.
"""

import numpy as np

from schwarzstatic.background import background_at
from schwarzstatic.curvature_lab import adapted_frame_components


def ric_prime_cartesian(grid, direction, lin):
    """Cartesian components of Ric'(g~) from the linearized static row."""
    calc = grid.calc
    bg = background_at(grid.params, grid.r)
    corr = np.empty_like(lin.ric_row)
    for i, r in enumerate(grid.r):
        grad_u = direction.u_gradient_cart(r)  # (n, 3)
        outer = np.einsum("ni,nj->nij", grad_u, calc.normal)
        corr[i] = 2.0 * bg.du_sc[i] * (outer + np.swapaxes(outer, -1, -2))
    return lin.ric_row + corr


def scalar_curvature_prime(grid, ric_prime):
    """R'(g~) = tr_inverse Ric'(g~) for transverse directions."""
    calc = grid.calc
    fac = 1.0 - 2.0 * grid.params.m / grid.r
    nn = np.einsum("ni,nj->nij", calc.normal, calc.normal)
    ginv = nn[None] + (1.0 / fac)[:, None, None, None] * (np.eye(3) - nn)[None]
    return np.einsum("rnij,rnij->rn", ginv, ric_prime)


def oracle_combinations(grid, direction, lin):
    """Oracle-side values of the five structure residuals.

    For an arbitrary transverse direction the linearized Riccati, traced
    Gauss, Codazzi, and tangential-Gauss identities let the oracle predict
    exactly what each hand-coded residual must evaluate to:

      dg2 -> 4 u_sc' u~' - Ric'_rr
      dg4 -> 2 Ric'_rr - R'(g~) - 4 u_sc' u~'
      dg5 -> 2 u_sc' (d/ u~)_A - Ric'(dr)^T_A
      dg3 -> -(Ric'^T - (1/2) tr/ Ric'^T gamma)_AB
      dg1 -> linearized Laplacian row
    """
    bg = background_at(grid.params, grid.r)
    dusc = bg.du_sc[:, None]
    rho = np.sqrt(bg.rho2)[:, None, None]

    ric_prime = ric_prime_cartesian(grid, direction, lin)
    comps = adapted_frame_components(grid, ric_prime)
    rprime = scalar_curvature_prime(grid, ric_prime)

    du_rad = np.stack([direction.u(r, 1) for r in grid.r])
    grad_u = np.stack(
        [grid.calc.grad_scalar_frame(direction.u(r)) for r in grid.r]
    ) / rho

    ab = comps["ab"]
    tr_ab = ab[..., 0, 0] + ab[..., 1, 1]
    traceless = ab.copy()
    traceless[..., 0, 0] -= 0.5 * tr_ab
    traceless[..., 1, 1] -= 0.5 * tr_ab

    return {
        "dg2": 4.0 * dusc * du_rad - comps["rr"],
        "dg4": 2.0 * comps["rr"] - rprime - 4.0 * dusc * du_rad,
        "dg5": 2.0 * dusc[..., None] * grad_u - comps["ra"],
        "dg3": -traceless,
        "dg1": lin.lap_row,
    }
