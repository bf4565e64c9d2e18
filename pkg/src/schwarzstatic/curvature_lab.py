"""Grid evaluation of the conformal static operator and its linearization.

The nonlinear residual (Ric_g - 2 du (x) du, Lap_g u) is evaluated from
Cartesian metric components sampled on a radial x spherical grid.  Radial
derivatives use 4th-order stencils; angular derivatives go through harmonic
synthesis of basis derivatives, which is exact on band-limited data, so the
radial truncation dominates and the residual of the exact background
converges at 4th order.

The linearization oracle is a centered directional difference with one
Richardson halving: D(eps) = [T(q + eps d) - T(q - eps d)] / (2 eps) and
output (4 D(eps/2) - D(eps)) / 3.  Directions are sup-normalized before
differencing.  This path never touches the hand-coded structure equations,
which it exists to check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .background import SchwarzschildParams
from .fd import d1_matrix
from .fields import DeformationField
from .sphere_ops import SphereCalc

__all__ = [
    "LabGrid",
    "MetricField",
    "make_lab_grid",
    "schwarzschild_samples",
    "flat_samples",
    "gradient_scalar",
    "gradient_components",
    "christoffel",
    "ricci_tensor",
    "conformal_static_residual",
    "boundary_data",
    "LinearizedLc",
    "linearize_at_schwarzschild",
    "adapted_frame_components",
]


@dataclass
class LabGrid:
    """Radial nodes tensored with a spherical calculus grid."""

    params: SchwarzschildParams
    calc: SphereCalc
    r: np.ndarray
    D1: np.ndarray

    @property
    def n_r(self) -> int:
        return len(self.r)

    @property
    def h(self) -> float:
        return float(self.r[1] - self.r[0])

    def refined(self, factor: int = 2) -> "LabGrid":
        """Same domain and angular grid with the radial spacing divided."""
        n = (self.n_r - 1) * factor + 1
        r = np.linspace(self.r[0], self.r[-1], n)
        return LabGrid(self.params, self.calc, r, d1_matrix(n, r[1] - r[0]))


def make_lab_grid(
    params: SchwarzschildParams,
    r_outer: float | None = None,
    n_r: int = 97,
    l_max: int = 16,
    calc: SphereCalc | None = None,
) -> LabGrid:
    if r_outer is None:
        r_outer = 2.5 * params.r0
    if calc is None:
        calc = SphereCalc(l_max)
    r = np.linspace(params.r0, r_outer, n_r)
    return LabGrid(params, calc, r, d1_matrix(n_r, r[1] - r[0]))


@dataclass
class MetricField:
    """Validated Cartesian metric samples on a lab grid.

    components has shape (n_r, n_nodes, 3, 3); construction rejects
    asymmetric or non-positive-definite samples.
    """

    components: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.components, dtype=float)
        if c.ndim != 4 or c.shape[-2:] != (3, 3):
            raise ValueError("metric samples must have shape (n_r, n, 3, 3)")
        if np.abs(c - np.swapaxes(c, -1, -2)).max() > 1e-12:
            raise ValueError("metric samples must be symmetric")
        _check_metric(c)
        self.components = c


def _unwrap(G):
    return G.components if isinstance(G, MetricField) else G


def schwarzschild_samples(grid: LabGrid):
    """Cartesian samples of the conformal background pair on the grid."""
    calc, r = grid.calc, grid.r
    fac = 1.0 - 2.0 * grid.params.m / r
    nn = np.einsum("ni,nj->nij", calc.normal, calc.normal)
    G = nn[None] + fac[:, None, None, None] * (np.eye(3) - nn)[None]
    U = 0.5 * np.log(fac)[:, None] * np.ones((1, calc.n_nodes))
    return G, U


def flat_samples(grid: LabGrid):
    G = np.broadcast_to(np.eye(3), (grid.n_r, grid.calc.n_nodes, 3, 3)).copy()
    U = np.zeros((grid.n_r, grid.calc.n_nodes))
    return G, U


def gradient_scalar(grid: LabGrid, f: np.ndarray) -> np.ndarray:
    """Cartesian gradient of scalar samples (n_r, n) -> (n_r, n, 3)."""
    calc = grid.calc
    dr = grid.D1 @ f
    dt, dp = calc.angular_derivatives(f)
    inv_r = 1.0 / grid.r[:, None]
    return (
        dr[..., None] * calc.normal
        + (dt * inv_r)[..., None] * calc.theta_hat
        + (dp * inv_r / calc.sin_theta)[..., None] * calc.phi_hat
    )


def gradient_components(grid: LabGrid, field: np.ndarray) -> np.ndarray:
    """Componentwise Cartesian gradient: (n_r, n, *c) -> (n_r, n, *c, 3)."""
    tail = field.shape[2:]
    calc = grid.calc
    flat = np.moveaxis(field.reshape(grid.n_r, calc.n_nodes, -1), -1, 0)
    dr = np.einsum("ab,cbn->can", grid.D1, flat)
    dt, dp = calc.angular_derivatives(flat)
    inv_r = 1.0 / grid.r[None, :, None]
    g = (
        dr[..., None] * calc.normal
        + (dt * inv_r)[..., None] * calc.theta_hat
        + (dp * inv_r / calc.sin_theta)[..., None] * calc.phi_hat
    )  # (C, n_r, n, 3)
    g = np.moveaxis(g, 0, -2)
    return g.reshape(grid.n_r, calc.n_nodes, *tail, 3)


def christoffel(grid: LabGrid, G: np.ndarray, dG: np.ndarray | None = None):
    """Christoffel symbols (n_r, n, a, i, j) of metric samples."""
    ginv = np.linalg.inv(G)
    if dG is None:
        dG = gradient_components(grid, G)  # [..., i, j, k] = d_k g_ij
    di_gbj = np.einsum("...bji->...bij", dG)
    dj_gbi = dG  # [..., b, i, j] = d_j g_bi
    db_gij = np.einsum("...ijb->...bij", dG)
    gamma = 0.5 * np.einsum("...ab,...bij->...aij", ginv, di_gbj + dj_gbi - db_gij)
    return gamma, ginv


def ricci_tensor(grid: LabGrid, G: np.ndarray):
    """Ricci tensor (n_r, n, 3, 3) of metric samples, and the Christoffels."""
    gamma, ginv = christoffel(grid, G)
    dgamma = gradient_components(grid, gamma)  # [..., a, i, j, k] = d_k Gamma^a_ij
    ric = np.einsum("...aija->...ij", dgamma)
    ric -= np.einsum("...aaji->...ij", dgamma)
    ric += np.einsum("...aab,...bij->...ij", gamma, gamma)
    ric -= np.einsum("...aib,...baj->...ij", gamma, gamma)
    ric = 0.5 * (ric + np.swapaxes(ric, -1, -2))  # mixed-partial symmetrization
    return ric, gamma, ginv


def _check_metric(G: np.ndarray):
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "metric not positive definite at some node (reduce eps)"
        ) from exc


def conformal_static_residual(grid: LabGrid, G, U: np.ndarray):
    """(Ric_g - 2 du (x) du, Lap_g u) on the grid.

    Accepts a MetricField or a raw component array; raises ValueError if the
    metric loses positive definiteness.
    """
    G = _unwrap(G)
    _check_metric(G)
    ric, gamma, ginv = ricci_tensor(grid, G)
    du = gradient_scalar(grid, U)
    d2u = gradient_components(grid, du)
    d2u = 0.5 * (d2u + np.swapaxes(d2u, -1, -2))
    hess = d2u - np.einsum("...aij,...a->...ij", gamma, du)
    lap = np.einsum("...ij,...ij->...", ginv, hess)
    ric_row = ric - 2.0 * np.einsum("...i,...j->...ij", du, du)
    return ric_row, lap


def boundary_data(grid: LabGrid, G, U: np.ndarray):
    """Transformed boundary rows at r = r0.

    Returns (tau, h): tau are frame components of e^(-2u) g restricted to the
    boundary sphere, h = e^u (H_g - 2 nu(u)) with nu the g-unit normal of the
    foliation pointing to infinity and H_g its g-divergence.
    """
    calc = grid.calc
    G = _unwrap(G)
    ginv = np.linalg.inv(G)
    raw = np.einsum("rnij,nj->rni", ginv, calc.normal)
    norm = np.sqrt(np.einsum("rni,ni->rn", raw, calc.normal))
    nu = raw / norm[..., None]

    sign, logdet = np.linalg.slogdet(G)
    if np.any(sign <= 0):
        raise ValueError("metric lost positive definiteness")
    dnu = gradient_components(grid, nu)  # [..., i, k] = d_k nu^i
    div = np.einsum("rnii->rn", dnu)
    dhalf = gradient_scalar(grid, 0.5 * logdet)
    div += np.einsum("rni,rni->rn", nu, dhalf)

    du = gradient_scalar(grid, U)
    nu_u = np.einsum("rni,rni->rn", nu, du)
    h_row = np.exp(U[0]) * (div[0] - 2.0 * nu_u[0])

    e = np.stack([calc.theta_hat, calc.phi_hat], axis=1)  # unit-sphere frame
    r0, m = grid.params.r0, grid.params.m
    scale = r0 / np.sqrt(r0 * (r0 - 2.0 * m))  # adapted frame e_A = scale * unit frame
    tau = np.einsum("nij,nai,nbj->nab", G[0], e, e) * scale**2
    tau = np.exp(-2.0 * U[0])[:, None, None] * tau
    return tau, h_row


@dataclass
class LinearizedLc:
    """Directional derivative of the conformal static boundary-value map."""

    ric_row: np.ndarray  # (n_r, n, 3, 3)
    lap_row: np.ndarray  # (n_r, n)
    boundary_tau: np.ndarray  # (n, 2, 2) frame components
    boundary_h: np.ndarray  # (n,)
    eps: float
    scale: float


def _tc_rows(grid, G, U):
    ric_row, lap = conformal_static_residual(grid, G, U)
    tau, h_row = boundary_data(grid, G, U)
    return ric_row, lap, tau, h_row


def linearize_at_schwarzschild(
    grid: LabGrid,
    direction: DeformationField,
    eps: float = 1e-4,
    richardson: bool = True,
) -> LinearizedLc:
    """Directional finite-difference linearization at the background pair."""
    G0, U0 = schwarzschild_samples(grid)
    dg = np.stack([direction.cartesian(r) for r in grid.r])
    du = np.stack([direction.u(r) for r in grid.r])
    scale = max(np.abs(dg).max(), np.abs(du).max())
    if scale == 0.0:
        zero = np.zeros_like
        return LinearizedLc(
            ric_row=zero(G0), lap_row=zero(U0),
            boundary_tau=np.zeros((grid.calc.n_nodes, 2, 2)),
            boundary_h=np.zeros(grid.calc.n_nodes), eps=eps, scale=0.0,
        )
    dg = dg / scale
    du = du / scale

    def diff(e):
        plus = _tc_rows(grid, G0 + e * dg, U0 + e * du)
        minus = _tc_rows(grid, G0 - e * dg, U0 - e * du)
        return [(p - q) / (2.0 * e) for p, q in zip(plus, minus)]

    rows = diff(eps)
    if richardson:
        half = diff(0.5 * eps)
        rows = [(4.0 * h - f) / 3.0 for h, f in zip(half, rows)]
    rows = [scale * row for row in rows]
    return LinearizedLc(
        ric_row=rows[0], lap_row=rows[1], boundary_tau=rows[2], boundary_h=rows[3],
        eps=eps, scale=scale,
    )


def adapted_frame_components(grid: LabGrid, T: np.ndarray):
    """Project (n_r, n, 3, 3) tensor samples onto the adapted frame.

    Returns dict with 'rr' (n_r, n), 'ra' (n_r, n, 2), 'ab' (n_r, n, 2, 2);
    frame vectors are d/dr and the parallel tangential frame (r/rho) * unit.
    """
    calc = grid.calc
    n = calc.normal
    e = np.stack([calc.theta_hat, calc.phi_hat], axis=1)
    fac = grid.r / np.sqrt(grid.r * (grid.r - 2.0 * grid.params.m))
    rr = np.einsum("rnij,ni,nj->rn", T, n, n)
    ra = np.einsum("rnij,ni,naj->rna", T, n, e) * fac[:, None, None]
    ab = np.einsum("rnij,nai,nbj->rnab", T, e, e) * fac[:, None, None, None] ** 2
    return {"rr": rr, "ra": ra, "ab": ab}
