"""Per-mode radial ODE: integration, substitutions, classification, verdicts.

Each spherical-harmonic coefficient a(r) of the scalar deformation obeys

    (r(r-2m) a')' = (4 m^2 / (r(r-2m)) + l(l+1)) a - S / (r(r-2m)),
    a'(r0) = (l(l+1) - 2m/r0) a(r0) / (2 (r0 - 2m)),

where the constant S = 2m ((4m - r0) a(r0) + r0 (r0 - 2m) a'(r0)) comes from
the boundary data; S is regular in m, so the generic integrator never divides
by m.  The order does not enter; only the degree l matters.

Integration runs in r out to a phase-switch radius and then in the
compactified variable x = 1/r, which resolves the far tail out to
r_max = r_max_factor * r0 for limit and decay-rate fits.  For m = 0 (or
|m| below a relative threshold) the equation is an Euler equation with the
closed-form solution c1 r^(-l-1) + c2 r^l, used directly and flagged.

Substitution constants (m != 0): alpha0 = (3/2 + r0 (l(l+1)-2)/(4m)) a(r0),
beta0 = 4 m^2 alpha0 / (l(l+1)-2) for l != 1.  Derived views: A = a - alpha0,
phi = r(r-2m) A, Phi = 2(r-m) A / (r(r-2m)) + A', B = a - beta0/(r(r-2m)).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .background import SchwarzschildParams

__all__ = [
    "FLAT_MASS_RTOL",
    "ModeIVP",
    "ModeSolution",
    "AsymptoticKind",
    "AsymptoticClass",
    "KernelVerdict",
    "PositivityReport",
    "make_ivp",
    "integrate_mode",
    "classify",
    "verify_kernel_trivial",
    "comparison_positivity",
]

FLAT_MASS_RTOL = 1e-8  # |m| < FLAT_MASS_RTOL * r0 runs the flat branch
PHASE_SWITCH = 1e3  # switch from r to x = 1/r at PHASE_SWITCH * r0
DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12


@dataclass(frozen=True)
class ModeIVP:
    """Initial value problem for one mode coefficient."""

    params: SchwarzschildParams
    ell: int
    a0: float
    da0: float
    source: float  # ODE source constant S
    alpha0: float | None
    beta0: float | None
    flat_branch: bool

    @property
    def m(self) -> float:
        return self.params.m

    @property
    def r0(self) -> float:
        return self.params.r0


def make_ivp(params: SchwarzschildParams, ell: int, a0: float) -> ModeIVP:
    if ell < 0:
        raise ValueError("degree must be nonnegative")
    m, r0 = params.m, params.r0
    ll1 = ell * (ell + 1.0)
    flat = abs(m) < FLAT_MASS_RTOL * r0
    if flat:
        da0 = ll1 / (2.0 * r0) * a0
        return ModeIVP(
            params=params, ell=ell, a0=a0, da0=da0, source=0.0,
            alpha0=None, beta0=None, flat_branch=True,
        )
    da0 = (ll1 - 2.0 * m / r0) * a0 / (2.0 * (r0 - 2.0 * m))
    source = 2.0 * m * ((4.0 * m - r0) * a0 + r0 * (r0 - 2.0 * m) * da0)
    alpha0 = (1.5 + r0 / (4.0 * m) * (ll1 - 2.0)) * a0
    beta0 = 4.0 * m * m * alpha0 / (ll1 - 2.0) if ell != 1 else None
    return ModeIVP(
        params=params, ell=ell, a0=a0, da0=da0, source=source,
        alpha0=alpha0, beta0=beta0, flat_branch=False,
    )


class AsymptoticKind(str, enum.Enum):
    DECAYS_TO_ZERO = "DecaysToZero"
    CONVERGES_NONZERO = "ConvergesNonzero"
    DIVERGES_PLUS = "DivergesPlus"
    DIVERGES_MINUS = "DivergesMinus"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class AsymptoticClass:
    kind: AsymptoticKind
    fitted_limit: float
    fitted_exponent: float
    r_max: float


@dataclass
class ModeSolution:
    """Radial samples of one mode and its derived views."""

    ivp: ModeIVP
    radii: np.ndarray
    a: np.ndarray
    da: np.ndarray
    r_max_used: float
    diverged: bool
    flat_coeffs: tuple[float, float] | None = None  # (c1, c2) of the Euler solution
    _dense: list = field(default_factory=list, repr=False)

    def rho2(self, r=None) -> np.ndarray:
        r = self.radii if r is None else np.asarray(r, dtype=float)
        return r * (r - 2.0 * self.ivp.m)

    @property
    def A(self) -> np.ndarray | None:
        if self.ivp.alpha0 is None:
            return None
        return self.a - self.ivp.alpha0

    @property
    def phi(self) -> np.ndarray | None:
        A = self.A
        return None if A is None else self.rho2() * A

    @property
    def Phi(self) -> np.ndarray | None:
        A = self.A
        if A is None:
            return None
        r, m = self.radii, self.ivp.m
        return 2.0 * (r - m) / self.rho2() * A + self.da

    @property
    def B(self) -> np.ndarray | None:
        if self.ivp.beta0 is None:
            return None
        return self.a - self.ivp.beta0 / self.rho2()

    def eval(self, r) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate (a, a') at arbitrary radii within the integrated range."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r < self.ivp.r0) or np.any(r > self.r_max_used * (1 + 1e-12)):
            raise ValueError("evaluation outside the integrated range")
        if self.flat_coeffs is not None:
            return _flat_eval(self.ivp, self.flat_coeffs, r)
        a = np.empty_like(r)
        da = np.empty_like(r)
        for dense, lo, hi, in_x in self._dense:
            if in_x:
                mask = r > lo
                if np.any(mask):
                    y = dense(1.0 / r[mask])
                    a[mask] = y[0]
                    da[mask] = y[1] / (r[mask] * (r[mask] - 2.0 * self.ivp.m))
            else:
                mask = (r >= lo) & (r <= hi)
                if np.any(mask):
                    y = dense(r[mask])
                    a[mask] = y[0]
                    da[mask] = y[1] / (r[mask] * (r[mask] - 2.0 * self.ivp.m))
        return a, da


def _flat_coeffs(ivp: ModeIVP) -> tuple[float, float]:
    """Euler-solution coefficients from the initial data (m treated as 0)."""
    ell, r0, a0, da0 = ivp.ell, ivp.r0, ivp.a0, ivp.da0
    if ell == 0:
        return -(r0 * r0) * da0, a0 + r0 * da0  # a = c1/r + c2
    mat = np.array(
        [
            [r0 ** (-ell - 1), r0**ell],
            [-(ell + 1) * r0 ** (-ell - 2), ell * r0 ** (ell - 1)],
        ]
    )
    c1, c2 = np.linalg.solve(mat, np.array([a0, da0]))
    return float(c1), float(c2)


def _flat_eval(ivp: ModeIVP, coeffs, r):
    c1, c2 = coeffs
    ell = ivp.ell
    a = c1 * r ** (-ell - 1.0) + c2 * r ** (1.0 * ell)
    da = -(ell + 1.0) * c1 * r ** (-ell - 2.0) + ell * c2 * r ** (ell - 1.0)
    return a, da


def _sample_radii(r0, r_max, per_decade=48):
    decades = np.log10(r_max / r0)
    n = max(64, int(np.ceil(per_decade * decades)) + 1)
    return np.geomspace(r0, r_max, n)


def integrate_mode(
    ivp: ModeIVP,
    r_max: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    k_div: float = 1e3,
    force_generic: bool = False,
) -> ModeSolution:
    """Integrate the first-order system (a, w = r(r-2m) a') out to r_max.

    Integration terminates early once |a| crosses k_div * |a(r0)| (the mode
    has certifiably diverged); r_max_used records the reached radius.
    """
    if r_max <= ivp.r0:
        raise ValueError("r_max must exceed r0")

    if ivp.flat_branch and not force_generic:
        coeffs = _flat_coeffs(ivp)
        radii = _sample_radii(ivp.r0, r_max)
        a, da = _flat_eval(ivp, coeffs, radii)
        scale0 = abs(ivp.a0) if ivp.a0 != 0.0 else 1.0
        div = bool(np.abs(a).max() >= k_div * scale0)
        if div:
            stop = int(np.argmax(np.abs(a) >= k_div * scale0))
            radii, a, da = radii[: stop + 1], a[: stop + 1], da[: stop + 1]
        return ModeSolution(
            ivp=ivp, radii=radii, a=a, da=da,
            r_max_used=float(radii[-1]), diverged=div, flat_coeffs=coeffs,
        )

    m, r0, ll1, S = ivp.m, ivp.r0, ivp.ell * (ivp.ell + 1.0), ivp.source
    scale0 = abs(ivp.a0) if ivp.a0 != 0.0 else 1.0
    threshold = k_div * scale0

    def rhs_r(r, y):
        rho2 = r * (r - 2.0 * m)
        return [y[1] / rho2, (4.0 * m * m / rho2 + ll1) * y[0] - S / rho2]

    def rhs_x(x, y):
        omx = 1.0 - 2.0 * m * x
        da_dx = -y[1] / omx
        dw_dx = -(4.0 * m * m / omx) * y[0] - ll1 * y[0] / (x * x) + S / omx
        return [da_dx, dw_dx]

    def blowup(t, y):
        return abs(y[0]) - threshold

    blowup.terminal = True
    events = blowup if np.isfinite(threshold) else None

    rho2_0 = r0 * (r0 - 2.0 * m)
    y0 = [ivp.a0, rho2_0 * ivp.da0]
    r_switch = min(r_max, PHASE_SWITCH * r0)

    dense = []
    sol1 = solve_ivp(
        rhs_r, (r0, r_switch), y0, method="DOP853",
        rtol=rtol, atol=atol, dense_output=True, events=events,
    )
    if not sol1.success:
        raise RuntimeError(f"mode integration failed: {sol1.message}")
    diverged = sol1.status == 1
    r_reached = float(sol1.t[-1])
    dense.append((sol1.sol, r0, r_reached, False))

    if not diverged and r_max > r_switch:
        y1 = sol1.y[:, -1]
        sol2 = solve_ivp(
            rhs_x, (1.0 / r_switch, 1.0 / r_max), y1, method="DOP853",
            rtol=rtol, atol=atol, dense_output=True, events=events,
        )
        if not sol2.success:
            raise RuntimeError(f"tail integration failed: {sol2.message}")
        diverged = sol2.status == 1
        r_reached = float(1.0 / sol2.t[-1])
        dense.append((sol2.sol, r_switch, r_reached, True))

    radii = _sample_radii(r0, r_reached)
    out = ModeSolution(
        ivp=ivp, radii=radii, a=np.empty_like(radii), da=np.empty_like(radii),
        r_max_used=r_reached, diverged=diverged, _dense=dense,
    )
    out.a, out.da = out.eval(radii)
    return out


def _tail(sol: ModeSolution):
    mask = sol.radii >= sol.radii[-1] / 10.0
    if mask.sum() < 8:
        mask = np.zeros_like(mask)
        mask[-8:] = True
    return sol.radii[mask], sol.a[mask]


def classify(
    sol: ModeSolution,
    decay_q: float = 0.75,
    eps_dec: float = 1e-4,
    k_div: float = 1e3,
    cauchy_rtol: float = 1e-3,
) -> AsymptoticClass:
    """Asymptotic trichotomy of an integrated mode.

    DecaysToZero requires both smallness at the end of the run and a log-log
    decay slope at least as steep as -decay_q; divergence requires crossing
    k_div with a consistent sign and increasing trend; convergence requires a
    Cauchy tail with limit above the decay threshold.  Anything else is
    Undetermined.
    """
    if not 0.0 < decay_q < 1.0:
        raise ValueError("decay_q must lie in (0, 1)")
    a0 = sol.ivp.a0
    scale0 = abs(a0) if a0 != 0.0 else max(np.abs(sol.a).max(), 1.0)
    r_tail, a_tail = _tail(sol)
    r_end = float(sol.r_max_used)

    if sol.diverged or np.abs(sol.a).max() >= k_div * scale0:
        last = sol.a[-min(6, len(sol.a)):]
        growing = np.all(np.diff(np.abs(last)) >= 0)
        sign_ok = np.all(np.sign(last) == np.sign(last[-1])) and last[-1] != 0
        slope = _loglog_slope(r_tail, a_tail)
        if growing and sign_ok:
            kind = (
                AsymptoticKind.DIVERGES_PLUS
                if last[-1] > 0
                else AsymptoticKind.DIVERGES_MINUS
            )
            return AsymptoticClass(kind, float(sol.a[-1]), slope, r_end)
        return AsymptoticClass(AsymptoticKind.UNDETERMINED, float(sol.a[-1]), slope, r_end)

    if np.abs(a_tail).max() == 0.0:
        return AsymptoticClass(AsymptoticKind.DECAYS_TO_ZERO, 0.0, float("nan"), r_end)

    limit = _limit_fit(r_tail, a_tail)
    slope = _loglog_slope(r_tail, a_tail)

    if abs(sol.a[-1]) < eps_dec * scale0 and slope <= -decay_q:
        return AsymptoticClass(AsymptoticKind.DECAYS_TO_ZERO, limit, slope, r_end)

    osc = a_tail.max() - a_tail.min()
    if abs(limit) > eps_dec * scale0 and osc <= cauchy_rtol * abs(limit):
        return AsymptoticClass(AsymptoticKind.CONVERGES_NONZERO, limit, slope, r_end)

    return AsymptoticClass(AsymptoticKind.UNDETERMINED, limit, slope, r_end)


def _limit_fit(r_tail, a_tail) -> float:
    """Quadratic-in-1/r extrapolation of the tail to infinity."""
    t = 1.0 / r_tail
    deg = 2 if len(r_tail) > 6 else 1
    return float(np.polyval(np.polyfit(t, a_tail, deg), 0.0))


def _loglog_slope(r_tail, a_tail) -> float:
    mag = np.abs(a_tail)
    good = mag > 0
    if good.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(r_tail[good]), np.log(mag[good]), 1)[0])


@dataclass(frozen=True)
class KernelVerdict:
    params: SchwarzschildParams
    ell: int
    klass: AsymptoticClass
    passed: bool
    flat_branch: bool

    @property
    def failure_kind(self) -> str | None:
        if self.passed:
            return None
        if self.klass.kind is AsymptoticKind.DECAYS_TO_ZERO:
            return "decaying-mode"
        return "undetermined"


def verify_kernel_trivial(
    params: SchwarzschildParams,
    ell: int,
    decay_q: float = 0.75,
    r_max_factor: float = 1e6,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    eps_dec: float = 1e-4,
    k_div: float = 1e3,
) -> KernelVerdict:
    """Certify that the unit-data mode of degree ell does not decay.

    A decaying class would be a linearized-kernel candidate; any other class
    certifies triviality for this mode.  Undetermined is reported as a
    failure to verify, not as a counterexample.
    """
    ivp = make_ivp(params, ell, a0=1.0)
    sol = integrate_mode(ivp, r_max_factor * params.r0, rtol=rtol, atol=atol, k_div=k_div)
    klass = classify(sol, decay_q=decay_q, eps_dec=eps_dec, k_div=k_div)
    passed = klass.kind not in (AsymptoticKind.DECAYS_TO_ZERO, AsymptoticKind.UNDETERMINED)
    return KernelVerdict(
        params=params, ell=ell, klass=klass, passed=passed, flat_branch=ivp.flat_branch
    )


@dataclass(frozen=True)
class PositivityReport:
    positive: bool
    increasing: bool
    first_violation: float | None
    immediately_positive: bool
    b_end: float
    db_end: float

    @property
    def monotone_positive(self) -> bool:
        return self.positive and self.increasing


def comparison_positivity(
    h, p, B0: float, dB0: float, r0: float, r_max: float,
    rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL, n_samples: int = 2000,
) -> PositivityReport:
    """Integrate (h B')' = p B and audit strict positivity of B and B'.

    h and p are callables, positive on [r0, r_max]; B(r0), B'(r0) >= 0 and
    not both zero.  The comparison statement says B and B' stay strictly
    positive for r > r0; the report records the first violation if the
    numerics ever disagree.
    """
    if B0 < 0 or dB0 < 0 or (B0 == 0 and dB0 == 0):
        raise ValueError("need B0 >= 0, dB0 >= 0, not both zero")

    def rhs(r, y):
        return [y[1] / h(r), p(r) * y[0]]

    sol = solve_ivp(
        rhs, (r0, r_max), [B0, h(r0) * dB0], method="DOP853",
        rtol=rtol, atol=atol, dense_output=True,
    )
    if not sol.success:
        raise RuntimeError(f"comparison integration failed: {sol.message}")

    r = np.linspace(r0, r_max, n_samples)[1:]
    y = sol.sol(r)
    B, dB = y[0], y[1] / h(r)
    bad = (B <= 0) | (dB <= 0)
    first = float(r[np.argmax(bad)]) if bad.any() else None
    delta = 1e-6 * r0
    yd = sol.sol(r0 + delta)
    return PositivityReport(
        positive=bool(np.all(B > 0)),
        increasing=bool(np.all(dB > 0)),
        first_violation=first,
        immediately_positive=bool(yd[0] > 0 and yd[1] / h(r0 + delta) > 0),
        b_end=float(B[-1]),
        db_end=float(dB[-1]),
    )
