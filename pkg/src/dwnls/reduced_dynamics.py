"""The two-mode Hamiltonian reduction in three coordinate charts.

Modes chart (rho0, rho1), unit coefficients and g = -1:

    i rho0' = Omega0 rho0 - (|rho0|^2 rho0 + 2 |rho1|^2 rho0 + rho1^2 conj(rho0))
    i rho1' = Omega1 rho1 - (|rho1|^2 rho1 + 2 |rho0|^2 rho1 + rho0^2 conj(rho1))

with invariants N = |rho0|^2 + |rho1|^2 and

    H = Omega0 |rho0|^2 + Omega1 |rho1|^2 - |rho0|^4 / 2 - |rho1|^4 / 2
        - 2 |rho0|^2 |rho1|^2 - Re(rho1^2 conj(rho0)^2).

Cartesian chart rho0 = A e^{i theta}, rho1 = (alpha + i beta) e^{i theta}:

    alpha' = (Omega10 + 2 alpha^2) beta
    beta'  = -(Omega10 - 2 A^2 + 2 alpha^2) alpha
    A'     = -2 alpha beta A
    theta' = -Omega0 + A^2 + 3 alpha^2 + beta^2

Polar chart rho_j = r_j e^{i theta_j}, dtheta = theta1 - theta0 (written as
the exact push-forward of the modes system):

    r0'     = -r1^2 r0 sin(2 dtheta)
    r1'     = +r0^2 r1 sin(2 dtheta)
    dtheta' = -Omega10 + (r0^2 - r1^2)(1 + cos(2 dtheta))

General overlap tensors are supported in the modes chart only; the closed
chart forms above assume unit coefficients (a_ijkl = 1 on even channels).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ChartBreakdown, NoCrossing, StepFailure

MODES = "modes"
CARTESIAN = "cartesian"
POLAR = "polar"
_CHARTS = (MODES, CARTESIAN, POLAR)

_A_FLOOR = 1e-8


@dataclass(frozen=True)
class ModeAmplitudes:
    rho0: complex
    rho1: complex


@dataclass(frozen=True)
class CartesianChart:
    A: float
    alpha: float
    beta: float
    theta: float = 0.0


@dataclass(frozen=True)
class PolarChart:
    r0: float
    r1: float
    dtheta: float
    theta0: float = 0.0   # base phase, kept so conversions are bijective


@dataclass
class ReducedParams:
    """Frequencies, nonlinearity sign, and optional measured overlap tensor."""

    omega0: float
    omega1: float
    g: float = -1.0
    a: Optional[np.ndarray] = None   # None => unit coefficients

    def __post_init__(self):
        if self.omega10 <= 0:
            raise ValueError("requires omega1 > omega0")

    @property
    def omega10(self) -> float:
        return self.omega1 - self.omega0

    @property
    def coefficient_mode(self) -> str:
        return "unit" if self.a is None else "tensor"

    @property
    def n_cr_fd(self) -> float:
        if self.a is None:
            return self.omega10 / (2.0 * abs(self.g))
        denom = self.g * (self.a[0, 0, 0, 0] - 3.0 * self.a[0, 0, 1, 1])
        return self.omega10 / denom

    @classmethod
    def from_ncr(cls, n_cr: float, omega0: float = -1.0, g: float = -1.0):
        if n_cr <= 0:
            raise ValueError("n_cr must be positive")
        return cls(omega0=omega0, omega1=omega0 + 2.0 * abs(g) * n_cr, g=g)

    @classmethod
    def from_spectral(cls, spectral) -> "ReducedParams":
        return cls(
            omega0=spectral.omega0,
            omega1=spectral.omega1,
            g=spectral.g,
            a=spectral.a,
        )


def _require_unit(params: ReducedParams, chart: str) -> None:
    if params.a is not None or params.g != -1.0:
        raise ValueError(
            f"the {chart} chart implements the unit-coefficient reduction "
            "(g = -1); integrate tensor-mode systems in the modes chart"
        )


# ----------------------------------------------------------------------
# vector fields
# ----------------------------------------------------------------------

def vf_modes(state: ModeAmplitudes, params: ReducedParams):
    """(rho0', rho1') of the reduction; tensor coefficients if configured."""
    r0, r1 = state.rho0, state.rho1
    g = params.g
    if params.a is None:
        cubic0 = g * (abs(r0) ** 2 * r0 + r1 * r1 * r0.conjugate()
                      + 2.0 * abs(r1) ** 2 * r0)
        cubic1 = g * (abs(r1) ** 2 * r1 + r0 * r0 * r1.conjugate()
                      + 2.0 * abs(r0) ** 2 * r1)
    else:
        a = params.a
        p0 = abs(r0) ** 2 * r0
        p1 = abs(r1) ** 2 * r1
        m01 = r1 * r1 * r0.conjugate() + 2.0 * abs(r1) ** 2 * r0
        m10 = r0 * r0 * r1.conjugate() + 2.0 * abs(r0) ** 2 * r1
        cubic0 = g * (a[0, 0, 0, 0] * p0 + a[0, 0, 1, 1] * m01
                      + a[0, 0, 0, 1] * m10 + a[0, 1, 1, 1] * p1)
        cubic1 = g * (a[1, 1, 1, 1] * p1 + a[0, 0, 1, 1] * m10
                      + a[0, 1, 1, 1] * m01 + a[0, 0, 0, 1] * p0)
    d0 = -1j * (params.omega0 * r0 + cubic0)
    d1 = -1j * (params.omega1 * r1 + cubic1)
    return d0, d1


def vf_cartesian(state: CartesianChart, params: ReducedParams):
    """(A', alpha', beta', theta'); requires A > 0 (unit coefficients)."""
    _require_unit(params, CARTESIAN)
    if state.A <= _A_FLOOR:
        raise ChartBreakdown(f"cartesian chart needs A > {_A_FLOOR}")
    a, al, be = state.A, state.alpha, state.beta
    om10 = params.omega10
    d_alpha = (om10 + 2.0 * al * al) * be
    d_beta = -(om10 - 2.0 * a * a + 2.0 * al * al) * al
    d_a = -2.0 * al * be * a
    d_theta = -params.omega0 + a * a + 3.0 * al * al + be * be
    return d_a, d_alpha, d_beta, d_theta


def vf_polar(state: PolarChart, params: ReducedParams):
    """(r0', r1', dtheta', theta0') in the three-field polar chart."""
    _require_unit(params, POLAR)
    r0, r1, dth = state.r0, state.r1, state.dtheta
    s2 = math.sin(2.0 * dth)
    c2 = math.cos(2.0 * dth)
    d_r0 = -r1 * r1 * r0 * s2
    d_r1 = r0 * r0 * r1 * s2
    d_dth = -params.omega10 + (r0 * r0 - r1 * r1) * (1.0 + c2)
    d_th0 = -params.omega0 + r0 * r0 + 2.0 * r1 * r1 + r1 * r1 * c2
    return d_r0, d_r1, d_dth, d_th0


def vf_polar_reduced(eps1: float, dtheta: float, n: float, n_cr: float):
    """(eps1', dtheta') of the two-field perturbation form with power offset n."""
    s2 = math.sin(2.0 * dtheta)
    c2 = math.cos(2.0 * dtheta)
    d_eps1 = eps1 * (n_cr + n - eps1 * eps1) * s2
    d_dth = -2.0 * n_cr + (n_cr + n - 2.0 * eps1 * eps1) * (1.0 + c2)
    return d_eps1, d_dth


def eps0_from_conservation(eps1: float, n: float, n_cr: float) -> float:
    """Recover eps0 = r0 - sqrt(n_cr) from n = eps0^2 + eps1^2 + 2 sqrt(n_cr) eps0,
    taking the root nearest zero."""
    disc = n_cr + n - eps1 * eps1
    if disc < 0:
        raise ChartBreakdown("n - eps1^2 below -n_cr: no real eps0")
    return math.sqrt(disc) - math.sqrt(n_cr)


# ----------------------------------------------------------------------
# invariants and chart conversions
# ----------------------------------------------------------------------

def invariants(state, params: ReducedParams):
    """(N, H) for a state in any chart."""
    if isinstance(state, CartesianChart) and params.a is None and params.g == -1.0:
        a, al, be = state.A, state.alpha, state.beta
        p = al * al + be * be
        n = a * a + p
        h = (params.omega0 * a * a + params.omega1 * p
             - 0.5 * a**4 - 0.5 * p * p - 2.0 * a * a * p
             - a * a * (al * al - be * be))
        return n, h
    m = convert(state, MODES)
    r0, r1 = m.rho0, m.rho1
    n = abs(r0) ** 2 + abs(r1) ** 2
    g = params.g
    if params.a is None:
        h = (params.omega0 * abs(r0) ** 2 + params.omega1 * abs(r1) ** 2
             + 0.5 * g * (abs(r0) ** 4 + abs(r1) ** 4
                          + 4.0 * abs(r0) ** 2 * abs(r1) ** 2
                          + 2.0 * (r1 * r1 * (r0.conjugate() ** 2)).real))
    else:
        a = params.a
        cross = (r0 * r0 * (r1.conjugate() ** 2)).real
        mixed = (r0 * r1.conjugate()).real
        h = (params.omega0 * abs(r0) ** 2 + params.omega1 * abs(r1) ** 2
             + 0.5 * g * (a[0, 0, 0, 0] * abs(r0) ** 4
                          + a[1, 1, 1, 1] * abs(r1) ** 4
                          + 4.0 * a[0, 0, 1, 1] * abs(r0) ** 2 * abs(r1) ** 2
                          + 2.0 * a[0, 0, 1, 1] * cross
                          + 4.0 * a[0, 0, 0, 1] * abs(r0) ** 2 * mixed
                          + 4.0 * a[0, 1, 1, 1] * abs(r1) ** 2 * mixed))
    return n, h


def convert(state, to_chart: str):
    """Convert a chart state to another chart (round trips are identity)."""
    if to_chart not in _CHARTS:
        raise ValueError(f"unknown chart {to_chart!r}")
    if isinstance(state, ModeAmplitudes):
        m = state
    elif isinstance(state, CartesianChart):
        if state.A <= 0:
            raise ChartBreakdown("cartesian chart requires A > 0")
        ph = complex(math.cos(state.theta), math.sin(state.theta))
        m = ModeAmplitudes(state.A * ph, complex(state.alpha, state.beta) * ph)
    elif isinstance(state, PolarChart):
        if state.r0 < 0 or state.r1 < 0:
            raise ChartBreakdown("polar moduli must be nonnegative")
        ph0 = complex(math.cos(state.theta0), math.sin(state.theta0))
        th1 = state.theta0 + state.dtheta
        ph1 = complex(math.cos(th1), math.sin(th1))
        m = ModeAmplitudes(state.r0 * ph0, state.r1 * ph1)
    else:
        raise TypeError(f"not a chart state: {type(state)!r}")

    if to_chart == MODES:
        return m
    if to_chart == CARTESIAN:
        a = abs(m.rho0)
        if a <= _A_FLOOR:
            raise ChartBreakdown(f"cartesian chart needs |rho0| > {_A_FLOOR}")
        theta = math.atan2(m.rho0.imag, m.rho0.real)
        c1 = m.rho1 * complex(math.cos(-theta), math.sin(-theta))
        return CartesianChart(A=a, alpha=c1.real, beta=c1.imag, theta=theta)
    r0, r1 = abs(m.rho0), abs(m.rho1)
    th0 = math.atan2(m.rho0.imag, m.rho0.real) if r0 > 0 else 0.0
    th1 = math.atan2(m.rho1.imag, m.rho1.real) if r1 > 0 else th0
    d = th1 - th0
    # principal relative phase in (-pi, pi]
    d = math.atan2(math.sin(d), math.cos(d))
    return PolarChart(r0=r0, r1=r1, dtheta=d, theta0=th0)


# packed real-vector views used by the integrators ----------------------

def pack(state) -> np.ndarray:
    if isinstance(state, ModeAmplitudes):
        return np.array([state.rho0.real, state.rho0.imag,
                         state.rho1.real, state.rho1.imag])
    if isinstance(state, CartesianChart):
        return np.array([state.A, state.alpha, state.beta, state.theta])
    if isinstance(state, PolarChart):
        return np.array([state.r0, state.r1, state.dtheta, state.theta0])
    raise TypeError(f"not a chart state: {type(state)!r}")


def unpack(chart: str, y) -> object:
    if chart == MODES:
        return ModeAmplitudes(complex(y[0], y[1]), complex(y[2], y[3]))
    if chart == CARTESIAN:
        return CartesianChart(A=float(y[0]), alpha=float(y[1]),
                              beta=float(y[2]), theta=float(y[3]))
    if chart == POLAR:
        return PolarChart(r0=float(y[0]), r1=float(y[1]),
                          dtheta=float(y[2]), theta0=float(y[3]))
    raise ValueError(f"unknown chart {chart!r}")


def vf_packed(chart: str, y, params: ReducedParams) -> np.ndarray:
    if chart == MODES:
        d0, d1 = vf_modes(ModeAmplitudes(complex(y[0], y[1]),
                                         complex(y[2], y[3])), params)
        return np.array([d0.real, d0.imag, d1.real, d1.imag])
    if chart == CARTESIAN:
        da, dal, dbe, dth = vf_cartesian(
            CartesianChart(float(y[0]), float(y[1]), float(y[2]), float(y[3])),
            params)
        return np.array([da, dal, dbe, dth])
    dr0, dr1, ddth, dth0 = vf_polar(
        PolarChart(float(y[0]), float(y[1]), float(y[2]), float(y[3])), params)
    return np.array([dr0, dr1, ddth, dth0])


# ----------------------------------------------------------------------
# integration
# ----------------------------------------------------------------------

@dataclass
class Trajectory:
    chart: str
    times: np.ndarray
    states: np.ndarray            # (m, 4) packed chart coordinates
    n_series: np.ndarray
    h_series: np.ndarray
    params: ReducedParams = field(repr=False)

    def state(self, i: int):
        return unpack(self.chart, self.states[i])

    def cartesian_series(self):
        """(A, alpha, beta, theta) arrays regardless of the native chart."""
        y = self.states
        if self.chart == CARTESIAN:
            return y[:, 0], y[:, 1], y[:, 2], y[:, 3]
        if self.chart == MODES:
            rho0 = y[:, 0] + 1j * y[:, 1]
            rho1 = y[:, 2] + 1j * y[:, 3]
        else:
            rho0 = y[:, 0] * np.exp(1j * y[:, 3])
            rho1 = y[:, 1] * np.exp(1j * (y[:, 3] + y[:, 2]))
        a = np.abs(rho0)
        if np.any(a <= _A_FLOOR):
            raise ChartBreakdown("trajectory passes through |rho0| ~ 0")
        theta = np.unwrap(np.angle(rho0))
        c1 = rho1 * np.exp(-1j * theta)
        return a, c1.real, c1.imag, theta

    def to_csv(self) -> str:
        headers = {
            MODES: ["t", "re_rho0", "im_rho0", "re_rho1", "im_rho1", "N", "H"],
            CARTESIAN: ["t", "A", "alpha", "beta", "theta", "N", "H"],
            POLAR: ["t", "r0", "r1", "dtheta", "theta0", "N", "H"],
        }[self.chart]
        rows = [",".join(headers)]
        for i, t in enumerate(self.times):
            vals = [t, *self.states[i], self.n_series[i], self.h_series[i]]
            rows.append(",".join(format(float(v), ".17g") for v in vals))
        return "\n".join(rows) + "\n"


def _implicit_midpoint_path(chart, y0, params, t_span, dt, record_every):
    t0, t1 = t_span
    n_steps = int(round((t1 - t0) / dt))
    if n_steps < 1:
        raise ValueError("t_span shorter than one step")
    times = [t0]
    states = [y0.copy()]
    y = y0.copy()
    t = t0
    for k in range(n_steps):
        # tolerance tracks the current state: winding phase coordinates
        # grow secularly and would otherwise sink below the roundoff floor
        scale = max(1.0, float(np.max(np.abs(y))))
        z = y + dt * vf_packed(chart, y, params)
        converged = False
        for _ in range(50):
            z_new = y + dt * vf_packed(chart, 0.5 * (y + z), params)
            if np.max(np.abs(z_new - z)) <= 1e-13 * scale:
                z = z_new
                converged = True
                break
            z = z_new
        if not converged:
            raise StepFailure(f"implicit midpoint stalled at t = {t:.6g}")
        y = z
        t = t0 + (k + 1) * dt
        if (k + 1) % record_every == 0 or k == n_steps - 1:
            times.append(t)
            states.append(y.copy())
    return np.array(times), np.array(states)


def integrate(state0, params: ReducedParams, t_span, dt,
              method: str = "implicit_midpoint", record_every: int = 1,
              rtol: float = 1e-10, atol: float = 1e-12) -> Trajectory:
    """Integrate the reduction in the chart of state0.

    'implicit_midpoint' is the symplectic default; 'adaptive_rk' wraps a
    Dormand-Prince 4(5) pair sampled on the dt grid.  A cartesian-chart
    breakdown (A ~ 0) is retried once in the modes chart.
    """
    chart = {ModeAmplitudes: MODES, CartesianChart: CARTESIAN,
             PolarChart: POLAR}[type(state0)]
    y0 = pack(state0)
    try:
        if method == "implicit_midpoint":
            times, states = _implicit_midpoint_path(
                chart, y0, params, t_span, dt, record_every)
        elif method == "adaptive_rk":
            t_eval = np.arange(t_span[0], t_span[1] + 0.5 * dt * record_every,
                               dt * record_every)
            sol = solve_ivp(
                lambda t, y: vf_packed(chart, y, params),
                t_span, y0, method="RK45", rtol=rtol, atol=atol, t_eval=t_eval,
                dense_output=False)
            if not sol.success:
                raise StepFailure(sol.message)
            times, states = sol.t, sol.y.T
        else:
            raise ValueError(f"unknown method {method!r}")
    except ChartBreakdown:
        if chart == MODES:
            raise
        return integrate(convert(state0, MODES), params, t_span, dt,
                         method=method, record_every=record_every,
                         rtol=rtol, atol=atol)
    n_series = np.empty(len(times))
    h_series = np.empty(len(times))
    for i, y in enumerate(states):
        n_series[i], h_series[i] = invariants(unpack(chart, y), params)
    return Trajectory(chart=chart, times=times, states=states,
                      n_series=n_series, h_series=h_series, params=params)


@dataclass(frozen=True)
class PeriodEstimate:
    period: float
    uncertainty: float
    crossings: np.ndarray


def detect_period(traj: Trajectory) -> PeriodEstimate:
    """Oscillation period from Poincare-section crossings.

    Cartesian/modes trajectories use the section beta = 0 with beta
    decreasing; polar trajectories use dtheta = 0 (mod 2 pi) increasing.
    Crossing times come from linear interpolation; the uncertainty is the
    sample standard deviation of the crossing-to-crossing intervals.
    """
    t = traj.times
    if traj.chart == POLAR:
        s = np.sin(traj.states[:, 2])
        ok = np.cos(traj.states[:, 2]) > 0.0
        sign_from, sign_to = -1, 1
    else:
        _, _, s, _ = traj.cartesian_series()
        ok = np.ones(len(s), dtype=bool)
        sign_from, sign_to = 1, -1
    crossings = []
    for i in range(len(s) - 1):
        if not (ok[i] and ok[i + 1]):
            continue
        if not (s[i] * sign_from > 0.0 and s[i + 1] * sign_from < 0.0):
            continue
        slope = (s[i + 1] - s[i]) / (t[i + 1] - t[i])
        if abs(slope) <= 1e-12:
            continue              # tangency tie-break
        crossings.append(t[i] - s[i] / slope)
    if len(crossings) < 2:
        raise NoCrossing("fewer than two same-direction section crossings")
    crossings = np.array(crossings)
    gaps = np.diff(crossings)
    period = float(np.mean(gaps))
    unc = float(np.std(gaps, ddof=1)) if len(gaps) > 1 else float("nan")
    return PeriodEstimate(period=period, uncertainty=unc, crossings=crossings)
