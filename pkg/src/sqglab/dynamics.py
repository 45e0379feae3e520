"""Steady states, the quadratic nonlinearity, and time integration of the
forced critical SQG equation  d_t Theta + U.grad(Theta) + Lambda(Theta) = f.

The integrator is an integrating-factor RK4: the dissipation multiplier
exp(-|k| dt) is applied exactly, advection and force are explicit.  In
Perturbation mode the same stepper integrates d_t theta = L theta + N(theta)
about a stored steady state.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import BlowUpError, DomainError, ResolutionError
from .spectral import (
    GridSpec,
    SpectralField,
    derivative,
    from_values,
    inner_l2,
    lambda_pow,
    meshgrid,
    norm_hs,
    norm_l2,
    norm_linf,
    norm_linf_grad,
    to_coeffs,
    to_values,
    velocity_from_theta,
    velocity_values,
)

FULL = "full"
PERTURBATION = "perturbation"


@dataclass
class SteadyState:
    """Triple (theta0, q0, f) with q0 = (R2 theta0, -R1 theta0) and
    q0.grad(theta0) + Lambda(theta0) = f."""

    theta0: SpectralField
    q0: tuple[SpectralField, SpectralField]
    f: SpectralField

    @property
    def grid(self) -> GridSpec:
        return self.theta0.grid

    def residual_linf(self) -> float:
        """sup norm of q0.grad(theta0) + Lambda(theta0) - f."""
        g = self.grid
        adv = _advection_coeffs(self.theta0.coeffs, g)
        res = adv + lambda_pow(self.theta0, 1.0).coeffs - self.f.coeffs
        return float(np.max(np.abs(to_values(res, g.n))))


@dataclass
class StepperConfig:
    cfl: float = 0.4
    dt_max: float = 0.02
    velocity_floor: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.cfl <= 1.0:
            raise DomainError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.dt_max <= 0:
            raise DomainError("dt_max must be positive")


@dataclass
class EvolutionState:
    """Field being evolved: the full Theta, or the perturbation about steady."""

    theta: SpectralField
    t: float
    steady: SteadyState
    mode: str = FULL

    def __post_init__(self):
        if self.mode not in (FULL, PERTURBATION):
            raise DomainError(f"mode must be 'full' or 'perturbation', got {self.mode!r}")
        if self.t < 0:
            raise DomainError("time must be nonnegative")

    def full_theta(self) -> SpectralField:
        if self.mode == FULL:
            return self.theta
        return SpectralField(self.theta.grid, self.theta.coeffs + self.steady.theta0.coeffs)


def shear_steady_state(grid: GridSpec, m: int, amplitude: float) -> SteadyState:
    """theta0 = -amplitude cos(m x2): velocity (amplitude sin(m x2), 0),
    force f = -amplitude m cos(m x2)."""
    if not 1 <= m <= grid.dealias_radius:
        raise ResolutionError(f"shear wavenumber m={m} outside resolved range")
    _, x2 = meshgrid(grid)
    return make_steady(from_values(grid, -amplitude * np.cos(m * x2)))


def make_steady(theta0: SpectralField) -> SteadyState:
    """Compute the forcing that makes theta0 a steady state."""
    if not theta0.mean_free:
        raise DomainError("steady state temperature must be mean-free")
    g = theta0.grid
    c = np.abs(theta0.coeffs)
    total = np.sum(c**2)
    margin = (np.abs(g.k1) > g.dealias_radius - 2) | (np.abs(g.k2) > g.dealias_radius - 2)
    if total > 0 and np.sum(c[margin] ** 2) > 1e-26 * total:
        raise ResolutionError(
            "steady state carries energy at the dealias boundary; increase n"
        )
    adv = _advection_coeffs(theta0.coeffs, g)
    f = SpectralField(g, adv + lambda_pow(theta0, 1.0).coeffs)
    q0 = velocity_from_theta(theta0)
    return SteadyState(theta0=theta0.copy(), q0=q0, f=f)


def nonlinear_term(theta: SpectralField) -> SpectralField:
    """N(theta) = -q.grad(theta) with q = (R2 theta, -R1 theta), dealiased."""
    if not theta.mean_free:
        raise DomainError("nonlinear term requires a mean-free field")
    g = theta.grid
    return SpectralField(g, -_advection_coeffs(theta.coeffs, g))


def _advection_coeffs(c_theta: np.ndarray, g: GridSpec) -> np.ndarray:
    """Coefficients of q.grad(theta) for the self-induced velocity."""
    u1, u2 = velocity_values(c_theta, g)
    d1 = to_values(c_theta * (1j * g.k1) * g.nyquist_mask, g.n)
    d2 = to_values(c_theta * (1j * g.k2) * g.nyquist_mask, g.n)
    out = to_coeffs(u1 * d1 + u2 * d2, g.n)
    out *= g.dealias_mask
    out[0, 0] = 0.0
    return out


class _Workspace:
    """Cached per-(steady, mode) arrays for the explicit part of the RHS."""

    def __init__(self, steady: SteadyState, mode: str):
        g = steady.grid
        self.grid = g
        self.mode = mode
        self.f = steady.f.coeffs
        self.q0_1 = to_values(steady.q0[0].coeffs, g.n).real
        self.q0_2 = to_values(steady.q0[1].coeffs, g.n).real
        self.dtheta0_1 = to_values(derivative(steady.theta0, 1).coeffs, g.n).real
        self.dtheta0_2 = to_values(derivative(steady.theta0, 2).coeffs, g.n).real
        self._decay_cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def explicit_rhs(self, c: np.ndarray) -> np.ndarray:
        """Everything except the dissipation: advection terms (+ force in full mode)."""
        g = self.grid
        u1, u2 = velocity_values(c, g)
        d1 = to_values(c * (1j * g.k1) * g.nyquist_mask, g.n)
        d2 = to_values(c * (1j * g.k2) * g.nyquist_mask, g.n)
        if self.mode == FULL:
            prod = u1 * d1 + u2 * d2
            out = -to_coeffs(prod, g.n)
            out *= g.dealias_mask
            out[0, 0] = 0.0
            out += self.f
            return out
        # perturbation: -(q0 + q).grad(theta) - q.grad(theta0)
        prod = (self.q0_1 + u1) * d1 + (self.q0_2 + u2) * d2
        prod += u1 * self.dtheta0_1 + u2 * self.dtheta0_2
        out = -to_coeffs(prod, g.n)
        out *= g.dealias_mask
        out[0, 0] = 0.0
        return out

    def decay_factors(self, dt: float):
        """(exp(-|k| dt/2), exp(-|k| dt)) for the integrating factor."""
        got = self._decay_cache.get(dt)
        if got is None:
            half = np.exp(-self.grid.kmag * (0.5 * dt))
            got = (half, half * half)
            if len(self._decay_cache) > 8:
                self._decay_cache.clear()
            self._decay_cache[dt] = got
        return got

    def advecting_velocity_linf(self, c: np.ndarray) -> float:
        u1, u2 = velocity_values(c, self.grid)
        if self.mode == PERTURBATION:
            u1 = u1 + self.q0_1
            u2 = u2 + self.q0_2
        return float(np.max(np.hypot(np.abs(u1), np.abs(u2))))


def rhs(state: EvolutionState) -> SpectralField:
    """Time derivative of the state (dissipation included)."""
    ws = _Workspace(state.steady, state.mode)
    g = state.theta.grid
    out = ws.explicit_rhs(state.theta.coeffs) - g.kmag * state.theta.coeffs
    return SpectralField(g, out)


def cfl_dt(state: EvolutionState, config: StepperConfig) -> float:
    """min(dt_max, cfl * dx / ||U||_inf) with a small floor on the velocity."""
    ws = _Workspace(state.steady, state.mode)
    return _cfl_dt_ws(ws, state.theta.coeffs, config)


def _cfl_dt_ws(ws: _Workspace, c: np.ndarray, config: StepperConfig) -> float:
    umax = max(ws.advecting_velocity_linf(c), config.velocity_floor)
    return min(config.dt_max, config.cfl * ws.grid.dx / umax)


def _if_rk4_step(ws: _Workspace, c: np.ndarray, dt: float) -> np.ndarray:
    """One integrating-factor RK4 step; exact exp(-|k| dt) on the dissipation."""
    e1, e2 = ws.decay_factors(dt)
    k1 = ws.explicit_rhs(c)
    k2 = ws.explicit_rhs(e1 * (c + (0.5 * dt) * k1))
    k3 = ws.explicit_rhs(e1 * c + (0.5 * dt) * k2)
    k4 = ws.explicit_rhs(e2 * c + dt * (e1 * k3))
    out = e2 * c + (dt / 6.0) * (e2 * k1 + 2.0 * e1 * (k2 + k3) + k4)
    out[0, 0] = 0.0
    return out


def step(state: EvolutionState, dt: float, config: StepperConfig | None = None) -> EvolutionState:
    """Advance by one step of size dt (dt must respect the CFL bound)."""
    config = config or StepperConfig()
    ws = _Workspace(state.steady, state.mode)
    allowed = _cfl_dt_ws(ws, state.theta.coeffs, config)
    if dt > allowed * (1 + 1e-9):
        raise DomainError(f"dt={dt:.3e} exceeds CFL/dt_max bound {allowed:.3e}")
    c = _if_rk4_step(ws, state.theta.coeffs, dt)
    return replace(state, theta=SpectralField(state.theta.grid, c), t=state.t + dt)


def observed_norms(state: EvolutionState) -> dict[str, float]:
    theta = state.theta
    hhalf = norm_hs(theta, 0.5)
    if state.mode == FULL:
        # d/dt ||Theta||_{L2}^2 = 2 (f, Theta) - 2 ||Lambda^{1/2} Theta||^2
        flux = 2.0 * inner_l2(state.steady.f, theta) - 2.0 * hhalf**2
    else:
        flux = float("nan")  # energy ledger is kept for the full equation only
    return {
        "t": state.t,
        "l2": norm_l2(theta),
        "linf": norm_linf(theta),
        "linf_grad": norm_linf_grad(theta),
        "hhalf": hhalf,
        "energy_flux": flux,
    }


@dataclass
class EvolveResult:
    state: EvolutionState
    records: list[dict]
    blow_up: bool = False


def evolve(
    state: EvolutionState,
    t_final: float,
    config: StepperConfig | None = None,
    observer=None,
    observe_every: float = 0.05,
    grad_guard_factor: float = 1e3,
) -> EvolveResult:
    """Integrate to t_final, calling observer(t, norms) at the given cadence.

    Raises BlowUpError on non-finite coefficients or when the full-field
    gradient exceeds grad_guard_factor times its initial value.
    """
    config = config or StepperConfig()
    ws = _Workspace(state.steady, state.mode)
    c = state.theta.coeffs.copy()
    t = state.t
    grid = state.theta.grid
    if not np.all(np.isfinite(c)):
        raise BlowUpError(f"non-finite coefficients at t={t:.6f}", t=t)

    def monitor_state(cc, tt):
        return EvolutionState(SpectralField(grid, cc), tt, state.steady, state.mode)

    guard = grad_guard_factor * max(
        norm_linf_grad(monitor_state(c, t).full_theta()), 1.0
    )
    records: list[dict] = []

    def observe(cc, tt):
        st = monitor_state(cc, tt)
        norms = observed_norms(st)
        grad_full = norm_linf_grad(st.full_theta())
        norms["linf_grad_full"] = grad_full
        norms["linf_full"] = norm_linf(st.full_theta())
        if grad_full > guard:
            raise BlowUpError(
                f"gradient guard tripped at t={tt:.6f}", t=tt, diagnostics=norms
            )
        records.append(norms)
        if observer is not None:
            observer(tt, norms)

    observe(c, t)
    next_obs = t + observe_every
    while t < t_final - 1e-14:
        dt = _cfl_dt_ws(ws, c, config)
        # land exactly on the next observation time and on t_final
        dt = min(dt, next_obs - t, t_final - t)
        c = _if_rk4_step(ws, c, dt)
        t += dt
        if not np.all(np.isfinite(c)):
            raise BlowUpError(f"non-finite coefficients at t={t:.6f}", t=t)
        if t >= next_obs - 1e-12 or t >= t_final - 1e-14:
            observe(c, t)
            next_obs = t + observe_every
    return EvolveResult(state=monitor_state(c, t), records=records)
