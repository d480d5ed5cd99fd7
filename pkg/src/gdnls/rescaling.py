"""Dynamic rescaling: evolve the zoomed frame together with its scale factors.

The rescaled field ``u(xi, tau)`` obeys

    u_tau = i u_xixi - a(tau) (u/(2 sigma) + xi u_xi) + b(tau) u_xi
            - |u|^{2 sigma} u_xi

where ``a = -d ln L / d tau`` pins the gradient norm of ``u`` and ``b`` tracks
the drift of the collapse point. Physical time satisfies ``dt = L^2 dtau``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import etdrk4
from .direct import INITIAL_FAMILIES, InvariantTriple, compute_invariants
from .errors import (BlowupDetected, DegenerateField, InvalidParameter,
                     StepTooLarge)
from .spectral import (ComplexField, Grid, derivative_symbol, fft, ifft,
                       lp_norm, quadrature)


@dataclass
class RescalingState:
    """Snapshot of the rescaled system: field, functionals, scales, clocks.

    ``a`` and ``b`` always hold the functional values evaluated at this
    state's ``u``; a step uses them frozen, then refreshes on the new field.
    """

    u: ComplexField
    a: float
    b: float
    L: float
    x0: float
    tau: float
    t: float
    sigma: float
    p_a: int
    p_b: int
    initial_grad_norm: float

    def __post_init__(self):
        if self.L <= 0:
            raise InvalidParameter(f"scale L must stay positive, got {self.L}")


def norm_exponent_factor(sigma: float, p: int) -> float:
    """The prefactor q = (1 + (1/sigma - 1/p)/2)^{-1} of the pinned norm."""
    return 1.0 / (1.0 + 0.5 * (1.0 / sigma - 1.0 / p))


def _power_density(values: np.ndarray, sigma: float) -> np.ndarray:
    return (values.real**2 + values.imag**2) ** sigma


def rescaled_rhs(u: ComplexField, a: float, b: float, sigma: float) -> ComplexField:
    """Full right-hand side of the rescaled evolution (linear part included)."""
    grid = u.grid
    u_hat = fft(u.values)
    u_xi = ifft(derivative_symbol(grid, 1) * u_hat)
    u_xixi = ifft(derivative_symbol(grid, 2) * u_hat)
    out = (1j * u_xixi
           - a * (u.values / (2.0 * sigma) + grid.x * u_xi)
           + b * u_xi
           - _power_density(u.values, sigma) * u_xi)
    return ComplexField(grid, out, u.frame_time)


def _contraction_rate_core(grid: Grid, values: np.ndarray, u_xi: np.ndarray,
                           inner: np.ndarray, sigma: float, p: int,
                           initial_norm: float) -> float:
    w = np.conj(u_xi) ** p * u_xi ** (p - 1)
    w_xi = ifft(derivative_symbol(grid, 1) * fft(w))
    integral = quadrature(np.real(w_xi * inner), grid)
    q = norm_exponent_factor(sigma, p)
    return -q * initial_norm ** (-2 * p) * integral


def _drift_rate_core(grid: Grid, values: np.ndarray, u_xixi: np.ndarray,
                     inner: np.ndarray, p: int) -> float:
    weight = np.abs(u_xixi) ** (2 * p)
    denominator = quadrature(weight, grid)
    if denominator <= 0 or not np.isfinite(denominator):
        raise DegenerateField("second-derivative norm vanishes; b undefined")
    w = grid.x * np.abs(u_xixi) ** (2 * p - 2) * np.conj(u_xixi)
    w_xixi = ifft(derivative_symbol(grid, 2) * fft(w))
    numerator = 2 * p * quadrature(np.real(w_xixi * inner), grid)
    return numerator / denominator


def _derivatives_and_inner(u: ComplexField, sigma: float):
    grid = u.grid
    u_hat = fft(u.values)
    u_xi = ifft(derivative_symbol(grid, 1) * u_hat)
    u_xixi = ifft(derivative_symbol(grid, 2) * u_hat)
    inner = 1j * u_xixi - _power_density(u.values, sigma) * u_xi
    return u_xi, u_xixi, inner


def compute_contraction_rate(u: ComplexField, sigma: float, p: int,
                             initial_norm: float) -> float:
    """Rate ``a`` that keeps the ``L^{2p}`` norm of ``u_xi`` constant."""
    if initial_norm <= 0:
        raise InvalidParameter("initial gradient norm must be positive")
    u_xi, _, inner = _derivatives_and_inner(u, sigma)
    return _contraction_rate_core(u.grid, u.values, u_xi, inner, sigma, p,
                                  initial_norm)


def compute_drift_rate(u: ComplexField, sigma: float, p: int) -> float:
    """Drift ``b`` that holds the collapse point at the grid center."""
    _, u_xixi, inner = _derivatives_and_inner(u, sigma)
    return _drift_rate_core(u.grid, u.values, u_xixi, inner, p)


def functional_rates(u: ComplexField, sigma: float, p_a: int, p_b: int,
                     initial_norm: float) -> tuple[float, float]:
    """Both functionals from one set of spectral derivatives."""
    u_xi, u_xixi, inner = _derivatives_and_inner(u, sigma)
    a = _contraction_rate_core(u.grid, u.values, u_xi, inner, sigma, p_a,
                               initial_norm)
    b = _drift_rate_core(u.grid, u.values, u_xixi, inner, p_b)
    return a, b


def advective_bound(u: ComplexField, a: float, b: float, sigma: float) -> float:
    """Max of ``|a xi - b + |u|^{2 sigma}|`` — the transport speed on the grid."""
    speed = a * u.grid.x - b + _power_density(u.values, sigma)
    return float(np.max(np.abs(speed)))


def cfl_limit(state: RescalingState, cfl_number: float) -> float:
    """Largest admissible step for the frozen-coefficient transport terms."""
    bound = advective_bound(state.u, state.a, state.b, state.sigma)
    if bound == 0.0:
        return np.inf
    return cfl_number * state.u.grid.spacing / bound


class RescaledStepper:
    """Reusable stepping kernel: cached symbols and ETDRK4 weights for one h."""

    def __init__(self, grid: Grid, sigma: float, h_tau: float,
                 cfl_number: float = 0.5):
        self.grid = grid
        self.sigma = sigma
        self.cfl_number = cfl_number
        self.sym1 = derivative_symbol(grid, 1)
        self.xi = grid.x
        self.set_step(h_tau)

    def set_step(self, h_tau: float) -> None:
        self.h_tau = h_tau
        self.coeffs = etdrk4.compute_coefficients(
            -1j * self.grid.wavenumbers**2, h_tau)

    def _nonlinearity(self, a: float, b: float):
        sigma = self.sigma
        xi = self.xi
        sym1 = self.sym1

        def rhs(v_hat: np.ndarray, t: float) -> np.ndarray:
            v = ifft(v_hat)
            v_xi = ifft(sym1 * v_hat)
            return fft(-a * (v / (2.0 * sigma) + xi * v_xi) + b * v_xi
                       - _power_density(v, sigma) * v_xi)

        return rhs

    def advance(self, state: RescalingState) -> RescalingState:
        """One step with the state's own (a, b) frozen; refresh them after."""
        h = self.h_tau
        admissible = cfl_limit(state, self.cfl_number)
        if h > admissible:
            raise StepTooLarge(h, admissible)
        new_u = etdrk4.step(state.u, self._nonlinearity(state.a, state.b),
                            self.coeffs)
        new_L = state.L * float(np.exp(-state.a * h))
        new_t = state.t + 0.5 * h * (state.L**2 + new_L**2)
        new_x0 = state.x0 + state.b * state.L * h
        a_new, b_new = functional_rates(new_u, state.sigma, state.p_a,
                                        state.p_b, state.initial_grad_norm)
        return RescalingState(u=new_u, a=a_new, b=b_new, L=new_L, x0=new_x0,
                              tau=state.tau + h, t=new_t, sigma=state.sigma,
                              p_a=state.p_a, p_b=state.p_b,
                              initial_grad_norm=state.initial_grad_norm)


def step_rescaled(state: RescalingState, h_tau: float,
                  cfl_number: float = 0.5,
                  stepper: RescaledStepper | None = None) -> RescalingState:
    """Single-step contract entry point; runs build a stepper once instead."""
    if stepper is None or stepper.h_tau != h_tau:
        stepper = RescaledStepper(state.u.grid, state.sigma, h_tau, cfl_number)
    stepper.cfl_number = cfl_number
    return stepper.advance(state)


def initial_rescaled_state(family: str, amplitude: float, sigma: float,
                           grid: Grid, L0: float, p_a: int = 1,
                           p_b: int = 2) -> RescalingState:
    """Map the physical initial pulse onto the zoomed frame at tau = 0."""
    if L0 <= 0:
        raise InvalidParameter(f"L0 must be positive, got {L0}")
    if sigma < 1:
        raise InvalidParameter(f"sigma must be >= 1, got {sigma}")
    if family not in INITIAL_FAMILIES:
        raise InvalidParameter(f"unknown initial-condition family {family!r}")
    pulse = INITIAL_FAMILIES[family]

    # center the frame on the |psi_x|^{2 p_b} centroid (zero for even data)
    probe = ComplexField(grid, pulse(amplitude, L0 * grid.x), 0.0)
    probe_x = ifft(derivative_symbol(grid, 1) * fft(probe.values))
    weight = np.abs(probe_x) ** (2 * p_b)
    total = quadrature(weight, grid)
    x0 = L0 * quadrature(grid.x * weight, grid) / total if total > 0 else 0.0

    u0 = ComplexField(grid, L0 ** (0.5 / sigma)
                      * pulse(amplitude, x0 + L0 * grid.x), 0.0)
    grad_norm = lp_norm(ComplexField(grid, ifft(derivative_symbol(grid, 1)
                                                * fft(u0.values))), p_a)
    a0 = compute_contraction_rate(u0, sigma, p_a, grad_norm)
    b0 = compute_drift_rate(u0, sigma, p_b)
    return RescalingState(u=u0, a=a0, b=b0, L=L0, x0=x0, tau=0.0, t=0.0,
                          sigma=sigma, p_a=p_a, p_b=p_b,
                          initial_grad_norm=grad_norm)


@dataclass
class ParameterTrace:
    """Functional and norm history of a rescaled run, sampled in tau."""

    tau: np.ndarray = field(default_factory=lambda: np.empty(0))
    t: np.ndarray = field(default_factory=lambda: np.empty(0))
    a: np.ndarray = field(default_factory=lambda: np.empty(0))
    b: np.ndarray = field(default_factory=lambda: np.empty(0))
    L: np.ndarray = field(default_factory=lambda: np.empty(0))
    phase0: np.ndarray = field(default_factory=lambda: np.empty(0))
    max_u: np.ndarray = field(default_factory=lambda: np.empty(0))
    grad_norm: np.ndarray = field(default_factory=lambda: np.empty(0))
    hess_norm: np.ndarray = field(default_factory=lambda: np.empty(0))
    x0: np.ndarray = field(default_factory=lambda: np.empty(0))

    COLUMNS = ("tau", "t", "a", "b", "L", "phase0", "max_u",
               "grad_norm", "hess_norm")

    def as_columns(self) -> dict:
        return {name: getattr(self, name) for name in self.COLUMNS}


@dataclass
class ScaleTrace:
    """Scale-factor recovery history: direct accumulation vs invariants."""

    tau: np.ndarray = field(default_factory=lambda: np.empty(0))
    L_a: np.ndarray = field(default_factory=lambda: np.empty(0))
    L_e: np.ndarray = field(default_factory=lambda: np.empty(0))
    L_m: np.ndarray = field(default_factory=lambda: np.empty(0))

    COLUMNS = ("tau", "L_a", "L_e", "L_m")

    def as_columns(self) -> dict:
        return {name: getattr(self, name) for name in self.COLUMNS}


@dataclass
class Snapshot:
    field: ComplexField
    tau: float
    t: float
    L: float
    x0: float
    a: float
    b: float


@dataclass
class RescaledRunResult:
    trace: ParameterTrace
    scales: ScaleTrace
    snapshots: list[Snapshot]
    final_state: RescalingState
    reference_invariants: InvariantTriple
    termination: str
    step_halvings: list[tuple[float, float]] = field(default_factory=list)
    h_tau_initial: float = 0.0
    steps_taken: int = 0


def recover_scale_factors(u: ComplexField, sigma: float,
                          reference: InvariantTriple,
                          tau_history: np.ndarray, a_history: np.ndarray,
                          L0: float) -> tuple[float, float | None, float]:
    """Three independent estimates of L: energy, mass and rate-integral.

    ``reference`` holds the conserved invariants of the physical solution.
    The mass route has an exponent pole at sigma = 1 and is reported as None
    there.
    """
    inv_u = compute_invariants(u, sigma)
    L_e = (reference.energy / inv_u.energy) ** (-sigma / (1.0 + sigma))
    if sigma == 1.0:
        L_m = None
    else:
        L_m = (reference.mass / inv_u.mass) ** (-sigma / (1.0 - sigma))
    L_a = L0 * float(np.exp(-np.trapezoid(a_history, tau_history)))
    return float(L_e), (None if L_m is None else float(L_m)), L_a


def run_rescaled(family: str, amplitude: float, sigma: float, grid: Grid,
                 L0: float, tau_end: float, p_a: int = 1, p_b: int = 2,
                 cfl_number: float = 0.5, h_tau: float | None = None,
                 sample_interval: float | None = None,
                 snapshot_interval: float | None = None) -> RescaledRunResult:
    """Advance the rescaled system to ``tau_end``.

    The step is chosen once from the CFL bound at tau = 0 (unless given) and
    halved deterministically whenever the transport speed tightens the bound
    below it; every halving is recorded.
    """
    if tau_end <= 0:
        raise InvalidParameter("tau_end must be positive")
    if sample_interval is None:
        sample_interval = tau_end / 400.0
    if snapshot_interval is None:
        snapshot_interval = max(tau_end / 16.0, sample_interval)

    state = initial_rescaled_state(family, amplitude, sigma, grid, L0, p_a, p_b)
    # conserved reference invariants of the physical solution, evaluated on
    # the initial rescaled data so both sides share one quadrature
    inv_u0 = compute_invariants(state.u, sigma)
    reference = InvariantTriple(
        energy=L0 ** (-1.0 / sigma - 1.0) * inv_u0.energy,
        mass=L0 ** (-1.0 / sigma + 1.0) * inv_u0.mass,
        momentum=L0 ** (-1.0 / sigma) * inv_u0.momentum,
    )

    if h_tau is None:
        h_tau = cfl_limit(state, cfl_number)
        if not np.isfinite(h_tau):
            raise InvalidParameter("degenerate initial data: zero transport speed")
    h_floor = h_tau / 2**16
    stepper = RescaledStepper(grid, sigma, h_tau, cfl_number)

    sym1 = derivative_symbol(grid, 1)
    sym2 = derivative_symbol(grid, 2)
    center = grid.nyquist_index
    integral_a = 0.0  # trapezoid accumulation of a over the full step history
    phase_prev_raw = float(np.angle(state.u.values[center]))
    phase_unwrapped = phase_prev_raw

    rows = []
    scale_rows = []
    snapshots: list[Snapshot] = []
    halvings: list[tuple[float, float]] = []

    def record(st: RescalingState, phase_value: float, L_a: float) -> None:
        u_hat = fft(st.u.values)
        u_xi = ifft(sym1 * u_hat)
        u_xixi = ifft(sym2 * u_hat)
        grad = np.sqrt(float(quadrature(np.abs(u_xi) ** 2, grid)))
        hess = np.sqrt(float(quadrature(np.abs(u_xixi) ** 2, grid)))
        rows.append((st.tau, st.t, st.a, st.b, st.L, phase_value,
                     float(np.max(np.abs(st.u.values))), grad, hess, st.x0))
        inv_u = compute_invariants(st.u, sigma)
        L_e = (reference.energy / inv_u.energy) ** (-sigma / (1.0 + sigma))
        if sigma == 1.0:
            L_m = np.nan
        else:
            L_m = (reference.mass / inv_u.mass) ** (-sigma / (1.0 - sigma))
        scale_rows.append((st.tau, L_a, float(L_e), float(L_m)))

    def snapshot(st: RescalingState) -> None:
        snapshots.append(Snapshot(field=st.u.copy(), tau=st.tau, t=st.t,
                                  L=st.L, x0=st.x0, a=st.a, b=st.b))

    record(state, phase_unwrapped, L0)
    snapshot(state)
    next_sample = sample_interval
    next_snapshot = snapshot_interval
    termination = "completed"
    h_initial = h_tau
    steps = 0

    while state.tau < tau_end - 1e-12:
        try:
            new_state = stepper.advance(state)
        except StepTooLarge:
            new_h = stepper.h_tau / 2.0
            if new_h < h_floor:
                raise
            halvings.append((state.tau, new_h))
            stepper.set_step(new_h)
            continue
        except BlowupDetected:
            termination = "blowup"
            break
        integral_a += 0.5 * stepper.h_tau * (state.a + new_state.a)
        state = new_state
        steps += 1
        raw = float(np.angle(state.u.values[center]))
        delta = (raw - phase_prev_raw + np.pi) % (2.0 * np.pi) - np.pi
        phase_unwrapped += delta
        phase_prev_raw = raw
        if state.tau >= next_sample - 1e-12 or state.tau >= tau_end - 1e-12:
            record(state, phase_unwrapped, L0 * float(np.exp(-integral_a)))
            while next_sample <= state.tau + 1e-12:
                next_sample += sample_interval
        if state.tau >= next_snapshot - 1e-12:
            snapshot(state)
            while next_snapshot <= state.tau + 1e-12:
                next_snapshot += snapshot_interval

    if not snapshots or snapshots[-1].tau < state.tau - 1e-12:
        snapshot(state)

    cols = np.array(rows, dtype=np.float64)
    trace = ParameterTrace(tau=cols[:, 0], t=cols[:, 1], a=cols[:, 2],
                           b=cols[:, 3], L=cols[:, 4], phase0=cols[:, 5],
                           max_u=cols[:, 6], grad_norm=cols[:, 7],
                           hess_norm=cols[:, 8], x0=cols[:, 9])
    scols = np.array(scale_rows, dtype=np.float64)
    scales = ScaleTrace(tau=scols[:, 0], L_a=scols[:, 1], L_e=scols[:, 2],
                        L_m=scols[:, 3])
    return RescaledRunResult(trace=trace, scales=scales, snapshots=snapshots,
                             final_state=state, reference_invariants=reference,
                             termination=termination, step_halvings=halvings,
                             h_tau_initial=h_initial, steps_taken=steps)
