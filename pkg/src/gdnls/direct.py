"""Direct (unrescaled) simulation of the derivative NLS family.

The equation advanced here is ``i psi_t + psi_xx + i |psi|^{2 sigma} psi_x = 0``
written as ``psi_t = i psi_xx - |psi|^{2 sigma} psi_x``: the dispersive term is
the exponential integrator's linear symbol ``-i k^2`` and the derivative
nonlinearity is treated explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import etdrk4
from .errors import BlowupDetected, InvalidParameter
from .spectral import (ComplexField, Grid, dealias, derivative_symbol, fft,
                       ifft, lp_norm, quadrature, require_finite,
                       spectral_derivative, trig_interpolate)


def gaussian_pulse(amplitude: float, x: np.ndarray) -> np.ndarray:
    return amplitude * np.exp(-2.0 * x**2) + 0j


def lorentzian_pulse(amplitude: float, x: np.ndarray) -> np.ndarray:
    return amplitude / (1.0 + 9.0 * x**2) + 0j


INITIAL_FAMILIES = {
    "gaussian": gaussian_pulse,
    "lorentzian": lorentzian_pulse,
}


def initial_field(family: str, amplitude: float, grid: Grid) -> ComplexField:
    if family not in INITIAL_FAMILIES:
        raise InvalidParameter(f"unknown initial-condition family {family!r}")
    if amplitude <= 0:
        raise InvalidParameter(f"amplitude must be positive, got {amplitude}")
    return ComplexField(grid, INITIAL_FAMILIES[family](amplitude, grid.x), 0.0)


def _power_density(values: np.ndarray, sigma: float) -> np.ndarray:
    # |psi|^{2 sigma} via a real power of |psi|^2; safe at psi = 0 for sigma >= 1
    return (values.real**2 + values.imag**2) ** sigma


def gdnls_nonlinearity(psi: ComplexField, sigma: float) -> ComplexField:
    """Nonlinear right-hand side ``-|psi|^{2 sigma} psi_x``, dealiased."""
    if sigma < 1:
        raise InvalidParameter(f"sigma must be >= 1, got {sigma}")
    require_finite(psi.values)
    sym = derivative_symbol(psi.grid, 1)
    psi_x = ifft(sym * fft(psi.values))
    product = -_power_density(psi.values, sigma) * psi_x
    return ComplexField(psi.grid, ifft(dealias(fft(product))), psi.frame_time)


def spectral_rhs(grid: Grid, sigma: float) -> Callable[[np.ndarray, float], np.ndarray]:
    """Transform-space nonlinearity closure for the ETDRK4 stepper."""
    if sigma < 1:
        raise InvalidParameter(f"sigma must be >= 1, got {sigma}")
    sym = derivative_symbol(grid, 1)

    def rhs(v_hat: np.ndarray, t: float) -> np.ndarray:
        v = ifft(v_hat)
        v_x = ifft(sym * v_hat)
        return fft(-_power_density(v, sigma) * v_x)

    return rhs


def linear_symbol(grid: Grid) -> np.ndarray:
    """Dispersive symbol ``-i k^2`` of the ``i psi_xx`` term."""
    return -1j * grid.wavenumbers**2


@dataclass
class InvariantTriple:
    energy: float
    mass: float
    momentum: float


def compute_invariants(psi: ComplexField, sigma: float) -> InvariantTriple:
    """Energy, mass and momentum functionals of the field."""
    psi_x = spectral_derivative(psi, 1).values
    grad_sq = float(quadrature(np.abs(psi_x) ** 2, psi.grid))
    cross = quadrature(_power_density(psi.values, sigma)
                       * np.conj(psi.values) * psi_x, psi.grid)
    energy = 0.5 * grad_sq + float(np.imag(cross)) / (2.0 * (sigma + 1.0))
    mass = 0.5 * float(quadrature(np.abs(psi.values) ** 2, psi.grid))
    momentum = -0.5 * float(np.imag(quadrature(np.conj(psi.values) * psi_x, psi.grid)))
    return InvariantTriple(energy=energy, mass=mass, momentum=momentum)


@dataclass
class NormTrace:
    """Norm and invariant history sampled along a direct run."""

    times: np.ndarray = field(default_factory=lambda: np.empty(0))
    sup_norm: np.ndarray = field(default_factory=lambda: np.empty(0))
    h1_seminorm: np.ndarray = field(default_factory=lambda: np.empty(0))
    h2_seminorm: np.ndarray = field(default_factory=lambda: np.empty(0))
    energy: np.ndarray = field(default_factory=lambda: np.empty(0))
    mass: np.ndarray = field(default_factory=lambda: np.empty(0))
    momentum: np.ndarray = field(default_factory=lambda: np.empty(0))

    COLUMNS = ("t", "sup_norm", "h1", "h2", "E", "M", "P")

    def as_columns(self) -> dict:
        return {
            "t": self.times,
            "sup_norm": self.sup_norm,
            "h1": self.h1_seminorm,
            "h2": self.h2_seminorm,
            "E": self.energy,
            "M": self.mass,
            "P": self.momentum,
        }


@dataclass
class DirectRunResult:
    trace: NormTrace
    final_field: ComplexField
    termination: str  # "completed" or "blowup"
    blowup: BlowupDetected | None = None
    steps_taken: int = 0


def run_direct(sigma: float, grid: Grid, h: float, t_end: float,
               psi0: ComplexField, sample_interval: float | None = None) -> DirectRunResult:
    """Advance the direct equation to ``t_end`` recording a :class:`NormTrace`.

    Non-finite values terminate the run early with the last valid state
    preserved; that outcome is reported, not raised.
    """
    if t_end <= 0 or h <= 0:
        raise InvalidParameter("h and t_end must be positive")
    if sample_interval is None:
        sample_interval = t_end / 100.0
    sample_every = max(1, int(round(sample_interval / h)))
    n_steps = int(round(t_end / h))

    coeffs = etdrk4.compute_coefficients(linear_symbol(grid), h)
    rhs = spectral_rhs(grid, sigma)
    sym1 = derivative_symbol(grid, 1)
    sym2 = derivative_symbol(grid, 2)

    rows: list[tuple] = []

    def record(v_hat: np.ndarray, t: float) -> None:
        psi = ifft(v_hat)
        psi_x = ifft(sym1 * v_hat)
        psi_xx = ifft(sym2 * v_hat)
        f = ComplexField(grid, psi, t)
        inv = compute_invariants(f, sigma)
        rows.append((
            t,
            float(np.max(np.abs(psi))),
            np.sqrt(float(quadrature(np.abs(psi_x) ** 2, grid))),
            np.sqrt(float(quadrature(np.abs(psi_xx) ** 2, grid))),
            inv.energy, inv.mass, inv.momentum,
        ))

    v_hat = fft(psi0.values)
    t = psi0.frame_time
    record(v_hat, t)
    termination = "completed"
    blowup = None
    steps_done = 0
    for step_index in range(1, n_steps + 1):
        try:
            v_hat_next = etdrk4.step_hat(v_hat, t, rhs, coeffs)
        except BlowupDetected as err:
            termination = "blowup"
            blowup = err
            break
        v_hat = v_hat_next
        t = psi0.frame_time + step_index * h
        steps_done = step_index
        if step_index % sample_every == 0 or step_index == n_steps:
            record(v_hat, t)

    cols = np.array(rows, dtype=np.float64)
    trace = NormTrace(times=cols[:, 0], sup_norm=cols[:, 1],
                      h1_seminorm=cols[:, 2], h2_seminorm=cols[:, 3],
                      energy=cols[:, 4], mass=cols[:, 5], momentum=cols[:, 6])
    final = ComplexField(grid, ifft(v_hat), t)
    return DirectRunResult(trace=trace, final_field=final,
                           termination=termination, blowup=blowup,
                           steps_taken=steps_done)


def gauge_transform(big_psi: ComplexField) -> ComplexField:
    """Multiply by the unimodular factor ``exp(i/2 * cumulative |Psi|^2)``.

    The cumulative integral runs from the left edge of the grid by the
    trapezoid rule. Only the phase changes: ``|psi| = |Psi|`` pointwise.
    """
    require_finite(big_psi.values)
    density = np.abs(big_psi.values) ** 2
    dx = big_psi.grid.spacing
    cumulative = np.empty_like(density)
    cumulative[0] = 0.0
    np.cumsum(0.5 * dx * (density[1:] + density[:-1]), out=cumulative[1:])
    return ComplexField(big_psi.grid,
                        big_psi.values * np.exp(0.5j * cumulative),
                        big_psi.frame_time)


def rescale_field(psi: ComplexField, lam: float, sigma: float) -> ComplexField:
    """Scaled copy ``lam^{-1/(2 sigma)} psi(x / lam)`` by trigonometric resampling."""
    if lam <= 0:
        raise InvalidParameter(f"scaling factor must be positive, got {lam}")
    values = trig_interpolate(psi, psi.grid.x / lam) * lam ** (-0.5 / sigma)
    return ComplexField(psi.grid, values, psi.frame_time)


def scaling_property_check(psi: ComplexField, lam: float, sigma: float,
                           h: float) -> float:
    """Sup-norm commutator of scaling and one-step evolution.

    Advances ``psi`` by ``h`` then scales, and scales first then advances by
    ``lam^2 h``; returns the max pointwise discrepancy. Zero (to roundoff)
    exactly when the scaling symmetry holds for the discrete solver.
    """
    grid = psi.grid
    rhs = spectral_rhs(grid, sigma)
    c = linear_symbol(grid)

    coeffs = etdrk4.compute_coefficients(c, h)
    stepped = etdrk4.step(psi, rhs, coeffs)
    path_a = rescale_field(stepped, lam, sigma)

    scaled = rescale_field(psi, lam, sigma)
    coeffs_scaled = etdrk4.compute_coefficients(c, lam**2 * h)
    path_b = etdrk4.step(scaled, rhs, coeffs_scaled)

    return float(np.max(np.abs(path_a.values - path_b.values)))
