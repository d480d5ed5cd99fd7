"""Post-processing: limiting constants, blowup law, profile extraction, checks.

Turns rescaled-run traces into the collapse description: the limits ``A`` and
``B`` of the rate functionals, the phase slope ``C``, the square-root blowup
law with its singularity time, and the universal profile with its predicted
tail behavior, zero energy and divergent mass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FitUnstable, InsufficientData, InvalidParameter
from .rescaling import ParameterTrace, Snapshot, norm_exponent_factor
from .spectral import ComplexField


@dataclass
class LimitFit:
    """Plateau estimate of one functional over the trailing fit window."""

    value: float
    drift: float      # linear slope across the window
    spread: float     # standard deviation across the window
    window: tuple[float, float]
    converged: bool


@dataclass
class BlowupFit:
    A: float
    B: float
    C: float
    t_star: float
    x_star: float
    alpha: float
    beta: float
    law_residual: float
    diagnostics: dict = field(default_factory=dict)


@dataclass
class ExtractedProfile:
    """Late-time rescaled field mapped onto the universal profile frame."""

    eta: np.ndarray
    values: np.ndarray
    sigma: float
    source: dict = field(default_factory=dict)


def _trailing_window(tau: np.ndarray, fraction: float) -> np.ndarray:
    span = tau[-1] - tau[0]
    return tau >= tau[-1] - fraction * span


def fit_limits(trace: ParameterTrace, window_fraction: float = 0.25
               ) -> tuple[LimitFit, LimitFit]:
    """Plateau means of a and b over the trailing quarter of the tau range.

    A fit is flagged converged when the drift across the window stays below
    1% of the mean.
    """
    mask = _trailing_window(trace.tau, window_fraction)
    if mask.sum() < 4:
        raise InsufficientData("fewer than 4 samples in the plateau window")
    window = (float(trace.tau[mask][0]), float(trace.tau[-1]))
    span = window[1] - window[0]
    fits = []
    for series in (trace.a, trace.b):
        data = series[mask]
        mean = float(np.mean(data))
        drift = float(np.polyfit(trace.tau[mask], data, 1)[0])
        spread = float(np.std(data))
        converged = abs(drift * span) < 0.01 * abs(mean) if mean != 0 else drift == 0
        fits.append(LimitFit(value=mean, drift=drift, spread=spread,
                             window=window, converged=converged))
    return fits[0], fits[1]


def fit_phase_slope(trace: ParameterTrace) -> float:
    """Least-squares slope of the unwrapped origin phase over the second half."""
    mask = trace.tau >= trace.tau[0] + 0.5 * (trace.tau[-1] - trace.tau[0])
    if mask.sum() < 10:
        raise InsufficientData("fewer than 10 phase samples in the fit window")
    return float(np.polyfit(trace.tau[mask], trace.phase0[mask], 1)[0])


def blowup_law(trace: ParameterTrace, A: float, B: float | None = None,
               window_fraction: float = 0.25) -> tuple[float, float, float | None]:
    """Fit ``L^2 = 2 A' (t* - t)`` on the trailing window.

    Returns ``(t_star, residual, x_star)`` where the residual is the relative
    mismatch between the slope-derived rate ``A'`` and the plateau value
    ``A``; ``x_star`` extrapolates the collapse position when ``B`` is given.
    """
    mask = _trailing_window(trace.tau, window_fraction)
    L_sq = trace.L[mask] ** 2
    t = trace.t[mask]
    if np.any(np.diff(L_sq) >= 0):
        raise FitUnstable("L^2 tail is not monotonically decreasing")
    slope, intercept = np.polyfit(t, L_sq, 1)
    if slope >= 0:
        raise FitUnstable("L^2 tail does not shrink linearly in t")
    A_prime = -0.5 * float(slope)
    t_star = float(intercept / (2.0 * A_prime))
    residual = abs(A_prime - A) / abs(A)
    x_star = None
    if B is not None:
        t_end = float(trace.t[-1])
        x_star = float(trace.x0[-1]
                       + B * np.sqrt(2.0 * max(t_star - t_end, 0.0) / A))
    return t_star, float(residual), x_star


def analyze_trace(trace: ParameterTrace) -> BlowupFit:
    """Full fit bundle: plateaus, phase slope, blowup law, derived ratios."""
    fit_a, fit_b = fit_limits(trace)
    C = fit_phase_slope(trace)
    t_star, law_residual, x_star = blowup_law(trace, fit_a.value, fit_b.value)
    return BlowupFit(
        A=fit_a.value, B=fit_b.value, C=C, t_star=t_star,
        x_star=x_star if x_star is not None else np.nan,
        alpha=fit_a.value / C, beta=fit_b.value / np.sqrt(C),
        law_residual=law_residual,
        diagnostics={
            "A_drift": fit_a.drift, "A_spread": fit_a.spread,
            "A_converged": fit_a.converged,
            "B_drift": fit_b.drift, "B_spread": fit_b.spread,
            "B_converged": fit_b.converged,
            "fit_window": fit_a.window,
        },
    )


def unwrap_from_center(phase: np.ndarray, center: int) -> np.ndarray:
    """Nearest-branch phase continuation outward from a center sample."""
    out = np.empty_like(phase)
    out[center:] = np.unwrap(phase[center:])
    out[:center + 1] = np.unwrap(phase[center::-1])[::-1]
    return out


def modified_phase(values: np.ndarray, center: int | None = None) -> np.ndarray:
    """Unwrapped phase relative to the center sample, ``phi(xi) - phi(0)``."""
    if center is None:
        center = len(values) // 2
    phase = unwrap_from_center(np.angle(values), center)
    return phase - phase[center]


def extract_profile(snapshot: Snapshot | ComplexField, C: float, sigma: float,
                    span: float = 10.0, n_points: int = 2001) -> ExtractedProfile:
    """Map a late-time rescaled field to the universal profile frame.

    Removes the accumulated linear phase (the constant chosen so the center
    value is real and non-negative), stretches the abscissa by ``sqrt(C)``
    and scales the amplitude by ``C^{-1/(4 sigma)}``, then resamples onto a
    uniform mesh.
    """
    if C <= 0:
        raise InvalidParameter(f"phase slope must be positive, got {C}")
    if isinstance(snapshot, Snapshot):
        u = snapshot.field
        meta = {"tau": snapshot.tau, "t": snapshot.t, "L": snapshot.L,
                "x0": snapshot.x0}
    else:
        u = snapshot
        meta = {"tau": u.frame_time}
    grid = u.grid
    center = grid.nyquist_index
    aligned = u.values * np.exp(-1j * np.angle(u.values[center]))
    eta_source = np.sqrt(C) * grid.x
    amplitude = C ** (-0.25 / sigma)
    span = min(span, float(-eta_source[0]) * 0.999,
               float(eta_source[-1]) * 0.999)
    eta = np.linspace(-span, span, n_points)
    values = (np.interp(eta, eta_source, aligned.real)
              + 1j * np.interp(eta, eta_source, aligned.imag)) * amplitude
    peak_eta = float(eta_source[int(np.argmax(np.abs(aligned)))])
    meta.update({"peak_eta": peak_eta, "span": span, "C": C})
    return ExtractedProfile(eta=eta, values=values, sigma=sigma, source=meta)


def half_width_at_half_max(eta: np.ndarray, magnitude: np.ndarray) -> float:
    peak = int(np.argmax(magnitude))
    half = 0.5 * magnitude[peak]
    above = magnitude >= half
    left = eta[above][0]
    right = eta[above][-1]
    return 0.5 * float(right - left)


@dataclass
class TailFit:
    amplitude_exponent: float
    phase_slope: float
    window: tuple[float, float]
    n_points: int


@dataclass
class AsymptoticsResult:
    left: TailFit | None
    right: TailFit | None

    def amplitude_exponents(self) -> list[float]:
        return [s.amplitude_exponent for s in (self.left, self.right) if s]

    def phase_slopes(self) -> list[float]:
        return [s.phase_slope for s in (self.left, self.right) if s]


def fit_tail_power_law(radius: np.ndarray, values: np.ndarray) -> TailFit:
    """Log-log fits of magnitude and phase on one (already windowed) tail."""
    if len(radius) < 8:
        raise InsufficientData("tail window holds fewer than 8 samples")
    log_r = np.log(radius)
    amp = float(np.polyfit(log_r, np.log(np.abs(values)), 1)[0])
    phase = np.unwrap(np.angle(values))
    slope = float(np.polyfit(log_r, phase, 1)[0])
    return TailFit(amplitude_exponent=amp, phase_slope=slope,
                   window=(float(radius[0]), float(radius[-1])),
                   n_points=len(radius))


def check_asymptotics(eta: np.ndarray, values: np.ndarray,
                      window: tuple[float, float] | None = None
                      ) -> AsymptoticsResult:
    """Tail behavior on both sides: amplitude exponent and phase-log slope.

    The decaying branch has ``|Q| ~ |eta|^{-1/(2 sigma)}`` and
    ``arg Q ~ -(1/alpha) ln |eta|``; the default window runs from ten core
    half-widths out to half the available extent on each side.
    """
    eta = np.asarray(eta, dtype=float)
    mag = np.abs(values)
    if np.max(mag) == 0:
        raise InsufficientData("profile is identically zero")
    if mag.min() > 0.1 * mag.max() and window is None:
        raise InsufficientData("tail region never falls below 0.1 * max")

    sides = {}
    for name, sign in (("left", -1.0), ("right", 1.0)):
        mask_side = (eta * sign) > 0
        if not np.any(mask_side):
            sides[name] = None
            continue
        radius = eta[mask_side] * sign
        vals = values[mask_side]
        order = np.argsort(radius)
        radius, vals = radius[order], vals[order]
        edge = float(radius[-1])
        if window is None:
            hwhm = half_width_at_half_max(eta, mag)
            lo = min(10.0 * hwhm, 0.4 * edge)
            hi = 0.5 * edge
        else:
            lo, hi = window
        pick = (radius >= lo) & (radius <= hi)
        if pick.sum() < 8:
            sides[name] = None
            continue
        sides[name] = fit_tail_power_law(radius[pick], vals[pick])
    if sides["left"] is None and sides["right"] is None:
        raise InsufficientData("no usable tail window on either side")
    return AsymptoticsResult(left=sides["left"], right=sides["right"])


@dataclass
class EnergyCheck:
    gradient_term: float
    interaction_term: float
    normalized_sum: float


def profile_energy(eta: np.ndarray, values: np.ndarray, sigma: float,
                   derivative: np.ndarray | None = None) -> EnergyCheck:
    """Energy functional of a profile on its truncated domain.

    The self-similar profile makes the sum of the two terms vanish; the
    normalized sum measures how far a candidate misses that balance.
    """
    if derivative is None:
        derivative = np.gradient(values, eta)
    grad = float(np.trapezoid(np.abs(derivative) ** 2, eta))
    if grad == 0:
        return EnergyCheck(0.0, 0.0, 0.0)
    cross = np.trapezoid(np.abs(values) ** (2 * sigma)
                         * np.conj(values) * derivative, eta)
    interaction = float(np.imag(cross)) / (sigma + 1.0)
    return EnergyCheck(gradient_term=grad, interaction_term=interaction,
                       normalized_sum=(grad + interaction) / grad)


def truncated_mass(eta: np.ndarray, values: np.ndarray,
                   radius: float) -> float:
    mask = np.abs(eta) <= radius
    if mask.sum() < 2:
        return 0.0
    return 0.5 * float(np.trapezoid(np.abs(values[mask]) ** 2, eta[mask]))


def mass_divergence_exponent(eta: np.ndarray, values: np.ndarray,
                             r_min: float | None = None,
                             r_max: float | None = None,
                             n_radii: int = 33) -> float:
    """Growth exponent of the truncated mass ``M(R) ~ R^gamma``.

    Fits the three-parameter model ``M0 + c R^gamma`` so the core mass does
    not bias the tail exponent; compactly supported data saturates and
    reports 0. A slowly decaying tail gives ``gamma = 1 - 1/sigma``.
    """
    eta = np.asarray(eta, dtype=float)
    edge = float(min(-eta.min(), eta.max()))
    if r_max is None:
        r_max = 0.95 * edge
    if r_min is None:
        r_min = r_max / 8.0
    radii = np.geomspace(r_min, r_max, n_radii)
    mass = np.array([truncated_mass(eta, values, r) for r in radii])
    growth = mass[-1] - mass[0]
    if growth <= 1e-9 * max(mass[-1], 1e-300):
        return 0.0

    def sse(gamma: float) -> float:
        basis = np.column_stack([np.ones_like(radii), radii**gamma])
        coef, *_ = np.linalg.lstsq(basis, mass, rcond=None)
        return float(np.sum((basis @ coef - mass) ** 2))

    gammas = np.linspace(0.01, 1.4, 140)
    best = gammas[int(np.argmin([sse(g) for g in gammas]))]
    fine = np.linspace(best - 0.02, best + 0.02, 81)
    fine = fine[fine > 0]
    return float(fine[int(np.argmin([sse(g) for g in fine]))])


def sobolev_rate_exponent(sigma: float, s: float = 1.0) -> float:
    """Predicted power of (t* - t) in the growth of the s-th Sobolev norm."""
    return (sigma - 1.0) / (4.0 * sigma) - 0.5 * s


def measure_sobolev_rate(trace: ParameterTrace, t_star: float, sigma: float,
                         p: int = 1, window_fraction: float = 0.25) -> float:
    """Log-log slope of the reconstructed gradient norm against t* - t.

    In the rescaled frame the physical gradient norm is
    ``L^{-1/q} ||u_xi||`` with the pinned norm constant, so the slope follows
    directly from the recorded scale factor.
    """
    mask = _trailing_window(trace.tau, window_fraction)
    remaining = t_star - trace.t[mask]
    if np.any(remaining <= 0):
        raise FitUnstable("trace reaches past the fitted singular time")
    q = norm_exponent_factor(sigma, p)
    log_norm = -np.log(trace.L[mask]) / q + np.log(trace.grad_norm[mask])
    return float(np.polyfit(np.log(remaining), log_norm, 1)[0])
