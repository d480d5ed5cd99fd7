import numpy as np
import pytest

from gdnls import analysis
from gdnls.errors import FitUnstable, InsufficientData
from gdnls.rescaling import ParameterTrace
from gdnls.spectral import ComplexField, Grid


def make_trace(tau, a=None, b=None, L=None, t=None, phase0=None, x0=None):
    n = len(tau)
    ones = np.ones(n)
    return ParameterTrace(
        tau=np.asarray(tau, float),
        t=np.asarray(t if t is not None else tau, float),
        a=np.asarray(a if a is not None else ones, float),
        b=np.asarray(b if b is not None else ones, float),
        L=np.asarray(L if L is not None else ones, float),
        phase0=np.asarray(phase0 if phase0 is not None else ones, float),
        max_u=ones.copy(), grad_norm=ones.copy(), hess_norm=ones.copy(),
        x0=np.asarray(x0 if x0 is not None else np.zeros(n), float),
    )


def test_fit_limits_constant_trace():
    tau = np.linspace(0, 4, 401)
    trace = make_trace(tau, a=np.full(401, 0.5), b=np.full(401, 1.25))
    fit_a, fit_b = analysis.fit_limits(trace)
    assert fit_a.value == pytest.approx(0.5, abs=1e-14)
    assert fit_a.drift == pytest.approx(0.0, abs=1e-12)
    assert fit_a.converged
    assert fit_b.value == pytest.approx(1.25, abs=1e-14)
    assert fit_a.window[0] == pytest.approx(3.0)


def test_fit_phase_slope_exact_line():
    tau = np.linspace(0, 4, 201)
    trace = make_trace(tau, phase0=3.0 * tau + 0.1)
    assert analysis.fit_phase_slope(trace) == pytest.approx(3.0, abs=1e-12)


def test_fit_phase_slope_needs_samples():
    tau = np.linspace(0, 1, 8)
    trace = make_trace(tau, phase0=tau)
    with pytest.raises(InsufficientData):
        analysis.fit_phase_slope(trace)


def test_blowup_law_exact_synthetic():
    A = 0.854
    t = np.linspace(0.0, 0.009, 300)
    L = np.sqrt(2 * A * (0.01 - t))
    tau = np.linspace(0, 4, 300)
    trace = make_trace(tau, t=t, L=L, a=np.full(300, A))
    t_star, residual, x_star = analysis.blowup_law(trace, A, B=1.5)
    assert t_star == pytest.approx(0.01, rel=1e-10)
    assert residual < 1e-10
    assert x_star == pytest.approx(1.5 * np.sqrt(2 * (0.01 - t[-1]) / A),
                                   rel=1e-8)


def test_blowup_law_rejects_nonmonotone_tail():
    t = np.linspace(0.0, 0.009, 300)
    L = np.sqrt(2 * 0.8 * (0.01 - t))
    L[-1] = L[-2] * 1.1
    trace = make_trace(np.linspace(0, 4, 300), t=t, L=L)
    with pytest.raises(FitUnstable):
        analysis.blowup_law(trace, 0.8)


def test_extract_profile_identity_scaling():
    grid = Grid(half_width=16.0, n_points=1024)
    values = np.exp(-grid.x**2) * np.exp(1j * (0.7 + 0.2 * grid.x**2))
    field = ComplexField(grid, values, frame_time=3.0)
    prof = analysis.extract_profile(field, C=1.0, sigma=2.0, span=8.0)
    # C = 1: alignment only, so the magnitude is untouched
    assert np.interp(0.0, prof.eta, np.abs(prof.values)) == pytest.approx(1.0, rel=1e-6)
    center = len(prof.eta) // 2
    assert prof.values[center].imag == pytest.approx(0.0, abs=1e-8)
    assert prof.values[center].real > 0
    # peak of |Q| lands within one cell of the recorded source peak
    cell = prof.eta[1] - prof.eta[0]
    peak = prof.eta[int(np.argmax(np.abs(prof.values)))]
    assert abs(peak - prof.source["peak_eta"]) <= cell + 1e-12


def test_extract_profile_amplitude_scaling():
    grid = Grid(half_width=16.0, n_points=2048)
    sigma, C = 2.0, 0.435
    values = np.exp(-grid.x**2)
    field = ComplexField(grid, values, frame_time=0.0)
    prof = analysis.extract_profile(field, C=C, sigma=sigma, span=5.0)
    assert np.max(np.abs(prof.values)) == pytest.approx(C ** (-1 / 8), rel=1e-4)
    # abscissa stretched: the half-width shrinks by sqrt(C) in eta units
    hwhm = analysis.half_width_at_half_max(prof.eta, np.abs(prof.values))
    hwhm_x = analysis.half_width_at_half_max(grid.x, np.abs(values))
    assert hwhm == pytest.approx(np.sqrt(C) * hwhm_x, rel=1e-2)


@pytest.mark.parametrize("sigma,alpha", [(2.0, 1.95), (1.5, 1.7)])
def test_check_asymptotics_synthetic_power_law(sigma, alpha):
    eta = np.concatenate([-np.geomspace(100, 10, 400), np.geomspace(10, 100, 400)])
    values = np.abs(eta) ** (-0.5 / sigma - 1j / alpha)
    result = analysis.check_asymptotics(eta, values, window=(10.0, 100.0))
    for exp in result.amplitude_exponents():
        assert exp == pytest.approx(-0.5 / sigma, abs=1e-6)
    for slope in result.phase_slopes():
        assert slope == pytest.approx(-1.0 / alpha, abs=1e-6)


def test_check_asymptotics_expected_values():
    assert -0.5 / 2.0 == pytest.approx(-0.25)
    assert -0.5 / 1.5 == pytest.approx(-1.0 / 3.0)


def test_profile_energy_zero_and_sech():
    eta = np.linspace(-30, 30, 4001)
    zero = analysis.profile_energy(eta, np.zeros_like(eta, dtype=complex), 2.0)
    assert zero.normalized_sum == 0.0
    sech = 1.0 / np.cosh(eta) + 0j
    check = analysis.profile_energy(eta, sech, 2.0)
    # a real bump is no self-similar profile: the balance fails decisively
    assert check.interaction_term == pytest.approx(0.0, abs=1e-12)
    assert check.normalized_sum == pytest.approx(1.0, rel=1e-6)


def test_mass_divergence_power_law_tails():
    eta = np.linspace(-400, 400, 160001)
    for sigma in (2.0, 1.1):
        decay = np.abs(eta) ** (-0.5 / sigma)
        decay[np.abs(eta) < 1.0] = 1.0
        gamma = analysis.mass_divergence_exponent(eta, decay, r_min=20.0,
                                                  r_max=380.0)
        assert gamma == pytest.approx(1.0 - 1.0 / sigma, abs=0.02)


def test_mass_divergence_compact_support():
    eta = np.linspace(-50, 50, 10001)
    values = np.where(np.abs(eta) < 2.0, 1.0, 0.0)
    assert analysis.mass_divergence_exponent(eta, values) == 0.0


def test_sobolev_rate_exponent_values():
    assert analysis.sobolev_rate_exponent(2.0, 1.0) == pytest.approx(-0.375)
    assert analysis.sobolev_rate_exponent(1.0, 1.0) == pytest.approx(-0.5)


def test_modified_phase_flat_for_linear_ramp():
    values = np.exp(1j * np.linspace(-20, 20, 801))
    out = analysis.modified_phase(values)
    ramp = np.linspace(-20, 20, 801)
    assert np.max(np.abs(out - (ramp - ramp[400]))) < 1e-9
