import numpy as np
import pytest

from gdnls.errors import InvalidParameter, NonFiniteField
from gdnls.spectral import (ComplexField, Grid, dealias, fft, lp_norm,
                            quadrature, spectral_derivative, trig_interpolate)


@pytest.fixture
def grid12():
    return Grid(half_width=8.0, n_points=2**12)


def test_grid_geometry(grid12):
    assert grid12.spacing * grid12.n_points == 2 * grid12.half_width
    assert grid12.x[0] == -8.0
    assert grid12.x[-1] == pytest.approx(8.0 - grid12.spacing)
    # mode ladder is symmetric apart from the unpaired Nyquist entry
    m = np.sort(grid12.mode_numbers)
    assert m[0] == -grid12.n_points // 2
    assert m[-1] == grid12.n_points // 2 - 1


@pytest.mark.parametrize("n", [15, 24, 1000])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(InvalidParameter):
        Grid(half_width=8.0, n_points=n)


def test_field_length_must_match(grid12):
    with pytest.raises(InvalidParameter):
        ComplexField(grid12, np.zeros(7))


def test_derivative_of_constant(grid12):
    f = ComplexField(grid12, np.ones(grid12.n_points))
    out = spectral_derivative(f, 1)
    assert np.max(np.abs(out.values)) < 1e-14


def test_second_derivative_eigenfunction():
    grid = Grid(half_width=8.0, n_points=2**10)
    k = (np.pi / 8.0) * 4
    f = ComplexField(grid, np.exp(1j * k * grid.x))
    out = spectral_derivative(f, 2)
    assert np.max(np.abs(out.values + (np.pi / 2.0) ** 2 * f.values)) < 1e-10


def test_gaussian_derivative_oracle(grid12):
    f = ComplexField(grid12, np.exp(-2.0 * grid12.x**2))
    out = spectral_derivative(f, 1)
    exact = -4.0 * grid12.x * np.exp(-2.0 * grid12.x**2)
    assert np.max(np.abs(out.values - exact)) < 1e-10


def test_derivative_twice_matches_second_order(grid12):
    rng = np.random.default_rng(7)
    # band-limited field: random low modes only
    coeff = np.zeros(grid12.n_points, dtype=complex)
    low = 40
    coeff[:low] = rng.standard_normal(low) + 1j * rng.standard_normal(low)
    coeff[-low:] = rng.standard_normal(low) + 1j * rng.standard_normal(low)
    f = ComplexField(grid12, np.fft.ifft(coeff))
    once = spectral_derivative(spectral_derivative(f, 1), 1).values
    twice = spectral_derivative(f, 2).values
    scale = np.max(np.abs(twice))
    assert np.max(np.abs(once - twice)) / scale < 1e-10


def test_derivative_rejects_nonfinite(grid12):
    values = np.ones(grid12.n_points, dtype=complex)
    values[3] = np.nan
    with pytest.raises(NonFiniteField):
        spectral_derivative(ComplexField(grid12, values), 1)


def test_dealias_zero_and_passband():
    n = 256
    grid = Grid(half_width=8.0, n_points=n)
    assert np.all(dealias(np.zeros(n)) == 0)
    rng = np.random.default_rng(3)
    coeff = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    coeff[~grid.dealias_keep()] = 0.0
    assert np.allclose(dealias(coeff), coeff)


def test_dealias_cubic_product_against_convolution():
    # single mode m0: the pointwise u^2 conj(u) is again the single mode m0,
    # as the direct convolution of the spectra confirms
    n = 256
    grid = Grid(half_width=np.pi, n_points=n)
    m0 = n // 4
    u = np.exp(1j * grid.wavenumbers[m0] * (grid.x + grid.half_width))
    product = u * u * np.conj(u)
    spec = fft(product) / n

    full = np.zeros(3 * n, dtype=complex)  # unaliased convolution ladder
    c = np.zeros(n, dtype=complex)
    c[m0] = 1.0
    m = np.rint(np.fft.fftfreq(n) * n).astype(int)
    for i in range(n):
        for j in range(n):
            if c[i] == 0 or c[j] == 0:
                continue
            for l in range(n):
                if c[l] == 0:
                    continue
                full[m[i] + m[j] - m[l] + 3 * n // 2] += c[i] * c[j] * np.conj(c[l])
    expected = np.zeros(n, dtype=complex)
    for mode in range(-n // 2, n // 2):
        expected[mode % n] = full[mode + 3 * n // 2]
    filtered = dealias(spec)
    keep = grid.dealias_keep()
    assert np.allclose(filtered[keep], expected[keep], atol=1e-12)
    assert np.all(filtered[~keep] == 0)


def test_quadrature_constant(grid12):
    assert quadrature(np.ones(grid12.n_points), grid12) == pytest.approx(16.0)


def test_quadrature_gaussian(grid12):
    val = quadrature(np.exp(-4.0 * grid12.x**2), grid12)
    assert val == pytest.approx(np.sqrt(np.pi / 4.0), rel=1e-14)


def test_quadrature_odd_function(grid12):
    assert abs(quadrature(np.sin(np.pi * grid12.x / 8.0), grid12)) < 1e-12
    assert abs(quadrature(grid12.x * np.exp(-grid12.x**2), grid12)) < 1e-12


def test_lp_norm_values(grid12):
    zero = ComplexField(grid12, np.zeros(grid12.n_points))
    assert lp_norm(zero, 1) == 0.0
    f = ComplexField(grid12, 3.0 * np.exp(-2.0 * grid12.x**2))
    mass = 2.25 * np.sqrt(np.pi)
    assert lp_norm(f, 1) == pytest.approx(np.sqrt(2.0 * mass), rel=1e-12)
    fx = spectral_derivative(f, 1)
    assert lp_norm(fx, 1) == pytest.approx(3.0 * np.pi**0.25, rel=1e-10)
    assert lp_norm(fx, 1) == pytest.approx(3.9940, abs=5e-4)


def test_parseval(grid12):
    rng = np.random.default_rng(11)
    values = rng.standard_normal(grid12.n_points) + 1j * rng.standard_normal(grid12.n_points)
    f_hat = fft(values)
    lhs = quadrature(np.abs(values) ** 2, grid12)
    rhs = (2 * grid12.half_width / grid12.n_points**2) * np.sum(np.abs(f_hat) ** 2)
    assert abs(lhs - rhs) / abs(rhs) < 1e-12


def test_trig_interpolate_reproduces_grid_and_offgrid():
    grid = Grid(half_width=8.0, n_points=2**10)
    f = ComplexField(grid, np.exp(-2.0 * grid.x**2) * np.exp(0.5j * grid.x))
    on_grid = trig_interpolate(f, grid.x)
    assert np.max(np.abs(on_grid - f.values)) < 1e-12
    x_off = np.linspace(-3.0, 3.0, 17)
    exact = np.exp(-2.0 * x_off**2) * np.exp(0.5j * x_off)
    assert np.max(np.abs(trig_interpolate(f, x_off) - exact)) < 1e-10
