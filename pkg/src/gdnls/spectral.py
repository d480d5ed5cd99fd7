"""Periodic pseudo-spectral discretization: grids, derivatives, dealiasing, norms.

All transforms use the unnormalized FFT convention of ``scipy.fft``; the
angular wavenumbers on ``[-l, l)`` are ``k_m = (pi/l) * m`` for mode numbers
``m in {-n/2, ..., n/2 - 1}`` stored in FFT order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as _fft

from .errors import InvalidParameter, NonFiniteField

fft = _fft.fft
ifft = _fft.ifft


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic mesh on ``[-half_width, half_width)``.

    ``n_points`` must be a power of two (>= 16) so transforms stay fast and
    the mode ladder is the standard symmetric one with a single unpaired
    Nyquist mode.
    """

    half_width: float
    n_points: int
    x: np.ndarray = field(init=False, repr=False, compare=False)
    wavenumbers: np.ndarray = field(init=False, repr=False, compare=False)
    mode_numbers: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.half_width <= 0:
            raise InvalidParameter(f"half_width must be positive, got {self.half_width}")
        if not _is_power_of_two(self.n_points) or self.n_points < 16:
            raise InvalidParameter(
                f"n_points must be a power of two >= 16, got {self.n_points}"
            )
        n = self.n_points
        spacing = 2.0 * self.half_width / n
        m = np.rint(np.fft.fftfreq(n) * n).astype(np.int64)
        object.__setattr__(self, "x", -self.half_width + spacing * np.arange(n))
        object.__setattr__(self, "mode_numbers", m)
        object.__setattr__(self, "wavenumbers", (np.pi / self.half_width) * m)

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.n_points

    @property
    def nyquist_index(self) -> int:
        return self.n_points // 2

    def dealias_keep(self) -> np.ndarray:
        """Boolean mask of modes kept by the 2/3 rule (``|m| <= n/3``)."""
        return 3 * np.abs(self.mode_numbers) <= self.n_points


@dataclass
class ComplexField:
    """One complex-valued sample vector on a :class:`Grid`.

    ``frame_time`` is the physical time ``t`` in the direct frame or the
    rescaled time ``tau`` in the rescaled frame.
    """

    grid: Grid
    values: np.ndarray
    frame_time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != (self.grid.n_points,):
            raise InvalidParameter(
                f"values shape {self.values.shape} does not match grid size "
                f"{self.grid.n_points}"
            )

    def copy(self) -> "ComplexField":
        return ComplexField(self.grid, self.values.copy(), self.frame_time)


def require_finite(values: np.ndarray, what: str = "field") -> None:
    if not np.all(np.isfinite(values)):
        raise NonFiniteField(f"{what} contains non-finite samples")


def derivative_symbol(grid: Grid, order: int) -> np.ndarray:
    """Per-mode multiplier ``(ik)^order``; Nyquist zeroed for odd orders."""
    if order not in (1, 2):
        raise InvalidParameter(f"derivative order must be 1 or 2, got {order}")
    k = grid.wavenumbers
    if order == 1:
        sym = (1j * k).copy()
        sym[grid.nyquist_index] = 0.0
        return sym
    return -(k * k) + 0j


def spectral_derivative(f: ComplexField, order: int) -> ComplexField:
    """Spatial derivative by multiplication with ``(ik)^order`` in transform space."""
    require_finite(f.values)
    sym = derivative_symbol(f.grid, order)
    out = ifft(sym * fft(f.values))
    return ComplexField(f.grid, out, f.frame_time)


def dealias(f_hat: np.ndarray) -> np.ndarray:
    """Zero all modes with ``|m| > n/3`` (2/3 rule) and return the result."""
    n = len(f_hat)
    m = np.rint(np.fft.fftfreq(n) * n).astype(np.int64)
    out = np.array(f_hat, dtype=np.complex128, copy=True)
    out[3 * np.abs(m) > n] = 0.0
    return out


def quadrature(values: np.ndarray, grid: Grid):
    """Periodic trapezoid rule ``spacing * sum(values)``.

    Spectrally accurate for smooth periodic integrands; used for every
    integral in the package. Returns a float for real input, complex else.
    """
    values = np.asarray(values)
    require_finite(values, "quadrature input")
    total = grid.spacing * values.sum()
    return total if np.iscomplexobj(values) else float(total)


def lp_norm(f: ComplexField, p: int) -> float:
    """The ``L^{2p}`` norm ``(integral |f|^{2p})^{1/(2p)}`` for integer p >= 1."""
    if p < 1:
        raise InvalidParameter(f"norm half-exponent p must be >= 1, got {p}")
    density = np.abs(f.values) ** (2 * p)
    return float(quadrature(density, f.grid)) ** (1.0 / (2 * p))


def trig_interpolate(f: ComplexField, x_new: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``f`` at arbitrary points.

    The unpaired Nyquist mode is rendered as a cosine so real data stays
    real. Cost is O(n * len(x_new)); meant for setup and diagnostics, not
    per-step work.
    """
    require_finite(f.values)
    grid = f.grid
    n = grid.n_points
    coeff = fft(f.values) / n
    xi = np.asarray(x_new, dtype=np.float64) + grid.half_width
    out = np.exp(1j * np.outer(xi, grid.wavenumbers)) @ coeff
    k_stored = grid.wavenumbers[grid.nyquist_index]  # -(pi/l) * n/2
    out += coeff[grid.nyquist_index] * (np.cos(k_stored * xi) - np.exp(1j * k_stored * xi))
    return out
