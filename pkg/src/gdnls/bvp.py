"""Two-domain collocation solver for the self-similar blowup profile.

The complex profile equation

    Q_xixi - Q + i alpha (Q/(2 sigma) + xi Q_xi) - i beta Q_xi
        + i |Q|^{2 sigma} Q_xi = 0

is written as a first-order system for (Re Q, Im Q, Re Q_xi, Im Q_xi) on the
two adjacent truncations [-A_L, 0] and [0, A_R]. Ten side conditions close
the system: Robin far-field conditions selecting the slowly decaying branch
at both ends, continuity of the four unknowns at 0, the phase gauge
Im Q(0) = 0, and the peak condition (|Q|^2)_xi(0) = 0. The eigenparameters
(alpha, beta) join the unknown vector, giving a block-bidiagonal Jacobian
with two border columns; damped Newton iterates on a fourth-order
Lobatto-IIIA (condensed Simpson) discretization with residual-driven mesh
refinement, and the parameter continuation in sigma walks from 2 downward
with warm starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .analysis import ExtractedProfile, unwrap_from_center
from .errors import (ContinuationStepTooLarge, InvalidParameter,
                     MeshExhausted)

MAX_MESH_POINTS = 500_000
NEWTON_TOL = 1e-6
NEWTON_MAX_ITER = 40
ARMIJO_FLOOR = 2.0 ** -10
DEFAULT_DOMAIN = (-60.0, 40.0)
WIDE_DOMAIN = (-150.0, 50.0)
DOMAIN_GROWTH_STEP = 10.0


# --- right-hand side of the first-order system -------------------------------

def ode_rhs(xi, y, alpha: float, beta: float, sigma: float) -> np.ndarray:
    """Derivatives of (Re Q, Im Q, Re Q_xi, Im Q_xi); vectorized over xi."""
    y = np.asarray(y, dtype=float)
    y1, y2, y3, y4 = y
    g = (y1**2 + y2**2) ** sigma
    out = np.empty_like(y)
    out[0] = y3
    out[1] = y4
    out[2] = y1 + alpha * (y2 / (2.0 * sigma) + xi * y4) - beta * y4 + g * y4
    out[3] = y2 - alpha * (y1 / (2.0 * sigma) + xi * y3) + beta * y3 - g * y3
    return out


def ode_jacobian(xi, y, alpha: float, beta: float, sigma: float):
    """d f / d y (4,4,...) and d f / d(alpha, beta) (4,2,...)."""
    y = np.asarray(y, dtype=float)
    y1, y2, y3, y4 = y
    r_sq = y1**2 + y2**2
    g = r_sq**sigma
    with np.errstate(divide="ignore", invalid="ignore"):
        g_prime = np.where(r_sq > 0, sigma * r_sq ** (sigma - 1.0), 0.0)
    g1 = 2.0 * y1 * g_prime
    g2 = 2.0 * y2 * g_prime
    shape = np.shape(y1)
    J = np.zeros((4, 4) + shape)
    J[0, 2] = 1.0
    J[1, 3] = 1.0
    J[2, 0] = 1.0 + g1 * y4
    J[2, 1] = alpha / (2.0 * sigma) + g2 * y4
    J[2, 3] = alpha * xi - beta + g
    J[3, 0] = -alpha / (2.0 * sigma) - g1 * y3
    J[3, 1] = 1.0 - g2 * y3
    J[3, 2] = -alpha * xi + beta - g
    P = np.zeros((4, 2) + shape)
    P[2, 0] = y2 / (2.0 * sigma) + xi * y4
    P[2, 1] = -y4
    P[3, 0] = -(y1 / (2.0 * sigma) + xi * y3)
    P[3, 1] = y3
    return J, P


def complex_equation_residual(xi, y, alpha: float, beta: float,
                              sigma: float) -> np.ndarray:
    """Residual of the complex profile equation assembled from ``ode_rhs``.

    Internal consistency check that fixes every sign of the real system.
    """
    f = ode_rhs(xi, y, alpha, beta, sigma)
    q = y[0] + 1j * y[1]
    q_xi = y[2] + 1j * y[3]
    q_xixi = f[2] + 1j * f[3]
    g = (y[0]**2 + y[1]**2) ** sigma
    return (q_xixi - q + 1j * alpha * (q / (2.0 * sigma) + xi * q_xi)
            - 1j * beta * q_xi + 1j * g * q_xi)


def robin_residual(y_end: np.ndarray, xi_end: float, alpha: float,
                   sigma: float) -> np.ndarray:
    """The two real components of ``-Q + i alpha (Q/(2 sigma) + xi Q_xi)``."""
    y1, y2, y3, y4 = y_end
    return np.array([
        -y1 - alpha / (2.0 * sigma) * y2 - alpha * xi_end * y4,
        -y2 + alpha / (2.0 * sigma) * y1 + alpha * xi_end * y3,
    ])


def _robin_jacobian(y_end: np.ndarray, xi_end: float, alpha: float,
                    sigma: float):
    y1, y2, y3, y4 = y_end
    J_y = np.array([
        [-1.0, -alpha / (2.0 * sigma), 0.0, -alpha * xi_end],
        [alpha / (2.0 * sigma), -1.0, alpha * xi_end, 0.0],
    ])
    J_alpha = np.array([
        -y2 / (2.0 * sigma) - xi_end * y4,
        y1 / (2.0 * sigma) + xi_end * y3,
    ])
    return J_y, J_alpha


# --- meshes and solution container -------------------------------------------

def clustered_mesh(length: float, n_intervals: int, stretch: float = 4.0,
                   side: str = "right") -> np.ndarray:
    """Nodes on [0, length] (or [-length, 0]) concentrated near the origin."""
    s = np.linspace(0.0, 1.0, n_intervals + 1)
    pts = length * np.sinh(stretch * s) / np.sinh(stretch)
    if side == "left":
        return -pts[::-1]
    return pts


@dataclass
class ProfileSolution:
    """Converged (or candidate) profile on the two matched truncations."""

    sigma: float
    alpha: float
    beta: float
    left_mesh: np.ndarray
    right_mesh: np.ndarray
    left_y: np.ndarray    # (4, len(left_mesh))
    right_y: np.ndarray   # (4, len(right_mesh))
    residual_norm: float = np.inf
    bc_residual: float = np.inf
    ode_residual: float = np.inf
    newton_iterations: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n_points(self) -> int:
        return len(self.left_mesh) + len(self.right_mesh)

    @property
    def domain(self) -> tuple[float, float]:
        return (float(self.left_mesh[0]), float(self.right_mesh[-1]))

    def merged(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(xi, Q, Q_xi) across both subdomains, interface point deduplicated."""
        xi = np.concatenate([self.left_mesh, self.right_mesh[1:]])
        q = np.concatenate([self.left_y[0] + 1j * self.left_y[1],
                            self.right_y[0, 1:] + 1j * self.right_y[1, 1:]])
        q_xi = np.concatenate([self.left_y[2] + 1j * self.left_y[3],
                               self.right_y[2, 1:] + 1j * self.right_y[3, 1:]])
        return xi, q, q_xi


# --- discrete system ----------------------------------------------------------

def _interval_arrays(mesh: np.ndarray, Y: np.ndarray, alpha: float,
                     beta: float, sigma: float):
    h = np.diff(mesh)
    x_i, x_ip = mesh[:-1], mesh[1:]
    y_i, y_ip = Y[:, :-1], Y[:, 1:]
    f_i = ode_rhs(x_i, y_i, alpha, beta, sigma)
    f_ip = ode_rhs(x_ip, y_ip, alpha, beta, sigma)
    x_m = 0.5 * (x_i + x_ip)
    y_m = 0.5 * (y_i + y_ip) - 0.125 * h * (f_ip - f_i)
    f_m = ode_rhs(x_m, y_m, alpha, beta, sigma)
    return h, x_i, x_m, x_ip, y_i, y_m, y_ip, f_i, f_m, f_ip


def _interval_residual(mesh, Y, alpha, beta, sigma) -> np.ndarray:
    h, _, _, _, y_i, _, y_ip, f_i, f_m, f_ip = _interval_arrays(
        mesh, Y, alpha, beta, sigma)
    return y_ip - y_i - (h / 6.0) * (f_i + 4.0 * f_m + f_ip)


def _boundary_residual(state) -> np.ndarray:
    (mesh_l, mesh_r, Y_l, Y_r, alpha, beta, sigma) = state
    rows = np.empty(10)
    rows[0:2] = robin_residual(Y_l[:, 0], mesh_l[0], alpha, sigma)
    rows[2:4] = robin_residual(Y_r[:, -1], mesh_r[-1], alpha, sigma)
    rows[4:8] = Y_l[:, -1] - Y_r[:, 0]
    rows[8] = Y_l[1, -1]
    rows[9] = (Y_l[0, -1] * Y_l[2, -1] + Y_l[1, -1] * Y_l[3, -1])
    return rows


def _full_residual(state) -> np.ndarray:
    mesh_l, mesh_r, Y_l, Y_r, alpha, beta, sigma = state
    F_l = _interval_residual(mesh_l, Y_l, alpha, beta, sigma)
    F_r = _interval_residual(mesh_r, Y_r, alpha, beta, sigma)
    return np.concatenate([F_l.ravel(order="F"), F_r.ravel(order="F"),
                           _boundary_residual(state)])


def _interval_jacobian_blocks(mesh, Y, alpha, beta, sigma):
    """Per-interval blocks dPhi/dy_i, dPhi/dy_{i+1} (4,4,m) and dPhi/dp (4,2,m)."""
    h, x_i, x_m, x_ip, y_i, y_m, y_ip, f_i, f_m, f_ip = _interval_arrays(
        mesh, Y, alpha, beta, sigma)
    A_i, P_i = ode_jacobian(x_i, y_i, alpha, beta, sigma)
    A_m, P_m = ode_jacobian(x_m, y_m, alpha, beta, sigma)
    A_ip, P_ip = ode_jacobian(x_ip, y_ip, alpha, beta, sigma)
    eye = np.eye(4)[:, :, None]
    dym_dyi = 0.5 * eye + 0.125 * h * A_i
    dym_dyip = 0.5 * eye - 0.125 * h * A_ip
    prod_i = np.einsum("abm,bcm->acm", A_m, dym_dyi)
    prod_ip = np.einsum("abm,bcm->acm", A_m, dym_dyip)
    B_i = -eye - (h / 6.0) * (A_i + 4.0 * prod_i)
    B_ip = eye - (h / 6.0) * (A_ip + 4.0 * prod_ip)
    dym_dp = -0.125 * h * (P_ip - P_i)
    prod_p = np.einsum("abm,bcm->acm", A_m, dym_dp)
    B_p = -(h / 6.0) * (P_i + 4.0 * (prod_p + P_m) + P_ip)
    return B_i, B_ip, B_p


def _block_entries(B: np.ndarray, row_base: int, col_base: int):
    """COO triplets for a (4, k, m) block laid out along the mesh."""
    _, k, m = B.shape
    rows = row_base + 4 * np.arange(m)[None, None, :] + np.arange(4)[:, None, None]
    cols = col_base + 4 * np.arange(m)[None, None, :] + np.arange(k)[None, :, None]
    rows, cols, vals = np.broadcast_arrays(rows, cols, B)
    return rows.ravel(), cols.ravel(), vals.ravel()


def _assemble_system(state):
    """Residual vector and sparse Jacobian of the full discrete system."""
    mesh_l, mesh_r, Y_l, Y_r, alpha, beta, sigma = state
    m_l, m_r = len(mesh_l) - 1, len(mesh_r) - 1
    n_l, n_r = 4 * (m_l + 1), 4 * (m_r + 1)
    size = n_l + n_r + 2
    col_alpha, col_beta = size - 2, size - 1

    F = _full_residual(state)

    rows_list, cols_list, vals_list = [], [], []

    def add(rows, cols, vals):
        rows_list.append(np.asarray(rows, dtype=np.int64).ravel())
        cols_list.append(np.asarray(cols, dtype=np.int64).ravel())
        vals_list.append(np.asarray(vals, dtype=float).ravel())

    for (mesh, Y, row0, col0, m) in (
            (mesh_l, Y_l, 0, 0, m_l),
            (mesh_r, Y_r, 4 * m_l, n_l, m_r)):
        B_i, B_ip, B_p = _interval_jacobian_blocks(mesh, Y, alpha, beta, sigma)
        add(*_block_entries(B_i, row0, col0))
        add(*_block_entries(B_ip, row0, col0 + 4))
        rows = row0 + 4 * np.arange(m)[None, None, :] + np.arange(4)[:, None, None]
        cols = np.array([col_alpha, col_beta])[None, :, None]
        rows_b, cols_b, vals_b = np.broadcast_arrays(rows, cols, B_p)
        add(rows_b, cols_b, vals_b)

    base = 4 * (m_l + m_r)
    # Robin rows at both far ends
    for (offset, node_col, y_end, xi_end) in (
            (0, 0, Y_l[:, 0], mesh_l[0]),
            (2, n_l + 4 * m_r, Y_r[:, -1], mesh_r[-1])):
        J_y, J_alpha = _robin_jacobian(y_end, xi_end, alpha, sigma)
        for r in range(2):
            add(np.full(4, base + offset + r), node_col + np.arange(4), J_y[r])
            add([base + offset + r], [col_alpha], [J_alpha[r]])
    # matching of the four unknowns at xi = 0
    left_last = 4 * m_l
    right_first = n_l
    for comp in range(4):
        add([base + 4 + comp], [left_last + comp], [1.0])
        add([base + 4 + comp], [right_first + comp], [-1.0])
    # gauge Im Q(0) = 0
    add([base + 8], [left_last + 1], [1.0])
    # peak condition (|Q|^2)_xi(0) = 0
    yl = Y_l[:, -1]
    add(np.full(4, base + 9), left_last + np.arange(4),
        [yl[2], yl[3], yl[0], yl[1]])

    J = sp.coo_matrix(
        (np.concatenate(vals_list),
         (np.concatenate(rows_list), np.concatenate(cols_list))),
        shape=(size, size)).tocsc()
    return F, J


def _pack(Y_l, Y_r, alpha, beta):
    return np.concatenate([Y_l.ravel(order="F"), Y_r.ravel(order="F"),
                           [alpha, beta]])


def _unpack(vec, n_left, n_right):
    n_l = 4 * n_left
    Y_l = vec[:n_l].reshape(4, n_left, order="F")
    Y_r = vec[n_l:n_l + 4 * n_right].reshape(4, n_right, order="F")
    return Y_l, Y_r, float(vec[-2]), float(vec[-1])


def _newton(mesh_l, mesh_r, Y_l, Y_r, alpha, beta, sigma,
            tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER):
    """Damped Newton on the discrete system; returns the updated unknowns."""
    n_left, n_right = len(mesh_l), len(mesh_r)
    vec = _pack(Y_l, Y_r, alpha, beta)

    def residual_of(v):
        yl, yr, al, be = _unpack(v, n_left, n_right)
        return _full_residual((mesh_l, mesh_r, yl, yr, al, be, sigma))

    for iteration in range(1, max_iter + 1):
        yl, yr, al, be = _unpack(vec, n_left, n_right)
        F, J = _assemble_system((mesh_l, mesh_r, yl, yr, al, be, sigma))
        norm_F = np.max(np.abs(F))
        if not np.isfinite(norm_F):
            raise ContinuationStepTooLarge(sigma, "non-finite residual")
        if norm_F < 1e-13:
            return yl, yr, al, be, float(norm_F), iteration
        delta = spla.spsolve(J, -F)
        if not np.all(np.isfinite(delta)):
            raise ContinuationStepTooLarge(sigma, "singular Jacobian")
        step_norm = np.max(np.abs(delta))
        merit0 = float(F @ F)
        lam = 1.0
        while True:
            trial = vec + lam * delta
            F_trial = residual_of(trial)
            merit = float(F_trial @ F_trial)
            if np.isfinite(merit) and merit <= (1.0 - 1e-4 * lam) * merit0:
                break
            lam *= 0.5
            if lam < ARMIJO_FLOOR:
                raise ContinuationStepTooLarge(
                    sigma, f"line search stalled at residual {norm_F:.2e}")
        vec = trial
        if step_norm < tol and lam == 1.0:
            yl, yr, al, be = _unpack(vec, n_left, n_right)
            F_final = residual_of(vec)
            return yl, yr, al, be, float(np.max(np.abs(F_final))), iteration
    raise ContinuationStepTooLarge(
        sigma, f"no convergence in {max_iter} iterations")


# --- interpolant residual and refinement --------------------------------------

_SAMPLE_POINTS = (0.25, 0.75)


def _interval_ode_residual(mesh, Y, alpha, beta, sigma) -> np.ndarray:
    """Max normalized residual of the quartic interpolant per interval."""
    h, x_i, x_m, x_ip, y_i, y_m, y_ip, f_i, f_m, f_ip = _interval_arrays(
        mesh, Y, alpha, beta, sigma)
    c0 = y_i
    c1 = h * f_i
    d1 = y_m - y_i - 0.5 * h * f_i
    d2 = y_ip - y_i - h * f_i
    d3 = h * (f_ip - f_i)
    c2 = 16.0 * d1 - 5.0 * d2 + d3
    c3 = -32.0 * d1 + 14.0 * d2 - 3.0 * d3
    c4 = 16.0 * d1 - 8.0 * d2 + 2.0 * d3
    worst = np.zeros(len(h))
    for s in _SAMPLE_POINTS:
        x_s = x_i + s * h
        P = c0 + c1 * s + c2 * s**2 + c3 * s**3 + c4 * s**4
        P_prime = (c1 + 2.0 * c2 * s + 3.0 * c3 * s**2 + 4.0 * c4 * s**3) / h
        f_s = ode_rhs(x_s, P, alpha, beta, sigma)
        scale = 1.0 + np.max(np.abs(f_s), axis=0)
        err = np.max(np.abs(P_prime - f_s), axis=0) / scale
        worst = np.maximum(worst, err)
    return worst


def _refine_mesh(mesh: np.ndarray, Y: np.ndarray, flags: np.ndarray):
    """Insert midpoints of flagged intervals; linear warm start for new nodes."""
    if not np.any(flags):
        return mesh, Y
    new_nodes = 0.5 * (mesh[:-1][flags] + mesh[1:][flags])
    merged = np.sort(np.concatenate([mesh, new_nodes]))
    new_Y = np.vstack([np.interp(merged, mesh, Y[c]) for c in range(4)])
    return merged, new_Y


# --- public solves --------------------------------------------------------------

def solution_ode_residual(sol: ProfileSolution) -> float:
    """Interpolant residual of a solution, max over both subdomains."""
    r_l = _interval_ode_residual(sol.left_mesh, sol.left_y, sol.alpha,
                                 sol.beta, sol.sigma)
    r_r = _interval_ode_residual(sol.right_mesh, sol.right_y, sol.alpha,
                                 sol.beta, sol.sigma)
    return float(max(r_l.max(), r_r.max()))


def boundary_residuals(sol: ProfileSolution) -> np.ndarray:
    """The ten side conditions evaluated on a solution."""
    return _boundary_residual((sol.left_mesh, sol.right_mesh, sol.left_y,
                               sol.right_y, sol.alpha, sol.beta, sol.sigma))


def assemble_and_solve(guess: ProfileSolution, sigma: float,
                       newton_tol: float = NEWTON_TOL,
                       ode_residual_target: float = 1e-6,
                       max_refinements: int = 3) -> ProfileSolution:
    """Newton-solve the collocation system at ``sigma`` from a warm start.

    After convergence the interpolant residual drives midpoint refinement
    until the target is met (or the mesh cap trips).
    """
    mesh_l = guess.left_mesh.copy()
    mesh_r = guess.right_mesh.copy()
    Y_l = guess.left_y.copy()
    Y_r = guess.right_y.copy()
    alpha, beta = guess.alpha, guess.beta
    iterations = 0
    for _ in range(max_refinements + 1):
        Y_l, Y_r, alpha, beta, res_norm, its = _newton(
            mesh_l, mesh_r, Y_l, Y_r, alpha, beta, sigma, tol=newton_tol)
        iterations += its
        r_l = _interval_ode_residual(mesh_l, Y_l, alpha, beta, sigma)
        r_r = _interval_ode_residual(mesh_r, Y_r, alpha, beta, sigma)
        worst = max(r_l.max(), r_r.max())
        if worst <= ode_residual_target:
            break
        if len(mesh_l) + len(mesh_r) >= MAX_MESH_POINTS:
            raise MeshExhausted(
                f"mesh cap {MAX_MESH_POINTS} reached with residual {worst:.2e}")
        mesh_l, Y_l = _refine_mesh(mesh_l, Y_l, r_l > ode_residual_target)
        mesh_r, Y_r = _refine_mesh(mesh_r, Y_r, r_r > ode_residual_target)
    sol = ProfileSolution(sigma=sigma, alpha=alpha, beta=beta,
                          left_mesh=mesh_l, right_mesh=mesh_r,
                          left_y=Y_l, right_y=Y_r,
                          residual_norm=res_norm,
                          newton_iterations=iterations)
    sol.bc_residual = float(np.max(np.abs(boundary_residuals(sol))))
    sol.ode_residual = solution_ode_residual(sol)
    return sol


# --- seeding -------------------------------------------------------------------

def _seed_values(xi: np.ndarray, sigma: float, alpha: float,
                 peak: float) -> np.ndarray:
    """Smooth bump with the decaying-branch tails on both sides."""
    shape = (1.0 + xi**2)
    q = peak * shape ** (-0.25 / sigma) * np.exp(-0.5j / alpha * np.log(shape))
    q_xi = q * (-0.5 / sigma - 1j / alpha) * xi / shape
    return np.vstack([q.real, q.imag, q_xi.real, q_xi.imag])


def analytic_seed(sigma: float = 2.0, alpha: float = 1.95, beta: float = 2.2,
                  peak: float = 1.5, domain: tuple[float, float] = DEFAULT_DOMAIN,
                  n_left: int = 2000, n_right: int = 2000,
                  stretch: float = 4.0) -> ProfileSolution:
    """Closed-form starting guess: algebraic bump matched to the tail branch."""
    A_L, A_R = -domain[0], domain[1]
    if A_L <= 0 or A_R <= 0:
        raise InvalidParameter("domain must straddle the origin")
    mesh_l = clustered_mesh(A_L, n_left, stretch, side="left")
    mesh_r = clustered_mesh(A_R, n_right, stretch, side="right")
    return ProfileSolution(sigma=sigma, alpha=alpha, beta=beta,
                           left_mesh=mesh_l, right_mesh=mesh_r,
                           left_y=_seed_values(mesh_l, sigma, alpha, peak),
                           right_y=_seed_values(mesh_r, sigma, alpha, peak))


def make_seed_from_simulation(extracted: ExtractedProfile,
                              alpha: float, beta: float,
                              domain: tuple[float, float] = DEFAULT_DOMAIN,
                              n_left: int = 2000, n_right: int = 2000,
                              trust_radius: float = 10.0,
                              stretch: float = 4.0) -> ProfileSolution:
    """Initial guess from an extracted late-time profile.

    Uses the extraction inside ``|xi| <= trust_radius`` and continues both
    tails with the decaying power-law branch matched at the trust edge.
    """
    sigma = extracted.sigma
    span = min(trust_radius, -extracted.eta[0], extracted.eta[-1])
    center = int(np.argmin(np.abs(extracted.eta)))
    mag = np.abs(extracted.values)
    phase = unwrap_from_center(np.angle(extracted.values), center)

    def seeded(xi):
        inside = np.abs(xi) <= span
        q = np.empty(len(xi), dtype=complex)
        q[inside] = (np.interp(xi[inside], extracted.eta, mag)
                     * np.exp(1j * np.interp(xi[inside], extracted.eta, phase)))
        for sign in (-1.0, 1.0):
            out = (~inside) & (np.sign(xi) == sign)
            if not np.any(out):
                continue
            edge_mag = float(np.interp(sign * span, extracted.eta, mag))
            edge_phase = float(np.interp(sign * span, extracted.eta, phase))
            ratio = np.abs(xi[out]) / span
            q[out] = (edge_mag * ratio ** (-0.5 / sigma)
                      * np.exp(1j * (edge_phase - np.log(ratio) / alpha)))
        return q

    A_L, A_R = -domain[0], domain[1]
    mesh_l = clustered_mesh(A_L, n_left, stretch, side="left")
    mesh_r = clustered_mesh(A_R, n_right, stretch, side="right")

    def pack(mesh):
        q = seeded(mesh)
        q_xi = np.gradient(q, mesh)
        return np.vstack([q.real, q.imag, q_xi.real, q_xi.imag])

    return ProfileSolution(sigma=sigma, alpha=alpha, beta=beta,
                           left_mesh=mesh_l, right_mesh=mesh_r,
                           left_y=pack(mesh_l), right_y=pack(mesh_r))


# --- continuation ----------------------------------------------------------------

_BRACKETS = ((1.3, 2.0, 0.05), (1.2, 1.3, 0.01), (1.08, 1.2, 0.005))


@dataclass
class ContinuationSchedule:
    """Strictly decreasing sigma targets respecting the bracketed step caps."""

    sigmas: list[float]

    def __post_init__(self):
        vals = list(self.sigmas)
        if len(vals) < 1:
            raise InvalidParameter("schedule must contain at least one sigma")
        if any(s2 >= s1 for s1, s2 in zip(vals, vals[1:])):
            raise InvalidParameter("schedule must be strictly decreasing")
        if vals[-1] < 1.08 - 1e-9 or vals[0] > 2.0 + 1e-9:
            raise InvalidParameter("sigma must stay within [1.08, 2.0]")
        for s1, s2 in zip(vals, vals[1:]):
            step = s1 - s2
            cap = next(c for lo, hi, c in _BRACKETS
                       if lo - 1e-9 <= s2 < hi + 1e-9)
            if step > cap + 1e-9:
                raise InvalidParameter(
                    f"step {step:.3f} into sigma={s2:.3f} exceeds the "
                    f"bracket cap {cap}")


def paper_schedule(target: float = 1.08) -> ContinuationSchedule:
    """Targets from 2.0 down to ``target`` with steps 0.05 / 0.01 / 0.005."""
    if not 1.08 - 1e-9 <= target <= 2.0:
        raise InvalidParameter(f"target must lie in [1.08, 2], got {target}")
    milli = 2000
    values = [milli]
    while milli > round(target * 1000):
        if milli > 1300:
            milli -= 50
        elif milli > 1200:
            milli -= 10
        else:
            milli -= 5
        if milli < round(target * 1000):
            milli = round(target * 1000)
        values.append(milli)
    return ContinuationSchedule([v / 1000.0 for v in values])


def _grow_domain(sol: ProfileSolution, new_domain: tuple[float, float],
                 points_per_unit: float, stretch: float) -> ProfileSolution:
    """Pad a converged solution onto a larger truncation with branch tails."""
    sigma, alpha = sol.sigma, sol.alpha
    xi_old, q_old, _ = sol.merged()
    center = int(np.argmin(np.abs(xi_old)))
    mag = np.abs(q_old)
    phase = unwrap_from_center(np.angle(q_old), center)

    A_L, A_R = -new_domain[0], new_domain[1]
    n_left = max(len(sol.left_mesh) - 1, int(A_L * points_per_unit))
    n_right = max(len(sol.right_mesh) - 1, int(A_R * points_per_unit))
    mesh_l = clustered_mesh(A_L, n_left, stretch, side="left")
    mesh_r = clustered_mesh(A_R, n_right, stretch, side="right")

    lo, hi = xi_old[0], xi_old[-1]

    def values_on(mesh):
        inside = (mesh >= lo) & (mesh <= hi)
        q = np.empty(len(mesh), dtype=complex)
        q[inside] = (np.interp(mesh[inside], xi_old, mag)
                     * np.exp(1j * np.interp(mesh[inside], xi_old, phase)))
        for sign, edge in ((-1.0, lo), (1.0, hi)):
            out = (~inside) & (np.sign(mesh) == sign)
            if not np.any(out):
                continue
            edge_mag = mag[0] if sign < 0 else mag[-1]
            edge_phase = phase[0] if sign < 0 else phase[-1]
            ratio = np.abs(mesh[out] / edge)
            q[out] = (edge_mag * ratio ** (-0.5 / sigma)
                      * np.exp(1j * (edge_phase - np.log(ratio) / alpha)))
        q_xi = np.gradient(q, mesh)
        return np.vstack([q.real, q.imag, q_xi.real, q_xi.imag])

    return ProfileSolution(sigma=sigma, alpha=sol.alpha, beta=sol.beta,
                           left_mesh=mesh_l, right_mesh=mesh_r,
                           left_y=values_on(mesh_l), right_y=values_on(mesh_r))


def continuation_run(schedule: ContinuationSchedule, seed: ProfileSolution,
                     wide_domain: tuple[float, float] = WIDE_DOMAIN,
                     growth_step: float = DOMAIN_GROWTH_STEP,
                     points_per_unit: float = 40.0,
                     stretch: float = 4.0,
                     min_sigma_step: float = 1e-3) -> list[ProfileSolution]:
    """Walk the sigma schedule with warm starts.

    The left truncation grows toward the wide domain before the chain
    descends below sigma = 1.3 (the profile structure spreads left there).
    Failed Newton solves halve the sigma step; exhaustion of the halving
    budget re-raises with the failing sigma recorded.
    """
    targets = list(schedule.sigmas)
    current = assemble_and_solve(seed, targets[0])
    results = [current]
    grown = current.domain[0] <= wide_domain[0] + 1e-9

    for target in targets[1:]:
        if not grown and target < 1.3 - 1e-9:
            domain = current.domain
            while domain[0] > wide_domain[0] + 1e-9 or domain[1] < wide_domain[1] - 1e-9:
                domain = (max(domain[0] - growth_step, wide_domain[0]),
                          min(domain[1] + growth_step, wide_domain[1]))
                padded = _grow_domain(current, domain, points_per_unit, stretch)
                current = assemble_and_solve(padded, current.sigma)
            results[-1] = current
            grown = True
        reached = current.sigma
        while reached > target + 1e-12:
            step = reached - target
            while True:
                attempt = max(target, reached - step)
                try:
                    trial = assemble_and_solve(current, attempt)
                    break
                except ContinuationStepTooLarge:
                    step /= 2.0
                    if step < min_sigma_step:
                        raise
            current = trial
            reached = attempt
        results.append(current)
    return results
