"""Quantum states on a uniform position grid and the Wigner transform.

States are complex amplitude vectors on a power-of-two grid; momentum-space
operations use the FFT dual grid. The Wigner transform is evaluated
spectrally on a band-limit-doubled grid, which makes the position marginal
and the normalization exact to roundoff (see ``wigner``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import erfc

from .errors import TruncationError

NORM_TOL = 1e-9


def _is_power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class PositionGrid:
    """Uniform grid x_i = x_min + i*dx, i = 0..n_points-1 (x_max excluded)."""

    n_points: int
    x_min: float
    x_max: float

    def __post_init__(self):
        if not _is_power_of_two(self.n_points):
            raise ValueError(f"n_points must be a power of two >= 2, got {self.n_points}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_points

    @cached_property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_points)

    def momenta(self, hbar: float) -> np.ndarray:
        """FFT-ordered momentum grid dual to this position grid."""
        return 2.0 * np.pi * hbar * np.fft.fftfreq(self.n_points, self.dx)

    def p_max(self, hbar: float) -> float:
        """Largest representable momentum magnitude, pi*hbar/dx."""
        return np.pi * hbar / self.dx

    def require_momentum_cover(self, p_extent: float, hbar: float) -> None:
        """Raise if the dual grid cannot hold dynamics reaching |p| = p_extent."""
        if self.p_max(hbar) <= p_extent:
            raise ValueError(
                f"momentum grid extends to {self.p_max(hbar):.3f} but the dynamics "
                f"needs more than {p_extent:.3f}; decrease dx or increase n_points"
            )


def default_grid() -> PositionGrid:
    """1024 points on [-8, 8]: the smallest power-of-two grid whose dual
    momentum grid (p_max ~ 20.1 at hbar = 0.1) covers the chaotic
    double-well phase space (|x| < 5, |p| < 20)."""
    return PositionGrid(n_points=1024, x_min=-8.0, x_max=8.0)


@dataclass
class WaveFunction:
    grid: PositionGrid
    amplitudes: np.ndarray = field(repr=False)
    hbar: float = 0.1

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.grid.n_points,):
            raise ValueError("amplitude count must match the grid")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.dx))

    def normalized(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.amplitudes / self.norm(), self.hbar)

    def density(self) -> np.ndarray:
        """|psi|^2 on the grid."""
        return np.abs(self.amplitudes) ** 2

    def boundary_density(self) -> float:
        """Probability mass in the outermost cell on each side."""
        d = self.density()
        return float((d[0] + d[-1]) * self.grid.dx)

    def momentum_edge_density(self) -> float:
        """Probability mass in the outermost momentum cells (aliasing monitor)."""
        pr = np.abs(np.fft.fft(self.amplitudes)) ** 2
        pr /= pr.sum()
        half = self.grid.n_points // 2
        return float(pr[half - 1] + pr[half] + pr[half + 1])


@dataclass(frozen=True)
class Moments:
    mean_x: float
    mean_p: float
    var_x: float
    var_p: float
    cov_xp: float


def coherent_state(grid: PositionGrid, x0: float, p0: float, hbar: float) -> WaveFunction:
    """Minimum-uncertainty Gaussian with centroid (x0, p0) and
    V_x = V_p = hbar/2, normalized on the grid.

    Raises
    ------
    TruncationError
        If the analytic probability mass outside the grid (in x or p)
        exceeds 1e-10.
    ValueError
        If x0 sits within 5 sigma of a grid edge.
    """
    sigma = np.sqrt(hbar / 2.0)
    if not (grid.x_min + 5 * sigma <= x0 <= grid.x_max - 5 * sigma):
        raise ValueError(
            f"centroid x0={x0} closer than 5 sigma to the grid edge "
            f"[{grid.x_min}, {grid.x_max}]"
        )
    # Gaussian tails outside the box, evaluated analytically (std of |psi|^2
    # is sigma in x and in p).
    def tail(dist):
        return 0.5 * erfc(dist / (np.sqrt(2.0) * sigma))

    outside = tail(x0 - grid.x_min) + tail(grid.x_max - x0)
    pmax = grid.p_max(hbar)
    outside += tail(p0 + pmax) + tail(pmax - p0)
    if outside > 1e-10:
        raise TruncationError(
            f"mass outside the grid is {outside:.2e} (> 1e-10) for "
            f"centroid ({x0}, {p0})"
        )
    x = grid.x
    psi = np.exp(-((x - x0) ** 2) / (4.0 * sigma**2) + 1j * p0 * (x - x0) / hbar)
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)
    return WaveFunction(grid, psi, hbar)


def moments(psi: WaveFunction) -> Moments:
    """Position moments by grid quadrature, momentum moments spectrally,
    symmetrized covariance Re<(x - <x>)(p - <p>)>."""
    x = psi.grid.x
    dx = psi.grid.dx
    prob = psi.density()
    mean_x = float(np.sum(x * prob) * dx)
    var_x = float(np.sum((x - mean_x) ** 2 * prob) * dx)

    p = psi.grid.momenta(psi.hbar)
    phi = np.fft.fft(psi.amplitudes)
    pr = np.abs(phi) ** 2
    pr /= pr.sum()
    mean_p = float(np.sum(p * pr))
    var_p = float(np.sum((p - mean_p) ** 2 * pr))

    p_psi = np.fft.ifft(p * phi)
    cov = float(
        np.real(np.sum(np.conj(psi.amplitudes) * (x - mean_x) * (p_psi - mean_p * psi.amplitudes)) * dx)
    )
    return Moments(mean_x, mean_p, var_x, var_p, cov)


@dataclass
class WignerGrid:
    """Real-valued phase-space grid; also hosts classical densities.

    values[i, j] is the density at (x0 + i*dx, p0 + j*dp), row-major in x.
    """

    values: np.ndarray = field(repr=False)
    x0: float
    dx: float
    p0: float
    dp: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("values must be a 2-D array")

    @property
    def n_x(self) -> int:
        return self.values.shape[0]

    @property
    def n_p(self) -> int:
        return self.values.shape[1]

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n_x)

    @property
    def p(self) -> np.ndarray:
        return self.p0 + self.dp * np.arange(self.n_p)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dp

    def integral(self) -> float:
        return float(self.values.sum() * self.cell_area)

    def marginal_x(self) -> np.ndarray:
        return self.values.sum(axis=1) * self.dp

    def marginal_p(self) -> np.ndarray:
        return self.values.sum(axis=0) * self.dx

    def moments(self) -> Moments:
        w = self.values * self.cell_area
        mx = float(np.sum(w.sum(axis=1) * self.x))
        mp = float(np.sum(w.sum(axis=0) * self.p))
        vx = float(np.sum(w.sum(axis=1) * (self.x - mx) ** 2))
        vp = float(np.sum(w.sum(axis=0) * (self.p - mp) ** 2))
        cov = float(np.sum(w * np.outer(self.x - mx, self.p - mp)))
        return Moments(mx, mp, vx, vp, cov)

    def same_axes(self, other: "WignerGrid", tol: float = 1e-12) -> bool:
        return (
            self.values.shape == other.values.shape
            and abs(self.x0 - other.x0) < tol
            and abs(self.dx - other.dx) < tol
            and abs(self.p0 - other.p0) < tol
            and abs(self.dp - other.dp) < tol
        )


def _interpolate_double(psi: np.ndarray) -> np.ndarray:
    """Band-limited interpolation onto the midpoint-refined grid (2n points).

    Exact for states respecting the grid's momentum Nyquist bound; the
    Nyquist coefficient is split evenly between +/- bins to keep real
    states real.
    """
    n = psi.size
    half = n // 2
    spec = np.fft.fft(psi)
    fine = np.zeros(2 * n, dtype=complex)
    fine[:half] = spec[:half]
    fine[2 * n - half + 1:] = spec[half + 1:]
    fine[half] = 0.5 * spec[half]
    fine[2 * n - half] = 0.5 * spec[half]
    return np.fft.ifft(fine) * 2.0


def _wigner_from_pairs(g: np.ndarray, dy: float, hbar: float, n_p: int) -> np.ndarray:
    """Finish a Wigner evaluation from the correlation rows
    g[i, j] = psi*(x_i + y_j) psi(x_i - y_j), y_j = (j - n)*dy, j = 0..2n-1.

    Returns the (n_x, n_p) real array with the momentum axis in natural
    order. n_p = 2n gives the full dual grid; n_p = n decimates by two,
    which is exact because the aliased y = +/- (n*dy) correlation row is
    identically zero (one factor always falls outside the grid).
    """
    two_n = g.shape[1]
    w = np.fft.ifft(g, axis=1) * two_n
    signs = np.where(np.arange(two_n) % 2 == 0, 1.0, -1.0)
    w = w.real * signs[None, :] * (dy / (np.pi * hbar))
    if n_p == two_n:
        return np.fft.fftshift(w, axes=1)
    if n_p * 2 == two_n:
        return np.fft.fftshift(w[:, ::2], axes=1)
    raise ValueError(f"n_p must be {two_n // 2} or {two_n}, got {n_p}")


def wigner(psi: WaveFunction, n_p: int | None = None) -> WignerGrid:
    """Wigner transform W(x, p) = (1/pi hbar) Int psi*(x+y) psi(x-y)
    exp(2ipy/hbar) dy, evaluated by an FFT over y at each grid point.

    The y-integral uses the midpoint-refined state (spacing dx/2) over the
    full window |y| <= L/2 outside which the correlation vanishes exactly,
    so Int W dp = |psi(x)|^2 holds to roundoff at every grid point.

    Parameters
    ----------
    n_p : number of momentum points; the grid's n_points (default) or twice
        that. Either way the axis spans [-pi hbar/dx, pi hbar/dx).
    """
    n = psi.grid.n_points
    if n_p is None:
        n_p = n
    fine = _interpolate_double(psi.amplitudes)
    padded = np.zeros(4 * n, dtype=complex)
    padded[n:3 * n] = fine
    i = np.arange(n)[:, None]
    j = np.arange(2 * n)[None, :]
    g = np.conj(padded[2 * i + j]) * padded[2 * i - j + 2 * n]
    dy = psi.grid.dx / 2.0
    values = _wigner_from_pairs(g, dy, psi.hbar, n_p)
    dp = np.pi * psi.hbar / (2 * n * dy) * (2 * n // n_p)
    p0 = -(n_p // 2) * dp
    return WignerGrid(values=values, x0=psi.grid.x_min, dx=psi.grid.dx, p0=p0, dp=dp)


def wigner_density(rho: np.ndarray, grid: PositionGrid, hbar: float,
                   n_p: int | None = None) -> WignerGrid:
    """Wigner transform of a position-representation density matrix
    rho[i, j] = <x_i|rho|x_j> with trace sum(diag)*dx = 1.

    Intended for reduced grids (n <= 512); memory grows as n^2.
    """
    n = grid.n_points
    if rho.shape != (n, n):
        raise ValueError("density matrix shape must match the grid")
    if n_p is None:
        n_p = n
    half = n // 2

    spec = np.fft.fft2(rho)
    padded_rows = np.zeros((2 * n, n), dtype=complex)
    padded_rows[:half] = spec[:half]
    padded_rows[2 * n - half + 1:] = spec[half + 1:]
    padded_rows[half] = 0.5 * spec[half]
    padded_rows[2 * n - half] = 0.5 * spec[half]
    full = np.zeros((2 * n, 2 * n), dtype=complex)
    full[:, :half] = padded_rows[:, :half]
    full[:, 2 * n - half + 1:] = padded_rows[:, half + 1:]
    full[:, half] = 0.5 * padded_rows[:, half]
    full[:, 2 * n - half] = 0.5 * padded_rows[:, half]
    fine = np.fft.ifft2(full) * 4.0

    pad = np.zeros((4 * n, 4 * n), dtype=complex)
    pad[n:3 * n, n:3 * n] = fine
    i = np.arange(n)[:, None]
    j = np.arange(2 * n)[None, :]
    m = j - n
    # rho(x - y, x + y) matches conj(psi(x + y)) psi(x - y) for pure states.
    g = pad[2 * i - m + n, 2 * i + m + n]
    dy = grid.dx / 2.0
    values = _wigner_from_pairs(g, dy, hbar, n_p)
    dp = np.pi * hbar / (2 * n * dy) * (2 * n // n_p)
    p0 = -(n_p // 2) * dp
    return WignerGrid(values=values, x0=grid.x_min, dx=grid.dx, p0=p0, dp=dp)
