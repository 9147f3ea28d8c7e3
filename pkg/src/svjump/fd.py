"""Space grid, jump quadrature grid and the IMEX finite-difference operators.

One backward time step solves, for each factor node, the tridiagonal system

    A u^n = B u^{n+1} + d

where A discretizes the convection-diffusion part implicitly (central or
upwind differencing), B applies the explicit jump quadrature

    (B v)_i = v_i + h dx * ( sum_{|l|<=L} nu(l dx) v_{i+l}  -  Lambda v_i ),

and d carries the numerical boundary values (payoff by default): the two
A-edge terms and the jump-overhang sums over points beyond the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.fft import next_fast_len, rfft, irfft

from .errors import GridError, ShapeError, SingularError, TolError
from .model import MarketModel, OptionContract, mu_eff

__all__ = [
    "SpaceGrid",
    "LevyGrid",
    "TriDiag",
    "build_space_grid",
    "build_levy_grid",
    "assemble_A",
    "solve_tridiag",
    "apply_B",
    "boundary_vector",
]

# half-widths of the localization interval used for the reference experiment
# scale (T*theta_y = 0.02); wider problems scale by sqrt(T*theta_y / 0.02)
BASE_WIDTH_MINUS = 1.59
BASE_WIDTH_PLUS = 1.93
BASE_VARIANCE_SCALE = 0.5 * 0.04


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform log-price grid x_i = x0 + i*dx, i in [-m, m]."""

    x0: float
    dx: float
    m: int

    @property
    def size(self) -> int:
        return 2 * self.m + 1

    @property
    def points(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(-self.m, self.m + 1)

    def x_at(self, i):
        """Grid coordinate for (possibly out-of-range) signed index i."""
        return self.x0 + self.dx * np.asarray(i, dtype=float)


def build_space_grid(model: MarketModel, contract: OptionContract, dx: float,
                     width: Optional[tuple] = None) -> SpaceGrid:
    """Symmetric grid containing [x0 - c_minus, x0 + c_plus].

    The default half-widths are the base localization interval scaled by
    sqrt(T*theta_y / 0.02); pass ``width=(c_minus, c_plus)`` to override.
    """
    if not dx > 0.0:
        raise GridError(f"dx must be positive, got {dx}")
    if width is None:
        scale = math.sqrt(contract.maturity * model.theta_y / BASE_VARIANCE_SCALE)
        width = (BASE_WIDTH_MINUS * scale, BASE_WIDTH_PLUS * scale)
    c_minus, c_plus = width
    m = int(math.ceil(max(c_minus, c_plus) / dx))
    return SpaceGrid(model.x0, dx, m)


@dataclass
class LevyGrid:
    """Trapezoid weights of the Levy density on the space grid.

    ``nu_values[l + halfwidth] = nu(l*dx)`` for |l| <= halfwidth; the
    quadrature weights are ``w_l = nu(l*dx)*dx`` and ``lam_sum`` is
    Lambda = sum_l nu(l*dx).
    """

    halfwidth: int
    dx: float
    nu_values: np.ndarray
    _kernels: dict = field(default_factory=dict, repr=False)

    @property
    def weights(self) -> np.ndarray:
        return self.nu_values * self.dx

    @property
    def lam_sum(self) -> float:
        return float(self.nu_values.sum())

    def offsets(self) -> np.ndarray:
        return np.arange(-self.halfwidth, self.halfwidth + 1)

    def _kernel(self, nfft: int) -> np.ndarray:
        # rfft of the reversed stencil, cached per transform length
        ker = self._kernels.get(nfft)
        if ker is None:
            pad = np.zeros(nfft)
            pad[: 2 * self.halfwidth + 1] = self.nu_values[::-1]
            ker = rfft(pad)
            self._kernels[nfft] = ker
        return ker


def build_levy_grid(jump_law, dx: float, tol: float = 1e-7) -> LevyGrid:
    """Smallest halfwidth L with |sum_{|l|<=L} nu(l dx) dx - intensity| <= tol."""
    if not tol > 0.0:
        raise TolError(f"tol must be positive, got {tol}")
    lam = jump_law.intensity
    if lam == 0.0:
        return LevyGrid(0, dx, np.zeros(1))
    lo, hi = 0, 1
    # grow until the tolerance is met, then binary-search the smallest L
    while True:
        s = float(np.sum(jump_law.density(np.arange(-hi, hi + 1) * dx))) * dx
        if abs(s - lam) <= tol:
            break
        if hi * dx > 200.0:  # ~ beyond any realistic jump support
            raise TolError(f"tolerance {tol} unreachable at dx={dx} (residual {abs(s - lam):.3e})")
        lo, hi = hi, hi * 2
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        s = float(np.sum(jump_law.density(np.arange(-mid, mid + 1) * dx))) * dx
        if abs(s - lam) <= tol:
            hi = mid
        else:
            lo = mid
    return LevyGrid(hi, dx, jump_law.density(np.arange(-hi, hi + 1) * dx))


@dataclass(frozen=True)
class TriDiag:
    """Toeplitz tridiagonal operator of one IMEX step.

    central: sub = alpha - beta, diag = 1 + 2 beta, sup = -(alpha + beta)
    upwind:  sub = -beta - |alpha| 1{alpha<0}, diag = 1 + 2 beta + |alpha|,
             sup = -beta - |alpha| 1{alpha>0}
    Row sums are 1 for both schemes.
    """

    alpha: float
    beta: float
    size: int
    scheme: str = "central"

    @property
    def sub(self) -> float:
        if self.scheme == "central":
            return self.alpha - self.beta
        return -self.beta - (abs(self.alpha) if self.alpha < 0 else 0.0)

    @property
    def diag(self) -> float:
        if self.scheme == "central":
            return 1.0 + 2.0 * self.beta
        return 1.0 + 2.0 * self.beta + abs(self.alpha)

    @property
    def sup(self) -> float:
        if self.scheme == "central":
            return -(self.alpha + self.beta)
        return -self.beta - (abs(self.alpha) if self.alpha > 0 else 0.0)

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.size, self.size))
        np.fill_diagonal(a, self.diag)
        idx = np.arange(self.size - 1)
        a[idx + 1, idx] = self.sub
        a[idx, idx + 1] = self.sup
        return a

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        out = self.diag * v
        out[1:] += self.sub * v[:-1]
        out[:-1] += self.sup * v[1:]
        return out


def assemble_A(model: MarketModel, y: float, r: float, t: float, h: float,
               grid: SpaceGrid, scheme: str = "central") -> TriDiag:
    """Implicit operator for factor state (y, r) at time t with step h."""
    if scheme not in ("central", "upwind"):
        raise ValueError(f"unknown scheme {scheme!r}")
    mu = float(mu_eff(y, r, t, model))
    beta = 0.5 * h / grid.dx**2 * (model.rho3**2 * y if model.rho3 is not None
                                   else (1 - model.rho1**2 - model.rho2**2) * y)
    if scheme == "central":
        alpha = 0.5 * h / grid.dx * mu
    else:
        alpha = h / grid.dx * mu
    return TriDiag(alpha, beta, grid.size, scheme)


def _thomas_batch(sub, diag, sup, rhs: np.ndarray) -> np.ndarray:
    """Thomas solve of B independent Toeplitz tridiagonal systems.

    sub/diag/sup: scalars or arrays of shape (B,); rhs: (B, G).
    """
    rhs = np.asarray(rhs, dtype=float)
    b, g = rhs.shape
    sub = np.broadcast_to(np.asarray(sub, float), (b,))
    diag = np.broadcast_to(np.asarray(diag, float), (b,))
    sup = np.broadcast_to(np.asarray(sup, float), (b,))
    cp = np.empty((g, b))
    dp = np.empty((g, b))
    piv = diag
    if np.any(np.abs(piv) < 1e-300):
        raise SingularError("zero pivot in tridiagonal solve")
    cp[0] = sup / piv
    dp[0] = rhs[:, 0] / piv
    for i in range(1, g):
        piv = diag - sub * cp[i - 1]
        if np.any(np.abs(piv) < 1e-300):
            raise SingularError(f"pivot underflow at row {i}")
        cp[i] = sup / piv
        dp[i] = (rhs[:, i] - sub * dp[i - 1]) / piv
    out = np.empty((g, b))
    out[g - 1] = dp[g - 1]
    for i in range(g - 2, -1, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]
    return np.ascontiguousarray(out.T)


def solve_tridiag(A: TriDiag, rhs) -> np.ndarray:
    """Solve A u = rhs by Thomas elimination (O(size))."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[-1] != A.size:
        raise ShapeError(f"rhs length {rhs.shape[-1]} != operator size {A.size}")
    squeeze = rhs.ndim == 1
    out = _thomas_batch(A.sub, A.diag, A.sup, rhs.reshape(-1, A.size))
    return out[0] if squeeze else out.reshape(rhs.shape)


def _conv_nu_fft(values2d: np.ndarray, levy: LevyGrid, chunk: int = 4096) -> np.ndarray:
    """sum_{|l|<=L} nu(l dx) v_{i+l} with zero padding, via real FFT."""
    b, g = values2d.shape
    big_l = levy.halfwidth
    nfft = next_fast_len(g + 2 * big_l)
    ker = levy._kernel(nfft)
    out = np.empty_like(values2d)
    for s in range(0, b, chunk):
        blk = values2d[s:s + chunk]
        pad = np.zeros((blk.shape[0], nfft))
        pad[:, :g] = blk
        conv = irfft(rfft(pad, axis=1) * ker[None, :], n=nfft, axis=1)
        out[s:s + chunk] = conv[:, big_l:big_l + g]
    return out


def _conv_nu_direct(values2d: np.ndarray, levy: LevyGrid) -> np.ndarray:
    b, g = values2d.shape
    big_l = levy.halfwidth
    pad = np.zeros((b, g + 2 * big_l))
    pad[:, big_l:big_l + g] = values2d
    out = np.zeros_like(values2d)
    for pos, nu_l in enumerate(levy.nu_values):
        if nu_l != 0.0:
            out += nu_l * pad[:, pos:pos + g]
    return out


def apply_B(values, levy: LevyGrid, h: float, boundary: Optional[np.ndarray] = None,
            method: str = "fft") -> np.ndarray:
    """Explicit jump operator (B v)_i = v_i + h dx (sum_l nu_l v_{i+l} - Lambda v_i).

    Out-of-grid values are zero unless ``boundary=(left, right)`` supplies the
    ``halfwidth`` values on each side.  Accepts a vector or a (batch, size)
    matrix; the FFT and direct paths agree to ~1e-10 absolute.
    """
    v = np.asarray(values, dtype=float)
    squeeze = v.ndim == 1
    v2 = v.reshape(1, -1) if squeeze else v
    if levy.halfwidth == 0 or levy.lam_sum == 0.0:
        return v.copy()
    big_l = levy.halfwidth
    if boundary is not None:
        left, right = boundary
        if len(left) != big_l or len(right) != big_l:
            raise ShapeError("boundary pads must have length levy.halfwidth")
        v2 = np.hstack([np.broadcast_to(left, (v2.shape[0], big_l)), v2,
                        np.broadcast_to(right, (v2.shape[0], big_l))])
    conv = _conv_nu_fft(v2, levy) if method == "fft" else _conv_nu_direct(v2, levy)
    if boundary is not None:
        conv = conv[:, big_l:-big_l]
        v2 = v2[:, big_l:-big_l]
    out = v2 + h * levy.dx * (conv - levy.lam_sum * v2)
    return out[0] if squeeze else out


def jump_overhang(grid: SpaceGrid, levy: LevyGrid, h: float,
                  boundary_values: Callable[[np.ndarray], np.ndarray],
                  literal_ranges: bool = False) -> np.ndarray:
    """Jump-quadrature contributions of boundary points beyond the grid.

    Row i collects h dx * sum over |l| <= L with |i+l| > m of nu(l dx) * b(x_{i+l}).
    With ``literal_ranges`` the top row i=m is left at zero (the asymmetric
    index-range variant); the default completes the ranges symmetrically.
    """
    m, g = grid.m, grid.size
    big_l = levy.halfwidth
    out = np.zeros(g)
    if big_l == 0:
        return out
    offs = levy.offsets()
    for row in range(big_l):
        # lower edge, i = -m + row: contributions from i+l < -m
        i = -m + row
        mask = offs < -m - i
        out[row] = np.sum(levy.nu_values[mask] * boundary_values(grid.x_at(i + offs[mask])))
        # upper edge, i = m - row: contributions from i+l > m
        i = m - row
        if row == 0 and literal_ranges:
            continue
        mask = offs > m - i
        out[g - 1 - row] = np.sum(levy.nu_values[mask] * boundary_values(grid.x_at(i + offs[mask])))
    return h * levy.dx * out


def boundary_vector(A: TriDiag, grid: SpaceGrid, levy: LevyGrid, h: float,
                    boundary_fn: Callable[[float, np.ndarray], np.ndarray],
                    t_impl: float, t_expl: float,
                    literal_ranges: bool = False) -> np.ndarray:
    """Boundary vector d of one IMEX step.

    The two A-edge terms use the boundary at the implicit time ``t_impl``
    (entries (beta -+ alpha) * b(x_{-m-1}), ... * b(x_{m+1})); the jump
    overhang uses the explicit time ``t_expl``.
    """
    d = jump_overhang(grid, levy, h, lambda xs: boundary_fn(t_expl, xs), literal_ranges)
    m = grid.m
    d[0] += (-A.sub) * np.asarray(boundary_fn(t_impl, grid.x_at(np.array([-m - 1]))))[0]
    d[-1] += (-A.sup) * np.asarray(boundary_fn(t_impl, grid.x_at(np.array([m + 1]))))[0]
    return d
