"""Semi-closed-form reference machinery.

The affine transform E[exp(z Y_t + w int_0^t Y ds)] = exp(y0 psi(t) + theta
kappa phi(t)) of the square-root factor solves a scalar complex Riccati
equation; the characteristic function of the log price under deterministic
rates follows from it by the correlation/drift mapping, times the standard
compound-Poisson factor.  On top sit a damped-transform FFT pricer
(Carr-Madan), the Vasicek bond factor, Black-Scholes implied volatility and
the convergence-ratio / early-exercise-premium diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.fft import fft
from scipy.stats import norm

from .errors import ArbError, DegenerateError, DomainError, ScopeError
from .hybrid import HybridResult, NumericalConfig, extract_exercise_boundary
from .hybrid import price as hybrid_price
from .model import MarketModel, OptionContract
from .montecarlo import McConfig, McEstimate, simulate_paths

__all__ = [
    "RiccatiSolution",
    "riccati_solve",
    "bates_cf",
    "carr_madan_price",
    "vasicek_bond_factor",
    "black_scholes_price",
    "implied_vol",
    "convergence_ratio",
    "early_exercise_premium_check",
    "EepCheck",
]


# -- affine transform ------------------------------------------------------


def _riccati_closed_form(z, w, t, kappa, sigma):
    """psi(t), phi(t)=int_0^t psi for psi' = (sigma^2/2) psi^2 - kappa psi + w, psi(0)=z.

    Continuous-branch formulation: with roots r_pm = (kappa +- d)/sigma^2 of
    the stationary quadratic, d = sqrt(kappa^2 - 2 sigma^2 w),

        psi = (r_- - r_+ v0 e^{-dt}) / (1 - v0 e^{-dt}),   v0 = (z-r_-)/(z-r_+),
        phi = r_- t - (2/sigma^2) log((1 - v0 e^{-dt}) / (1 - v0)),

    which keeps the log argument away from the cut for transform arguments in
    the left half-plane and along damped Fourier contours.
    """
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    t = np.asarray(t, dtype=float)
    sig2 = sigma * sigma
    d = np.sqrt(kappa * kappa - 2.0 * sig2 * w)
    r_m = (kappa - d) / sig2
    r_p = (kappa + d) / sig2
    small_d = np.abs(d) < 1e-14
    at_fixed_point = np.abs(z - r_p) < 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        v0 = np.where(at_fixed_point, 0.0, (z - r_m) / np.where(at_fixed_point, 1.0, z - r_p))
        e = np.exp(-d * t)
        one_m = 1.0 - v0 * e
        psi = (r_m - r_p * v0 * e) / one_m
        phi = r_m * t - (2.0 / sig2) * np.log(one_m / (1.0 - v0))
    if np.any(small_d):
        # double root r = kappa/sigma^2: psi = r + (z-r)/(1 - (sigma^2/2)(z-r) t)
        r = kappa / sig2
        den = 1.0 - 0.5 * sig2 * (z - r) * t
        psi = np.where(small_d, r + (z - r) / den, psi)
        phi = np.where(small_d, r * t + (2.0 / sig2) * np.log(den), phi)
    if np.any(at_fixed_point):
        psi = np.where(at_fixed_point, z, psi)
        phi = np.where(at_fixed_point, z * t, phi)
    return psi, phi


@dataclass(frozen=True)
class RiccatiSolution:
    """Transform E[e^{z Y_t + w int Y}] = exp(y0 psi(t) + theta kappa phi(t))."""

    z: complex
    w: complex
    kappa: float
    sigma: float
    theta: float

    def psi(self, t):
        return _riccati_closed_form(self.z, self.w, t, self.kappa, self.sigma)[0]

    def phi(self, t):
        return _riccati_closed_form(self.z, self.w, t, self.kappa, self.sigma)[1]

    def transform(self, t, y0: float):
        psi, phi = _riccati_closed_form(self.z, self.w, t, self.kappa, self.sigma)
        return np.exp(y0 * psi + self.theta * self.kappa * phi)


def riccati_solve(z, w, kappa: float, sigma: float, theta: float) -> RiccatiSolution:
    """Closed-form Riccati solution for transform arguments with Re <= 0."""
    z = complex(z)
    w = complex(w)
    if z.real > 1e-12 or w.real > 1e-12:
        raise DomainError(f"transform arguments need nonpositive real parts, got z={z}, w={w}")
    return RiccatiSolution(z, w, kappa, sigma, theta)


# -- characteristic function and FFT pricer --------------------------------


def bates_cf(u, T: float, model: MarketModel):
    """E[e^{i u log S_T}] under deterministic rates (sigma_r must be 0).

    Accepts real arrays or complex u (damped transform contours).
    """
    if model.sigma_r != 0.0:
        raise DomainError("characteristic function implemented for sigma_r=0 only")
    model = model.validated() if model.rho3 is None else model
    u = np.asarray(u, dtype=complex)
    kap, sig, th, rho = model.kappa_y, model.sigma_y, model.theta_y, model.rho1
    r, dlt = model.r0, model.dividend
    c_bar = r - dlt - rho * kap * th / sig
    lam1 = 1j * u * rho / sig
    w = 1j * u * (rho * kap / sig - 0.5) - 0.5 * u * u * (1.0 - rho * rho)
    psi, phi = _riccati_closed_form(lam1, w, T, kap, sig)
    out = np.exp(1j * u * (model.x0 + c_bar * T)
                 + model.y0 * (psi - 1j * u * rho / sig) + th * kap * phi)
    if model.lam > 0.0:
        mu_j = model.jump_law.log_jump_mean
        out = out * np.exp(model.lam * T * (np.exp(1j * u * mu_j
                                                   - 0.5 * model.eta_j**2 * u * u) - 1.0))
    return out


@dataclass(frozen=True)
class CarrMadanConfig:
    alpha: float = 1.5
    n_points: int = 2**14
    eta: float = 0.25  # frequency spacing; log-strike spacing is 2 pi / (n eta)


def _carr_madan_curve(model: MarketModel, T: float, cm: CarrMadanConfig):
    """Call prices on the FFT log-strike grid (k_grid, calls)."""
    n, eta, alpha = cm.n_points, cm.eta, cm.alpha
    disc = math.exp(-model.r0 * T)
    v = eta * np.arange(n)
    psi = disc * bates_cf(v - (alpha + 1.0) * 1j, T, model) \
        / (alpha**2 + alpha - v * v + 1j * (2.0 * alpha + 1.0) * v)
    lam_k = 2.0 * math.pi / (n * eta)
    b = 0.5 * n * lam_k
    simpson = (3.0 - (-1.0) ** np.arange(n)) / 3.0
    simpson[0] = 1.0 / 3.0
    x = psi * np.exp(1j * v * b) * eta * simpson
    k_grid = -b + lam_k * np.arange(n)
    calls = np.exp(-alpha * k_grid) / math.pi * np.real(fft(x))
    return k_grid, calls


def carr_madan_price(model: MarketModel, strike: float, maturity: float,
                     kind: str = "call", cm: Optional[CarrMadanConfig] = None) -> float:
    """Damped-transform FFT price of a European option (puts by parity)."""
    if model.sigma_r != 0.0:
        raise DomainError("Fourier reference requires sigma_r=0")
    cm = cm or CarrMadanConfig()
    k_grid, calls = _carr_madan_curve(model, maturity, cm)
    k = math.log(strike)
    i = int(np.searchsorted(k_grid, k)) - 1
    i = min(max(i, 1), len(k_grid) - 3)
    # 4-point Lagrange interpolation in log strike
    xs = k_grid[i - 1:i + 3]
    ys = calls[i - 1:i + 3]
    call = 0.0
    for a in range(4):
        w = 1.0
        for b_ in range(4):
            if a != b_:
                w *= (k - xs[b_]) / (xs[a] - xs[b_])
        call += w * ys[a]
    call = float(call)
    if kind == "call":
        return call
    forward = float(np.real(bates_cf(np.array([-1j]), maturity, model))[0])
    return call - math.exp(-model.r0 * maturity) * (forward - strike)


# -- Vasicek bond factor ----------------------------------------------------


def vasicek_bond_factor(t: float, r: float, maturity: float,
                        kappa_r: float, sigma_r: float) -> float:
    """E[exp(-sigma_r int_t^T Rds) | R_t = r] for the unit-vol OU factor."""
    if sigma_r == 0.0:
        return 1.0
    tau = maturity - t
    lam = (1.0 - math.exp(-kappa_r * tau)) / kappa_r
    return math.exp(-r * sigma_r * lam
                    - (sigma_r**2 / (2.0 * kappa_r**2)) * (lam - tau)
                    - (sigma_r**2 / (4.0 * kappa_r)) * lam**2)


# -- Black-Scholes and implied volatility -----------------------------------


def black_scholes_price(s0, strike, maturity, rate, dividend, sigma, kind="call"):
    """Forward-form Black-Scholes price with continuous dividend yield."""
    fwd = s0 * math.exp((rate - dividend) * maturity)
    disc = math.exp(-rate * maturity)
    if sigma <= 0.0:
        intrinsic = max(fwd - strike, 0.0) if kind == "call" else max(strike - fwd, 0.0)
        return disc * intrinsic
    v = sigma * math.sqrt(maturity)
    d1 = math.log(fwd / strike) / v + 0.5 * v
    d2 = d1 - v
    if kind == "call":
        return disc * (fwd * norm.cdf(d1) - strike * norm.cdf(d2))
    return disc * (strike * norm.cdf(-d2) - fwd * norm.cdf(-d1))


def implied_vol(price: float, s0: float, strike: float, maturity: float,
                rate: float, dividend: float, kind: str = "call",
                tol: float = 1e-10) -> float:
    """Black-Scholes implied volatility by safeguarded Newton/bisection.

    Returns 0.0 at the zero-volatility lower bound; raises :class:`ArbError`
    outside the static no-arbitrage bounds.
    """
    fwd = s0 * math.exp((rate - dividend) * maturity)
    disc = math.exp(-rate * maturity)
    lower = disc * (max(fwd - strike, 0.0) if kind == "call" else max(strike - fwd, 0.0))
    upper = disc * fwd if kind == "call" else disc * strike
    if price < lower - 1e-12 or price >= upper:
        raise ArbError(f"price {price} outside no-arbitrage bounds [{lower}, {upper})")
    if price <= lower + 1e-14:
        return 0.0
    lo, hi = 1e-9, 5.0
    while black_scholes_price(s0, strike, maturity, rate, dividend, hi, kind) < price:
        hi *= 2.0
        if hi > 100.0:
            raise ArbError("implied volatility above 100: price too close to its bound")
    sigma = 0.2
    for _ in range(100):
        val = black_scholes_price(s0, strike, maturity, rate, dividend, sigma, kind)
        if val > price:
            hi = sigma
        else:
            lo = sigma
        if abs(val - price) < tol:
            return sigma
        v = sigma * math.sqrt(maturity)
        d1 = math.log(fwd / strike) / v + 0.5 * v
        vega = disc * fwd * norm.pdf(d1) * math.sqrt(maturity)
        if vega > 1e-12:
            step = sigma - (val - price) / vega
            sigma = step if lo < step < hi else 0.5 * (lo + hi)
        else:
            sigma = 0.5 * (lo + hi)
    return sigma


# -- convergence diagnostics -------------------------------------------------


def convergence_ratio(p_n: float, p_half: float, p_quarter: float) -> float:
    """(P_{N/2} - P_{N/4}) / (P_N - P_{N/2}); ~2^a for an order-a method."""
    den = p_n - p_half
    if abs(den) < 1e-14:
        raise DegenerateError("price difference below 1e-14; ratio undefined")
    return (p_half - p_quarter) / den


# -- early exercise premium ---------------------------------------------------


@dataclass(frozen=True)
class EepCheck:
    residual: float
    price_american: float
    price_european: float
    premium_integral: McEstimate  # MC estimate of int e^{-rs} E[(delta S - r K) 1_ex] ds


def early_exercise_premium_check(model: MarketModel, contract: OptionContract,
                                 num: NumericalConfig, mc: McConfig) -> EepCheck:
    """Cross-check P_am - P_eu against the premium formula for a Heston put.

    The formula expresses the premium as
    -int_0^T e^{-rs} E[(delta S_s - r K) 1{S_s <= b(s, Y_s)}] ds with b the
    exercise boundary; the expectation runs over hybrid Monte Carlo paths
    whose variance path lives on the same tree as the deterministic run, so
    the extracted boundary is read off without interpolation.
    """
    if contract.kind != "put" or not contract.is_american:
        raise ScopeError("premium check is defined for American puts")
    if model.lam != 0.0 or model.sigma_r != 0.0:
        raise ScopeError("premium check supports the pure Heston regime (lam=0, sigma_r=0)")
    model = model.validated()
    num_store = NumericalConfig(**{**num.__dict__, "store_surfaces": True})
    res_am = hybrid_price(model, contract, num_store)
    euro = OptionContract(contract.strike, contract.maturity, "put", "european")
    res_eu = hybrid_price(model, euro, num)
    boundary = extract_exercise_boundary(res_am)

    mc = McConfig(**{**mc.__dict__, "n_steps": num.n_steps})
    sim = simulate_paths(model, contract.maturity, mc,
                         keep_steps=np.arange(num.n_steps))
    h = contract.maturity / num.n_steps
    rate, strike, div = model.r0, contract.strike, model.dividend
    integrand = np.zeros(mc.n_paths)
    for n in range(num.n_steps):
        b_n = boundary[n][sim["k_idx"][n]]
        spots = np.exp(sim["x"][n])
        inside = spots <= b_n
        integrand += sim["disc"][n] * (div * spots - rate * strike) * inside * h
    premium = McEstimate(float(integrand.mean()),
                         1.96 * float(integrand.std(ddof=1)) / math.sqrt(mc.n_paths),
                         mc.n_paths, mc.seed)
    residual = (res_am.price - res_eu.price) + premium.mean
    return EepCheck(residual, res_am.price, res_eu.price, premium)
