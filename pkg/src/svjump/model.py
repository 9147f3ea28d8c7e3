"""Model parameters, jump law and drift functions.

The dynamics priced by this package are a stochastic-volatility jump model
with an optional Vasicek-type stochastic short rate:

    dS/S = (r_t - delta) dt + sqrt(Y) dZ^S + dH,
    dY   = kappa_y (theta_y - Y) dt + sigma_y sqrt(Y) dZ^Y,
    r_t  = sigma_r R_t + phi(t),   dR = -kappa_r R dt + dZ^r,  R_0 = 0,

with corr(Z^S, Z^Y) = rho1, corr(Z^S, Z^r) = rho2, Z^Y independent of Z^r,
and H a compound Poisson process whose log-jump sizes log(1+J) are normal
with mean ``gamma_j - eta_j**2 / 2`` and standard deviation ``eta_j``.
Setting ``sigma_r = 0`` collapses the short rate to the deterministic curve
``phi`` (flat at ``r0`` by default), which is the plain Bates model; setting
``lam = 0`` on top of that gives Heston.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import CurveError, ParamError

__all__ = [
    "MarketModel",
    "OptionContract",
    "MertonJumpLaw",
    "validate",
    "mu_x",
    "mu_eff",
    "levy_density",
    "phi_from_curve",
    "hull_white_flat_phi",
]


@dataclass(frozen=True)
class MertonJumpLaw:
    """Normal law for the log-jump sizes, scaled by the jump intensity.

    The Levy density is ``nu(x) = lam * N(gamma - eta^2/2, eta^2)(x)`` so that
    ``integral nu = lam`` and the mean of ``1 + J`` is ``exp(gamma)``.
    """

    intensity: float
    gamma: float = 0.0
    eta: float = 0.1

    @property
    def log_jump_mean(self) -> float:
        return self.gamma - 0.5 * self.eta**2

    def density(self, x):
        """Levy density nu(x) of the log-jump sizes (0 when intensity is 0)."""
        x = np.asarray(x, dtype=float)
        if self.intensity == 0.0:
            return np.zeros_like(x)
        z = (x - self.log_jump_mean) / self.eta
        return self.intensity * np.exp(-0.5 * z * z) / (self.eta * math.sqrt(2.0 * math.pi))


@dataclass(frozen=True)
class MarketModel:
    """Full parameter set of the Bates-Hull-White dynamics.

    ``rho3 = sqrt(1 - rho1^2 - rho2^2)`` is derived, not supplied; it is
    filled in by :func:`validate`.  ``phi`` is the deterministic rate curve;
    when ``None`` it defaults to ``r0`` for ``sigma_r = 0`` and to the
    Hull-White fit of a flat curve at ``r0`` otherwise.
    """

    s0: float
    y0: float
    dividend: float = 0.0
    kappa_y: float = 2.0
    theta_y: float = 0.04
    sigma_y: float = 0.4
    r0: float = 0.03
    kappa_r: float = 1.0
    sigma_r: float = 0.0
    rho1: float = 0.0
    rho2: float = 0.0
    lam: float = 0.0
    gamma_j: float = 0.0
    eta_j: float = 0.1
    phi: Optional[Callable[[float], float]] = None
    rho3: Optional[float] = None

    # -- derived helpers -------------------------------------------------

    @property
    def x0(self) -> float:
        return math.log(self.s0)

    @property
    def jump_law(self) -> MertonJumpLaw:
        return MertonJumpLaw(self.lam, self.gamma_j, self.eta_j)

    @property
    def is_rate_stochastic(self) -> bool:
        return self.sigma_r > 0.0

    def phi_at(self, t):
        """Deterministic rate curve phi(t); see the class docstring for defaults."""
        if self.phi is not None:
            return self.phi(t)
        if not self.is_rate_stochastic:
            return self.r0 if np.isscalar(t) else np.full_like(np.asarray(t, float), self.r0)
        return hull_white_flat_phi(self.r0, self.kappa_r, self.sigma_r)(t)

    def validated(self) -> "MarketModel":
        return validate(self)


def validate(model: MarketModel) -> MarketModel:
    """Check all parameter invariants and fill in the derived rho3.

    Raises :class:`ParamError` naming the violated invariant.  Idempotent:
    validating a validated model returns an equal model.
    """
    m = model
    if not m.s0 > 0.0:
        raise ParamError(f"spot must be positive, got s0={m.s0}")
    if m.y0 < 0.0:
        raise ParamError(f"initial variance must be nonnegative, got y0={m.y0}")
    for name in ("kappa_y", "theta_y", "sigma_y"):
        if not getattr(m, name) > 0.0:
            raise ParamError(f"{name} must be positive, got {getattr(m, name)}")
    if m.sigma_r < 0.0:
        raise ParamError(f"sigma_r must be nonnegative, got {m.sigma_r}")
    if m.is_rate_stochastic and not m.kappa_r > 0.0:
        raise ParamError(f"kappa_r must be positive, got {m.kappa_r}")
    if m.lam < 0.0:
        raise ParamError(f"lam (jump intensity) must be nonnegative, got {m.lam}")
    if m.lam > 0.0 and not m.eta_j > 0.0:
        raise ParamError(f"eta_j must be positive when jumps are active, got {m.eta_j}")
    rho_norm = m.rho1**2 + m.rho2**2
    if rho_norm > 1.0 + 1e-15:
        raise ParamError(f"correlation norm rho1^2+rho2^2={rho_norm:.6f} exceeds 1")
    if m.sigma_r == 0.0 and m.rho2 != 0.0:
        raise ParamError("rho2 must be 0 when sigma_r=0 (deterministic-rate reduction)")
    rho3 = math.sqrt(max(1.0 - rho_norm, 0.0))
    if m.rho3 is not None and abs(m.rho3 - rho3) > 1e-12:
        raise ParamError(f"supplied rho3={m.rho3} inconsistent with rho1,rho2")
    # Note: the Feller condition 2*kappa_y*theta_y >= sigma_y^2 is NOT required.
    return replace(m, rho3=rho3)


@dataclass(frozen=True)
class OptionContract:
    """Vanilla option: payoff(x) = max(+-(e^x - K), 0) on the log price x."""

    strike: float
    maturity: float
    kind: str = "call"
    style: str = "european"

    def __post_init__(self):
        if not self.strike > 0.0:
            raise ParamError(f"strike must be positive, got {self.strike}")
        if not self.maturity > 0.0:
            raise ParamError(f"maturity must be positive, got {self.maturity}")
        if self.kind not in ("call", "put"):
            raise ParamError(f"kind must be 'call' or 'put', got {self.kind!r}")
        if self.style not in ("european", "american"):
            raise ParamError(f"style must be 'european' or 'american', got {self.style!r}")

    @property
    def is_american(self) -> bool:
        return self.style == "american"

    @property
    def is_call(self) -> bool:
        return self.kind == "call"

    def payoff(self, x):
        """Payoff as a function of the log price."""
        s = np.exp(np.asarray(x, dtype=float))
        if self.is_call:
            return np.maximum(s - self.strike, 0.0)
        return np.maximum(self.strike - s, 0.0)


# -- drifts ---------------------------------------------------------------


def mu_x(y, r, t, model: MarketModel):
    """Drift of the log price: sigma_r*r + phi(t) - delta - y/2."""
    return model.sigma_r * r + model.phi_at(t) - model.dividend - 0.5 * np.asarray(y, float)


def mu_eff(y, r, t, model: MarketModel):
    """Drift of the log price after removing the Y- and R-noise contributions.

    mu_x minus (rho1/sigma_y)*mu_Y(y) and rho2*sqrt(y)*mu_R(r); this is the
    convection coefficient of the one-dimensional PIDE solved per node.
    """
    y = np.asarray(y, dtype=float)
    out = mu_x(y, r, t, model)
    out = out - (model.rho1 / model.sigma_y) * model.kappa_y * (model.theta_y - y)
    out = out + model.rho2 * model.kappa_r * np.asarray(r, float) * np.sqrt(y)
    return out


def levy_density(x, model: MarketModel):
    """Levy density of the log-jump sizes for ``model``."""
    return model.jump_law.density(x)


# -- rate curve fitting ---------------------------------------------------


def hull_white_flat_phi(rate: float, kappa_r: float, sigma_r: float):
    """phi fitting a flat zero-coupon curve exp(-rate*T).

    Closed form: phi(t) = rate + sigma_r^2/(2 kappa_r^2) * (1 - exp(-kappa_r t))^2.
    """

    def phi(t):
        t = np.asarray(t, dtype=float)
        adj = (sigma_r**2 / (2.0 * kappa_r**2)) * (1.0 - np.exp(-kappa_r * t)) ** 2
        out = rate + adj
        return float(out) if out.ndim == 0 else out

    return phi


def phi_from_curve(curve: Callable[[float], float], model: MarketModel,
                   horizon: float = 30.0, n_check: int = 121):
    """Deterministic curve phi(t) that reprices the zero-coupon curve ``curve``.

    ``curve(T)`` must return P(0,T) with P(0,0)=1, positive and decreasing.
    phi(t) = f(0,t) + sigma_r^2/(2 kappa_r^2) * (1-exp(-kappa_r t))^2 with
    f(0,t) the instantaneous forward rate, differenced numerically.
    """
    ts = np.linspace(0.0, horizon, n_check)
    ps = np.asarray([curve(t) for t in ts], dtype=float)
    if abs(ps[0] - 1.0) > 1e-10:
        raise CurveError(f"curve must satisfy P(0,0)=1, got {ps[0]}")
    if np.any(ps <= 0.0):
        raise CurveError("curve must be positive")
    if np.any(np.diff(ps) >= 0.0):
        raise CurveError("curve must be strictly decreasing")

    eps = 1e-6
    sig, kap = model.sigma_r, model.kappa_r

    def phi(t):
        t = np.asarray(t, dtype=float)
        lo = np.maximum(t - eps, 0.0)
        hi = lo + 2 * eps
        fwd = (np.log(np.vectorize(curve)(lo)) - np.log(np.vectorize(curve)(hi))) / (hi - lo)
        adj = 0.0
        if sig > 0.0:
            adj = (sig**2 / (2.0 * kap**2)) * (1.0 - np.exp(-kap * t)) ** 2
        out = fwd + adj
        return float(out) if out.ndim == 0 else out

    return phi
