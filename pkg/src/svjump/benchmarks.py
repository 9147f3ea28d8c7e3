"""Benchmark parameter sets and externally computed reference prices.

The dictionaries below hold reference values for the standard validation
sweeps used throughout the test-suite, the ``table`` CLI command and the
demo scripts.  ``HTFD`` columns are high-resolution runs of this engine's
algorithm family (N=100 time steps, dx=0.0025); the second column is an
independent reference: a Fourier-inversion price for the European standard
sweeps, a PSOR finite-difference solution for the American sweep, and a
high-resolution third-order Monte Carlo (mean, 95% half-width) where no
deterministic reference exists.
"""

from __future__ import annotations

from .model import MarketModel
from .errors import ParamError

SPOTS = (80.0, 90.0, 100.0, 110.0, 120.0)
STRIKE = 100.0


def bates_test_model(s0: float = 100.0, rho: float = -0.5) -> MarketModel:
    """Standard Bates test set: K=100, T=0.5, r=3%, delta=5%, Y0=theta=0.04."""
    return MarketModel(s0=s0, y0=0.04, dividend=0.05, kappa_y=2.0, theta_y=0.04,
                       sigma_y=0.4, r0=0.03, sigma_r=0.0, rho1=rho,
                       lam=5.0, gamma_j=0.0, eta_j=0.1).validated()


def bates_long_maturity_model(s0: float = 100.0) -> MarketModel:
    """Long-maturity stress set (T=5): vol-vol 0.7, violating 2 kappa theta >= sigma^2."""
    return MarketModel(s0=s0, y0=0.04, dividend=0.05, kappa_y=2.0, theta_y=0.04,
                       sigma_y=0.7, r0=0.03, sigma_r=0.0, rho1=-0.5,
                       lam=5.0, gamma_j=0.0, eta_j=0.1).validated()


def bhw_test_model(s0: float = 100.0, rho_sr: float = -0.5) -> MarketModel:
    """Stochastic-rate test set: kappa_r=1, sigma_r=0.2, flat 3% curve."""
    return MarketModel(s0=s0, y0=0.04, dividend=0.05, kappa_y=2.0, theta_y=0.04,
                       sigma_y=0.4, r0=0.03, kappa_r=1.0, sigma_r=0.2,
                       rho1=-0.5, rho2=rho_sr,
                       lam=5.0, gamma_j=0.0, eta_j=0.1).validated()


# European calls, standard Bates, T=0.5: {(rho, S0): (htfd, fourier)}
TABLE_EU_BATES = {
    (-0.5, 80.0): (1.1292, 1.1293),
    (-0.5, 90.0): (3.3298, 3.3284),
    (-0.5, 100.0): (7.5221, 7.5210),
    (-0.5, 110.0): (13.6921, 13.6923),
    (-0.5, 120.0): (21.3164, 21.3174),
    (0.5, 80.0): (1.4742, 1.4760),
    (0.5, 90.0): (3.6847, 3.6862),
    (0.5, 100.0): (7.6229, 7.6223),
    (0.5, 110.0): (13.4814, 13.4791),
    (0.5, 120.0): (20.9636, 20.9616),
}

# American calls, standard Bates, T=0.5: {(rho, S0): (htfd, psor)}
TABLE_AM_BATES = {
    (-0.5, 80.0): (1.1356, 1.1359),
    (-0.5, 90.0): (3.3548, 3.3532),
    (-0.5, 100.0): (7.5989, 7.5970),
    (-0.5, 110.0): (13.8839, 13.8830),
    (-0.5, 120.0): (21.7184, 21.7186),
    (0.5, 80.0): (1.4828, 1.4843),
    (0.5, 90.0): (3.7137, 3.7145),
    (0.5, 100.0): (7.7036, 7.7027),
    (0.5, 110.0): (13.6739, 13.6722),
    (0.5, 120.0): (21.3655, 21.3653),
}

# European calls, T=5, sigma_y=0.7 (Feller violated), rho=-0.5: {S0: (htfd, fourier)}
TABLE_EU_LONG = {
    80.0: (8.9392, 8.9262),
    90.0: (12.6442, 12.6257),
    100.0: (16.9089, 16.8855),
    110.0: (21.6639, 21.6364),
    120.0: (26.8430, 26.8121),
}

# American calls, T=5: {S0: (htfd, mc_mean, mc_halfwidth)}
TABLE_AM_LONG = {
    80.0: (9.7914, 9.7907, 0.04),
    90.0: (14.0244, 14.0030, 0.05),
    100.0: (18.9995, 18.9632, 0.05),
    110.0: (24.6701, 24.6289, 0.06),
    120.0: (30.9896, 30.9052, 0.07),
}

# European calls, stochastic rate: {(rho_sr, S0): (htfd, mc_mean, mc_halfwidth)}
TABLE_EU_BHW = {
    (-0.5, 80.0): (1.0193, 1.0153, 0.01),
    (-0.5, 90.0): (3.1136, 3.1008, 0.02),
    (-0.5, 100.0): (7.2480, 7.2315, 0.02),
    (-0.5, 110.0): (13.4404, 13.4256, 0.03),
    (-0.5, 120.0): (21.1207, 21.1070, 0.04),
    (0.5, 80.0): (1.3473, 1.3446, 0.01),
    (0.5, 90.0): (3.7299, 3.7263, 0.02),
    (0.5, 100.0): (8.0107, 8.0069, 0.03),
    (0.5, 110.0): (14.1386, 14.1323, 0.03),
    (0.5, 120.0): (21.6646, 21.6501, 0.04),
}

# American calls, stochastic rate: {(rho_sr, S0): (htfd, mc_mean, mc_halfwidth)}
TABLE_AM_BHW = {
    (-0.5, 80.0): (1.0595, 1.0544, 0.01),
    (-0.5, 90.0): (3.2495, 3.2273, 0.01),
    (-0.5, 100.0): (7.5980, 7.5589, 0.02),
    (-0.5, 110.0): (14.1399, 14.0909, 0.03),
    (-0.5, 120.0): (22.2397, 22.1736, 0.03),
    (0.5, 80.0): (1.3569, 1.3559, 0.01),
    (0.5, 90.0): (3.7686, 3.7633, 0.02),
    (0.5, 100.0): (8.1309, 8.1122, 0.03),
    (0.5, 110.0): (14.4394, 14.3884, 0.03),
    (0.5, 120.0): (22.2808, 22.2039, 0.04),
}

# American convergence ratios (P_{N/2}-P_{N/4})/(P_N-P_{N/2}) at dx=0.0025,
# rho=-0.5: {S0: {N: ratio}}
TABLE_RATIO_AM = {
    80.0: {200: 1.919250, 400: 2.172836, 800: 1.544849},
    90.0: {200: 1.961063, 400: 2.209762, 800: 1.851932},
    100.0: {200: 1.894156, 400: 2.556021, 800: 1.463712},
    110.0: {200: 2.299666, 400: 1.673541, 800: 2.935697},
    120.0: {200: 2.109026, 400: 1.996332, 800: 2.106880},
}

TABLE_IDS = ("t1", "t2", "t4", "t6", "t7")


def table_spec(table_id: str):
    """(style, model factory kwargs grid, reference dict) for a table id."""
    if table_id == "t1":
        return ("european", [("rho", r) for r in (-0.5, 0.5)], bates_test_model, TABLE_EU_BATES)
    if table_id == "t2":
        return ("american", [("rho", r) for r in (-0.5, 0.5)], bates_test_model, TABLE_AM_BATES)
    if table_id == "t4":
        return ("european", [(None, None)], bates_long_maturity_model, TABLE_EU_LONG)
    if table_id == "t6":
        return ("european", [("rho_sr", r) for r in (-0.5, 0.5)], bhw_test_model, TABLE_EU_BHW)
    if table_id == "t7":
        return ("american", [("rho_sr", r) for r in (-0.5, 0.5)], bhw_test_model, TABLE_AM_BHW)
    raise ParamError(f"unknown table id {table_id!r}; expected one of {TABLE_IDS}")
