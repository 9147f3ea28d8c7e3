"""Hybrid Monte Carlo: tree increments for (Y, R), Euler + jumps for the log price.

Paths of the factor pair follow the binomial trees exactly (so the factor
marginals match the lattice used by the deterministic pricer), while the log
price advances by

    X_{n+1} = X_n + mu_eff(Y_n, R_n, nh) h + rho3 sqrt(h Y_n) Z
              + (rho1/sigma_y)(Y_{n+1} - Y_n) + rho2 sqrt(Y_n)(R_{n+1} - R_n)
              + sum of K ~ Poisson(lam h) normal log-jump amplitudes.

Three independent substreams (tree moves, diffusion normals, jump draws) hang
off the user seed, so the no-jump code path reproduces lam=0 draws bit for bit.
European prices average the pathwise-discounted payoff; American prices run
least-squares regression over the in-the-money paths at each exercise date.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Optional

import numpy as np

from .errors import ParamError, RegressionError
from .lattice import build_cir_tree, build_ou_tree
from .model import MarketModel, OptionContract, mu_eff

__all__ = [
    "McConfig",
    "McEstimate",
    "simulate_increment",
    "simulate_paths",
    "price_european_mc",
    "price_american_ls",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 50_000
    n_steps: int = 100
    n_exercise_dates: int = 20
    seed: int = 0
    basis_degree: int = 2

    def __post_init__(self):
        if self.n_paths < 2:
            raise ParamError("n_paths must be >= 2")
        if self.n_exercise_dates >= 1 and self.n_steps % self.n_exercise_dates != 0:
            raise ParamError(
                f"exercise dates ({self.n_exercise_dates}) must divide n_steps ({self.n_steps})")


@dataclass(frozen=True)
class McEstimate:
    mean: float
    half_width: float   # 1.96 * sample std / sqrt(n_paths)
    n_paths: int
    seed: int

    def covers(self, value: float, k: float = 1.0) -> bool:
        return abs(self.mean - value) <= k * self.half_width


def simulate_increment(x, y, y_next, r, r_next, t, h, dw, jump_sum, model: MarketModel):
    """One explicit step of the log price given the factor moves.

    ``dw`` is a standard normal draw, ``jump_sum`` the summed log-jump
    amplitudes over the step (0 when no jump occurred).
    """
    drift = mu_eff(y, r, t, model) * h
    diff = model.rho3 * np.sqrt(h * np.asarray(y, float)) * dw
    feedback = (model.rho1 / model.sigma_y) * (np.asarray(y_next, float) - y)
    if model.is_rate_stochastic:
        feedback = feedback + model.rho2 * np.sqrt(np.asarray(y, float)) * (
            np.asarray(r_next, float) - np.asarray(r, float))
    return x + drift + diff + feedback + jump_sum


def _substreams(seed: int):
    tree_ss, diff_ss, jump_ss = np.random.SeedSequence(seed).spawn(3)
    mk = lambda ss: np.random.Generator(np.random.Philox(ss))
    return mk(tree_ss), mk(diff_ss), mk(jump_ss)


def simulate_paths(model: MarketModel, horizon: float, config: McConfig,
                   keep_steps: Optional[np.ndarray] = None) -> dict:
    """Simulate all paths; record state at ``keep_steps`` (default: maturity only).

    Returns a dict with arrays ``x``, ``y``, ``r``, ``k_idx`` of shape
    (len(keep_steps), n_paths), and ``disc`` of shape (len(keep_steps),
    n_paths): the discount factor from time 0 to each kept step, using the
    left-endpoint rate sum exp(-sum_n (sigma_r R_n + phi(nh)) h).
    """
    model = model.validated()
    n_steps, n_paths = config.n_steps, config.n_paths
    h = horizon / n_steps
    if keep_steps is None:
        keep_steps = np.array([n_steps])
    keep_steps = np.asarray(keep_steps, dtype=int)
    keep_pos = {int(s): i for i, s in enumerate(keep_steps)}

    cir = build_cir_tree(model, n_steps, horizon)
    ou = build_ou_tree(model, n_steps, horizon) if model.is_rate_stochastic else None
    rng_tree, rng_diff, rng_jump = _substreams(config.seed)

    x = np.full(n_paths, model.x0)
    k_idx = np.zeros(n_paths, dtype=np.int64)
    j_idx = np.zeros(n_paths, dtype=np.int64)
    log_disc = np.zeros(n_paths)
    mu_j = model.jump_law.log_jump_mean

    out = {name: np.empty((len(keep_steps), n_paths)) for name in ("x", "y", "r", "disc")}
    out["k_idx"] = np.empty((len(keep_steps), n_paths), dtype=np.int64)

    def record(step):
        i = keep_pos.get(step)
        if i is not None:
            out["x"][i] = x
            out["y"][i] = cir.values[step][k_idx]
            out["r"][i] = ou.values[step][j_idx] if ou is not None else 0.0
            out["k_idx"][i] = k_idx
            out["disc"][i] = np.exp(-log_disc)

    record(0)
    for n in range(n_steps):
        y_n = cir.values[n][k_idx]
        r_n = ou.values[n][j_idx] if ou is not None else 0.0
        # factor moves on the trees
        up_y = rng_tree.random(n_paths) < cir.pu[n][k_idx]
        k_next = np.where(up_y, cir.ku[n][k_idx], cir.kd[n][k_idx])
        if ou is not None:
            up_r = rng_tree.random(n_paths) < ou.pu[n][j_idx]
            j_next = np.where(up_r, ou.ku[n][j_idx], ou.kd[n][j_idx])
            r_next = ou.values[n + 1][j_next]
        else:
            j_next = j_idx
            r_next = 0.0
        dw = rng_diff.standard_normal(n_paths)
        if model.lam > 0.0:
            counts = rng_jump.poisson(model.lam * h, n_paths)
            total = int(counts.sum())
            if total > 0:
                amps = rng_jump.normal(mu_j, model.eta_j, total)
                owner = np.repeat(np.arange(n_paths), counts)
                jump_sum = np.bincount(owner, weights=amps, minlength=n_paths)
            else:
                jump_sum = 0.0
        else:
            jump_sum = 0.0
        x = simulate_increment(x, y_n, cir.values[n + 1][k_next], r_n, r_next,
                               n * h, h, dw, jump_sum, model)
        log_disc += (model.sigma_r * r_n + model.phi_at(n * h)) * h
        k_idx, j_idx = k_next, j_next
        record(n + 1)
    return out


def price_european_mc(model: MarketModel, contract: OptionContract,
                      config: McConfig) -> McEstimate:
    """Mean of the pathwise-discounted payoff with a 95% confidence half-width."""
    sim = simulate_paths(model, contract.maturity, config)
    vals = sim["disc"][-1] * contract.payoff(sim["x"][-1])
    mean = float(vals.mean())
    hw = 1.96 * float(vals.std(ddof=1)) / np.sqrt(config.n_paths)
    return McEstimate(mean, hw, config.n_paths, config.seed)


def _basis(model: MarketModel, contract: OptionContract, x, y, r, degree: int) -> np.ndarray:
    """Monomials of (S/K, Y [, R]) up to total degree plus the payoff itself."""
    feats = [np.exp(x) / contract.strike, y]
    if model.is_rate_stochastic:
        feats.append(r)
    cols = [np.ones_like(x)]
    for deg in range(1, degree + 1):
        for combo in combinations_with_replacement(range(len(feats)), deg):
            col = np.ones_like(x)
            for idx in combo:
                col = col * feats[idx]
            cols.append(col)
    cols.append(contract.payoff(x))
    return np.column_stack(cols)


def price_american_ls(model: MarketModel, contract: OptionContract,
                      config: McConfig) -> McEstimate:
    """Longstaff-Schwartz price over evenly spaced exercise dates.

    Regression runs on in-the-money paths only; when these are fewer than the
    basis size the date is skipped (never exercise there) and a warning is
    logged.  With a single exercise date the estimate equals the European one
    on the same seed.
    """
    n_ex = config.n_exercise_dates
    stride = config.n_steps // n_ex
    steps = np.arange(1, n_ex + 1) * stride
    sim = simulate_paths(model, contract.maturity, config, keep_steps=steps)

    cashflow = contract.payoff(sim["x"][-1])
    disc = sim["disc"]
    for m in range(n_ex - 2, -1, -1):
        # discount cashflows from date m+1 back to date m
        cashflow = cashflow * (disc[m + 1] / disc[m])
        exercise_val = contract.payoff(sim["x"][m])
        itm = exercise_val > 0.0
        basis = _basis(model, contract, sim["x"][m], sim["y"][m], sim["r"][m],
                       config.basis_degree)
        if itm.sum() < basis.shape[1]:
            log.warning("LS regression skipped at date %d: %d ITM paths < %d basis functions",
                        m + 1, int(itm.sum()), basis.shape[1])
            continue
        coef, *_ = np.linalg.lstsq(basis[itm], cashflow[itm], rcond=None)
        continuation = basis[itm] @ coef
        take = exercise_val[itm] > continuation
        idx = np.nonzero(itm)[0][take]
        cashflow[idx] = exercise_val[idx]
    vals = cashflow * disc[0]
    mean = float(vals.mean())
    hw = 1.96 * float(vals.std(ddof=1)) / np.sqrt(config.n_paths)
    return McEstimate(mean, hw, config.n_paths, config.seed)
