"""Runtime invariant suites behind the ``validate`` CLI command.

Each group re-checks a handful of structural properties of the numerical
building blocks at small sizes (seconds, not minutes); the full tolerance
sweep lives in the test-suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import fd, lattice, reference
from .benchmarks import bates_test_model
from .errors import SvJumpError
from .hybrid import NumericalConfig, price
from .model import MarketModel, OptionContract, mu_eff, mu_x

GROUPS = ("model", "lattice", "fd", "hybrid", "reference")


@dataclass
class CheckResult:
    group: str
    name: str
    passed: bool
    measured: float
    bound: float

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return f"[{status}] {self.group}.{self.name}: measured={self.measured:.3e} bound={self.bound:.3e}"


def _check(out: List[CheckResult], group: str, name: str, measured: float, bound: float):
    out.append(CheckResult(group, name, bool(measured <= bound), float(measured), float(bound)))


def _model_checks(model: MarketModel, out: List[CheckResult]):
    rng = np.random.default_rng(7)
    ys = rng.uniform(0.0, 0.3, 50)
    rs = rng.uniform(-2.0, 2.0, 50)
    zero_corr = MarketModel(**{**model.__dict__, "rho1": 0.0, "rho2": 0.0, "rho3": None}).validated()
    gap = max(abs(mu_eff(y, r, 0.1, zero_corr) - mu_x(y, r, 0.1, zero_corr))
              for y, r in zip(ys, rs))
    _check(out, "model", "mu_eff_reduces_to_mu_x", gap, 1e-15)
    law = model.jump_law
    if law.intensity > 0:
        xs = np.linspace(law.log_jump_mean - 8 * law.eta, law.log_jump_mean + 8 * law.eta, 20001)
        quad = np.trapezoid(law.density(xs), xs)
        _check(out, "model", "levy_density_mass", abs(quad - law.intensity), 1e-8)
    m2 = model.validated()
    _check(out, "model", "validate_idempotent",
           0.0 if m2.validated() == m2 else 1.0, 0.5)


def _lattice_checks(model: MarketModel, out: List[CheckResult]):
    horizon = 0.5
    tree = lattice.build_cir_tree(model, 200, horizon)
    h = tree.dt
    theta_low = (model.kappa_y * model.theta_y / model.sigma_y) ** 2
    theta_high = model.sigma_y**2 / (4.0 * model.kappa_y**2)
    single_ok = True
    moment_gap = 0.0
    for n in range(tree.n_steps):
        v = tree.values[n]
        interior = (v > theta_low * h) & (v < theta_high / h)
        k = np.arange(n + 1)
        if np.any(interior & ((tree.ku[n] != k + 1) | (tree.kd[n] != k))):
            single_ok = False
        free = ~tree.clamped[n]
        if np.any(free):
            drift = model.kappa_y * (model.theta_y - v[free]) * h
            got = (tree.pu[n][free] * (tree.values[n + 1][tree.ku[n][free]] - v[free])
                   + (1 - tree.pu[n][free]) * (tree.values[n + 1][tree.kd[n][free]] - v[free]))
            moment_gap = max(moment_gap, float(np.max(np.abs(got - drift))))
    _check(out, "lattice", "single_jumps_in_interior", 0.0 if single_ok else 1.0, 0.5)
    _check(out, "lattice", "first_moment_identity", moment_gap, 1e-14)
    ou = lattice.build_ou_tree(model, 100, horizon)
    mean_r = lattice.forward_expectation(ou, lambda r: r)
    _check(out, "lattice", "ou_mean_zero", abs(mean_r), 1e-12)
    # start away from the long-run mean so the reference has an O(h) signal
    moved = MarketModel(**{**model.__dict__, "y0": model.theta_y + 0.05, "rho3": None}).validated()
    ref = moved.theta_y + (moved.y0 - moved.theta_y) * np.exp(-moved.kappa_y * horizon)
    errs = []
    for n_steps in (50, 100, 200, 400):
        t = lattice.build_cir_tree(moved, n_steps, horizon)
        errs.append(abs(lattice.forward_expectation(t, lambda y: y) - ref))
    slope = np.polyfit(np.log([horizon / n for n in (50, 100, 200, 400)]), np.log(errs), 1)[0]
    _check(out, "lattice", "cir_mean_weak_order", 0.8 - slope, 0.0)


def _fd_checks(model: MarketModel, out: List[CheckResult]):
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        alpha = rng.normal(0.0, 1.0)
        beta = rng.uniform(0.0, 5.0)
        theta = rng.uniform(0.0, 2 * np.pi, 10_000)
        sym = np.abs((alpha - beta) * np.exp(-1j * theta) + 1 + 2 * beta
                     - (alpha + beta) * np.exp(1j * theta))
        worst = max(worst, float(1.0 - sym.min()))
    _check(out, "fd", "central_symbol_lower_bound", worst, 1e-12)
    grid = fd.SpaceGrid(0.0, 0.01, 60)
    levy = fd.build_levy_grid(model.jump_law, 0.01, 1e-6)
    v = rng.standard_normal(grid.size)
    direct = fd.apply_B(v, levy, 0.01, method="direct")
    fftv = fd.apply_B(v, levy, 0.01, method="fft")
    _check(out, "fd", "fft_equals_direct", float(np.max(np.abs(direct - fftv))), 1e-10)
    tri = fd.TriDiag(alpha=0.3, beta=1.2, size=41, scheme="central")
    rhs = rng.standard_normal(41)
    dense = np.linalg.solve(tri.to_dense(), rhs)
    _check(out, "fd", "thomas_equals_dense",
           float(np.max(np.abs(fd.solve_tridiag(tri, rhs) - dense))
                 / max(1.0, np.max(np.abs(dense)))), 1e-12)
    c_nu = levy.lam_sum * levy.dx / model.lam * 1.01
    h = 0.01
    op_norm = _power_iteration_b(levy, h, size=201)
    _check(out, "fd", "b_l2_gain", op_norm - (1.0 + 2.0 * model.lam * c_nu * h), 0.0)


def _power_iteration_b(levy, h, size=201, iters=60):
    rng = np.random.default_rng(3)
    v = rng.standard_normal(size)
    v /= np.linalg.norm(v)
    lam_est = 0.0
    for _ in range(iters):
        w = fd.apply_B(v, levy, h)
        w = fd.apply_B(w[::-1], levy, h)[::-1]  # B^T B via the mirrored kernel
        lam_est = np.linalg.norm(w)
        v = w / lam_est
    return float(np.sqrt(lam_est))


def _hybrid_checks(model: MarketModel, out: List[CheckResult]):
    contract_am = OptionContract(100.0, 0.5, "call", "american")
    contract_eu = OptionContract(100.0, 0.5, "call", "european")
    cfg = NumericalConfig(n_steps=20, dx=0.01, store_surfaces=True)
    res_am = price(model, contract_am, cfg)
    res_eu = price(model, contract_eu, cfg)
    pay = contract_am.payoff(res_am.grid.points)
    worst = min(float(np.min(s.values - pay[None, None, :])) for s in res_am.surfaces)
    _check(out, "hybrid", "american_dominates_payoff", -worst, 1e-12)
    gap = float(np.min(res_am.surface0.values - res_eu.surface0.values))
    _check(out, "hybrid", "american_dominates_european", -gap, 1e-9)


def _reference_checks(model: MarketModel, out: List[CheckResult]):
    sol = reference.riccati_solve(-0.7, -0.3, model.kappa_y, model.sigma_y, model.theta_y)
    ts = np.linspace(0.01, 2.0, 100)
    eps = 1e-5
    dpsi = (sol.psi(ts + eps) - sol.psi(ts - eps)) / (2 * eps)
    resid = np.abs(dpsi - (0.5 * model.sigma_y**2 * sol.psi(ts) ** 2
                           - model.kappa_y * sol.psi(ts) - 0.3))
    _check(out, "reference", "riccati_ode_residual", float(resid.max()), 1e-8)
    c = reference.carr_madan_price(model, 100.0, 0.5, "call")
    p = reference.carr_madan_price(model, 100.0, 0.5, "put")
    fwd_gap = c - p - (model.s0 * np.exp(-model.dividend * 0.5)
                       - 100.0 * np.exp(-model.r0 * 0.5))
    _check(out, "reference", "put_call_parity", abs(fwd_gap), 1e-8)
    strikes = np.linspace(80.0, 120.0, 9)
    calls = np.array([reference.carr_madan_price(model, k, 0.5, "call") for k in strikes])
    _check(out, "reference", "call_decreasing_in_strike", float(np.max(np.diff(calls))), 0.0)
    _check(out, "reference", "call_convex_in_strike", -float(np.min(np.diff(calls, 2))), 1e-8)


def run_validation(groups: Optional[List[str]] = None,
                   model: Optional[MarketModel] = None) -> List[CheckResult]:
    """Run the requested invariant groups (all by default)."""
    groups = list(groups or GROUPS)
    unknown = set(groups) - set(GROUPS)
    if unknown:
        raise SvJumpError(f"unknown validation groups: {sorted(unknown)}")
    model = model or bates_test_model()
    out: List[CheckResult] = []
    runners = {
        "model": _model_checks,
        "lattice": _lattice_checks,
        "fd": _fd_checks,
        "hybrid": _hybrid_checks,
        "reference": _reference_checks,
    }
    for g in GROUPS:
        if g in groups:
            runners[g](model, out)
    return out
