import math

import numpy as np
import pytest

from svjump.errors import GridError, ShapeError, TolError
from svjump.fd import (LevyGrid, SpaceGrid, TriDiag, apply_B, assemble_A, boundary_vector,
                       build_levy_grid, build_space_grid, jump_overhang, solve_tridiag)
from svjump.hybrid import NumericalConfig, price
from svjump.model import MarketModel, MertonJumpLaw, OptionContract
from svjump.benchmarks import bates_test_model


class TestSpaceGrid:
    def test_contains_reference_interval(self, bates_model, call_eu):
        g = build_space_grid(bates_model, call_eu, 0.01)
        x0 = math.log(100.0)
        assert g.points[0] <= x0 - 1.59 and g.points[-1] >= x0 + 1.93
        assert g.points[g.m] == pytest.approx(x0, abs=0.0)

    def test_small_exact_grid(self, bates_model, call_eu):
        g = build_space_grid(bates_model, call_eu, 0.5, width=(1.0, 1.0))
        assert g.m == 2 and g.size == 5

    def test_doubling_dx_halves_m(self, bates_model, call_eu):
        g1 = build_space_grid(bates_model, call_eu, 0.01)
        g2 = build_space_grid(bates_model, call_eu, 0.02)
        assert abs(g1.m - 2 * g2.m) <= 1

    def test_too_narrow_for_jumps(self, bates_model):
        contract = OptionContract(100.0, 0.5, "call", "european")
        cfg = NumericalConfig(n_steps=2, dx=0.01, space_width=(0.05, 0.05))
        with pytest.raises(GridError):
            price(bates_model, contract, cfg)


class TestLevyGrid:
    def test_zero_intensity(self):
        levy = build_levy_grid(MertonJumpLaw(0.0), 0.01)
        assert levy.halfwidth == 0 and levy.lam_sum == 0.0

    def test_total_mass_tolerance(self, bates_model):
        levy = build_levy_grid(bates_model.jump_law, 0.0025, tol=1e-6)
        total = levy.weights.sum()
        assert abs(total - 5.0) <= 1e-6
        smaller = LevyGrid(levy.halfwidth - 1, levy.dx,
                           bates_model.jump_law.density(
                               np.arange(-levy.halfwidth + 1, levy.halfwidth) * levy.dx))
        assert abs(smaller.weights.sum() - 5.0) > 1e-6  # halfwidth is minimal

    def test_near_symmetry_bound(self, bates_model):
        law = bates_model.jump_law
        levy = build_levy_grid(law, 0.0025, tol=1e-6)
        ws = levy.weights
        lw = levy.halfwidth
        # density peak offset is |gamma - eta^2/2|; |nu'| <= nu_max/(eta*sqrt(e))... use
        # a crude Lipschitz bound |nu'|_inf = lam/(eta^2 sqrt(2 pi e))
        lip = law.intensity / (law.eta**2 * math.sqrt(2 * math.pi * math.e))
        shift = abs(law.log_jump_mean)
        bound = lip * levy.dx * 2 * shift + 1e-12
        for l in range(1, lw + 1):
            assert abs(ws[lw + l] - ws[lw - l]) <= bound

    def test_unreachable_tolerance(self, bates_model):
        with pytest.raises(TolError):
            build_levy_grid(bates_model.jump_law, 0.5, tol=1e-13)


class TestAssembleA:
    def test_hand_coefficients(self, bates_model):
        grid = SpaceGrid(math.log(100.0), 0.01, 200)
        A = assemble_A(bates_model, y=0.04, r=0.0, t=0.0, h=0.01, grid=grid)
        assert A.beta == pytest.approx(1.5, abs=1e-14)
        assert A.alpha == pytest.approx(-0.02, abs=1e-15)
        assert A.sub == pytest.approx(-1.52) and A.diag == pytest.approx(4.0)
        assert A.sup == pytest.approx(1.52)

    def test_degenerate_identity(self):
        m = MarketModel(s0=100, y0=0.0, r0=0.03, dividend=0.03, rho1=0.0).validated()
        grid = SpaceGrid(math.log(100.0), 0.01, 10)
        A = assemble_A(m, y=0.0, r=0.0, t=0.0, h=0.01, grid=grid)
        assert A.alpha == 0.0 and A.beta == 0.0
        assert np.allclose(A.to_dense(), np.eye(grid.size))

    def test_upwind_signs(self, bates_model):
        grid = SpaceGrid(math.log(100.0), 0.01, 10)
        A = assemble_A(bates_model, y=0.01, r=0.0, t=0.0, h=0.01, grid=grid, scheme="upwind")
        # mu_eff(0.01) = 0.03-0.05-0.005-(-1.25)*2*0.03 = 0.05 > 0
        assert A.alpha > 0
        assert A.sup == pytest.approx(-A.beta - abs(A.alpha))
        assert A.sub == pytest.approx(-A.beta)
        dense = A.to_dense()
        assert np.all(dense[np.triu_indices_from(dense, 1)] <= 0.0)
        assert np.allclose(dense.sum(axis=1)[1:-1], 1.0)

    def test_row_sums_central(self, bates_model):
        grid = SpaceGrid(0.0, 0.01, 10)
        A = assemble_A(bates_model, y=0.09, r=0.0, t=0.1, h=0.005, grid=grid)
        assert np.allclose(A.to_dense().sum(axis=1)[1:-1], 1.0, atol=1e-14)


class TestSolveTridiag:
    def test_identity(self, rng):
        A = TriDiag(alpha=0.0, beta=0.0, size=11)
        rhs = rng.standard_normal(11)
        assert np.array_equal(solve_tridiag(A, rhs), rhs)

    def test_matches_dense_oracle(self, rng):
        A = TriDiag(alpha=0.37, beta=1.9, size=11)
        rhs = rng.standard_normal(11)
        want = np.linalg.solve(A.to_dense(), rhs)
        got = solve_tridiag(A, rhs)
        assert np.max(np.abs(got - want)) / np.max(np.abs(want)) <= 1e-12

    def test_constant_vector_preserved(self):
        # central row sums are 1, interior of A*1 = 1; with matching edge rows
        # the solve of the all-ones rhs plus edge corrections returns ones
        A = TriDiag(alpha=0.3, beta=1.0, size=21)
        rhs = np.ones(21)
        rhs[0] += A.sub * 1.0   # fold the missing left neighbour back in
        rhs[-1] += A.sup * 1.0
        assert np.allclose(solve_tridiag(A, rhs), 1.0, atol=1e-13)

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            solve_tridiag(TriDiag(0.1, 1.0, 5), np.ones(6))

    def test_fourier_symbol_lower_bound(self, rng):
        for _ in range(100):
            alpha = rng.normal(0.0, 2.0)
            beta = rng.uniform(0.0, 4.0)
            theta = rng.uniform(0.0, 2 * np.pi, 10_000)
            sym = np.abs((alpha - beta) * np.exp(-1j * theta) + 1 + 2 * beta
                         - (alpha + beta) * np.exp(1j * theta))
            assert sym.min() >= 1.0 - 1e-12


class TestApplyB:
    def test_no_jumps_identity(self, rng):
        levy = build_levy_grid(MertonJumpLaw(0.0), 0.01)
        v = rng.standard_normal(31)
        assert np.array_equal(apply_B(v, levy, 0.01), v)

    def test_constant_interior(self, bates_model):
        levy = build_levy_grid(bates_model.jump_law, 0.01, 1e-6)
        lw = levy.halfwidth
        v = np.full(2 * lw + 101, 3.7)
        out = apply_B(v, levy, 0.01)
        interior = out[lw:-lw]
        # weights almost balance lam_sum: residual is the quadrature tolerance
        assert np.max(np.abs(interior - 3.7)) <= 3.7 * 0.01 * 0.01 * 1e-6 + 1e-12

    def test_fft_matches_direct(self, bates_model, rng):
        levy = build_levy_grid(bates_model.jump_law, 0.005, 1e-7)
        v = rng.standard_normal((3, 2 * levy.halfwidth + 57))
        fft = apply_B(v, levy, 0.01, method="fft")
        direct = apply_B(v, levy, 0.01, method="direct")
        assert np.max(np.abs(fft - direct)) <= 1e-10

    def test_boundary_padding(self, bates_model, rng):
        levy = build_levy_grid(bates_model.jump_law, 0.01, 1e-6)
        lw = levy.halfwidth
        v = rng.standard_normal(2 * lw + 31)
        left = rng.standard_normal(lw)
        right = rng.standard_normal(lw)
        got = apply_B(v, levy, 0.02, boundary=(left, right))
        want = apply_B(np.concatenate([left, v, right]), levy, 0.02)[lw:-lw]
        # interior update of the padded vector equals the boundary-fed update
        assert np.allclose(got, want, atol=1e-12)

    def test_l2_gain_bound(self, bates_model):
        h = 0.01
        levy = build_levy_grid(bates_model.jump_law, 0.01, 1e-6)
        c_nu = levy.weights.sum() / bates_model.lam * 1.01
        rng = np.random.default_rng(5)
        v = rng.standard_normal(401)
        v /= np.linalg.norm(v)
        est = 0.0
        for _ in range(80):
            w = apply_B(v, levy, h)
            w = apply_B(w[::-1], levy, h)[::-1]  # B^T via mirrored kernel
            est = np.linalg.norm(w)
            v = w / est
        assert math.sqrt(est) <= 1.0 + 2.0 * bates_model.lam * c_nu * h


class TestBoundaryVector:
    def test_zero_boundary(self, bates_model):
        grid = SpaceGrid(0.0, 0.5, 4)
        levy = build_levy_grid(bates_model.jump_law, 0.5, tol=0.5)
        A = TriDiag(alpha=0.1, beta=0.4, size=grid.size)
        d = boundary_vector(A, grid, levy, 0.01, lambda t, xs: np.zeros_like(xs), 0.0, 0.01)
        assert np.array_equal(d, np.zeros(grid.size))

    def test_no_jump_only_edges(self):
        grid = SpaceGrid(0.0, 0.5, 4)
        levy = build_levy_grid(MertonJumpLaw(0.0), 0.5)
        A = TriDiag(alpha=0.1, beta=0.4, size=grid.size)
        bfun = lambda t, xs: np.ones_like(xs)
        d = boundary_vector(A, grid, levy, 0.01, bfun, 0.0, 0.01)
        assert d[0] == pytest.approx(-A.sub) and d[-1] == pytest.approx(-A.sup)
        assert np.all(d[1:-1] == 0.0)

    def test_hand_enumeration_put(self):
        # dx=0.5, L=2, M=4, put payoff boundary: compare against a literal
        # double loop over the out-of-grid jump terms
        law = MertonJumpLaw(2.0, 0.1, 0.6)
        dx, m, lw, h = 0.5, 4, 2, 0.05
        grid = SpaceGrid(math.log(100.0), dx, m)
        offs = np.arange(-lw, lw + 1)
        levy = LevyGrid(lw, dx, law.density(offs * dx))
        put = OptionContract(100.0, 0.5, "put", "european")
        bfun = lambda t, xs: put.payoff(xs)
        A = TriDiag(alpha=-0.07, beta=0.9, size=grid.size)
        d = boundary_vector(A, grid, levy, h, bfun, 0.0, h)
        want = np.zeros(grid.size)
        for i in range(-m, m + 1):
            acc = 0.0
            for l in range(-lw, lw + 1):
                if abs(i + l) > m:
                    acc += law.density(np.array([l * dx]))[0] * put.payoff(grid.x_at(i + l))
            want[i + m] = h * dx * acc
        want[0] += (A.beta - A.alpha) * put.payoff(grid.x_at(-m - 1))
        want[-1] += (A.beta + A.alpha) * put.payoff(grid.x_at(m + 1))
        assert np.allclose(d, want, atol=1e-14)

    def test_literal_ranges_drop_top_row(self):
        law = MertonJumpLaw(2.0, 0.0, 0.6)
        dx, m, lw, h = 0.5, 4, 2, 0.05
        grid = SpaceGrid(0.0, dx, m)
        levy = LevyGrid(lw, dx, law.density(np.arange(-lw, lw + 1) * dx))
        bfun = lambda t, xs: np.ones_like(xs)
        full = jump_overhang(grid, levy, h, lambda xs: bfun(0, xs), literal_ranges=False)
        lit = jump_overhang(grid, levy, h, lambda xs: bfun(0, xs), literal_ranges=True)
        assert lit[-1] == 0.0 and full[-1] > 0.0
        assert np.allclose(lit[:-1], full[:-1])


class TestUpwindStochasticOperator:
    def test_pi_rows_nonnegative_and_stochastic(self):
        # dense check on interior rows of Pi = A^{-1} B for the upwind scheme
        law = MertonJumpLaw(2.0, 0.0, 0.3)
        dx, h = 0.05, 0.05
        size = 101
        levy = build_levy_grid(law, dx, tol=1e-9)
        lw = levy.halfwidth
        A = TriDiag(alpha=h / dx * (-0.24), beta=0.5 * h / dx**2 * 0.09, size=size,
                    scheme="upwind")
        dense_a = A.to_dense()
        dense_b = np.eye(size)
        for l, nu_l in zip(levy.offsets(), levy.nu_values):
            idx = np.arange(size)
            keep = (idx + l >= 0) & (idx + l < size)
            dense_b[idx[keep], idx[keep] + l] += h * dx * nu_l
        dense_b -= h * dx * levy.lam_sum * np.eye(size)
        pi = np.linalg.solve(dense_a, dense_b)
        interior = slice(lw + 25, size - lw - 25)
        assert np.all(pi[interior] >= -1e-14)
        assert np.allclose(pi[interior].sum(axis=1), 1.0, atol=1e-12)


class TestQuadratureOrder:
    def test_trapezoid_second_order_on_kinked_payout(self, bates_model):
        # integral of |xi| nu(xi): the kink at 0 makes the trapezoid error a
        # clean O(dx^2); compare against a high-resolution quadrature
        law = bates_model.jump_law
        fine = 1e-4
        xs = np.arange(-12000, 12001) * fine
        ref = np.sum(np.abs(xs) * law.density(xs)) * fine
        errs, dxs = [], [0.04, 0.02, 0.01, 0.005]
        for dx in dxs:
            lmax = int(1.2 / dx)
            xg = np.arange(-lmax, lmax + 1) * dx
            errs.append(abs(np.sum(np.abs(xg) * law.density(xg)) * dx - ref))
        slope = np.polyfit(np.log(dxs), np.log(errs), 1)[0]
        assert slope >= 1.9
