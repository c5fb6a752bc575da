import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multilayer_sw.layers import DensityGrid
from multilayer_sw.norms import (
    DissipationIntegrals,
    hsk_norm,
    lq_norm,
    mixed_norm,
    solution_norm,
    wk_inf_norm,
)
from multilayer_sw.spectral import SpatialGrid, lambda_s

EXPONENTS = (1, 2, np.inf)


def smooth_field(rng, N, grid, modes=4):
    x = grid.x
    out = np.zeros((N, grid.M))
    for m in range(1, modes + 1):
        a, b = rng.standard_normal((2, N, 1)) / m**2
        out += a * np.cos(2 * np.pi * m * x / grid.L) + b * np.sin(2 * np.pi * m * x / grid.L)
    return out


class TestLq:
    @pytest.mark.parametrize("N", [1, 4, 17])
    def test_ones(self, N):
        assert lq_norm(np.ones(N), 2) == pytest.approx(1.0)

    def test_alternating(self):
        assert lq_norm(np.array([1.0, -1.0, 1.0, -1.0]), 1) == 1.0

    def test_sup(self):
        assert lq_norm(np.array([0.5, -3.0, 2.0]), np.inf) == 3.0

    def test_bad_exponent(self):
        with pytest.raises(ValueError):
            lq_norm(np.ones(3), 3)

    def test_nesting(self, rng):
        for _ in range(100):
            F = rng.standard_normal(rng.integers(1, 60)) * rng.exponential(3.0)
            assert lq_norm(F, 1) <= lq_norm(F, 2) * (1 + 1e-14)
            assert lq_norm(F, 2) <= lq_norm(F, np.inf) * (1 + 1e-14)


class TestMixed:
    def test_l2_orders_agree(self, sgrid, rng):
        for _ in range(10):
            F = rng.standard_normal((7, sgrid.M))
            a = mixed_norm(F, sgrid, "x", 2, 2)
            b = mixed_norm(F, sgrid, "layer", 2, 2)
            assert a == pytest.approx(b, rel=1e-12)

    def test_zero(self, sgrid):
        for outer in ("x", "layer"):
            for p in EXPONENTS:
                assert mixed_norm(np.zeros((3, sgrid.M)), sgrid, outer, p, 2) == 0.0

    @pytest.mark.parametrize("p", EXPONENTS)
    def test_single_layer_reduces_to_Lp(self, sgrid, rng, p):
        f = rng.standard_normal(sgrid.M)
        if p == np.inf:
            expected = np.max(np.abs(f))
        else:
            expected = (sgrid.dx * np.sum(np.abs(f) ** p)) ** (1 / p)
        for outer in ("x", "layer"):
            for q in EXPONENTS:
                assert mixed_norm(f[None], sgrid, outer, p, q) == pytest.approx(expected, rel=1e-13)

    def test_bad_outer(self, sgrid):
        with pytest.raises(ValueError):
            mixed_norm(np.zeros((2, sgrid.M)), sgrid, "t")


class TestHsk:
    def test_zero(self, sgrid):
        assert hsk_norm(np.zeros((4, sgrid.M)), sgrid, 3, 2) == 0.0

    def test_constant(self, sgrid):
        c = -1.7
        assert hsk_norm(np.full((5, sgrid.M), c), sgrid, 0, 0) == pytest.approx(abs(c) * np.sqrt(sgrid.L), rel=1e-14)

    def test_layer_constant_rows_drop_vertical_term(self, sgrid, rng):
        row = rng.standard_normal(sgrid.M)
        F = np.tile(row, (6, 1))
        assert hsk_norm(F, sgrid, 3, 1) == hsk_norm(F, sgrid, 3, 0)

    def test_k0_is_lambda_s(self, sgrid, rng):
        F = rng.standard_normal((4, sgrid.M))
        expected = mixed_norm(lambda_s(F, sgrid, 2), sgrid, "layer", 2, 2)
        assert hsk_norm(F, sgrid, 2, 0) == pytest.approx(expected, rel=1e-14)

    def test_k_limits(self, sgrid):
        F = np.zeros((4, sgrid.M))
        with pytest.raises(ValueError):
            hsk_norm(F, sgrid, 3, 3)
        with pytest.raises(ValueError):
            hsk_norm(F, sgrid, 1, 2)


class TestWkInf:
    def test_constant(self):
        for k in (0, 1, 2):
            assert wk_inf_norm(np.full(5, -2.0), k) == 2.0

    def test_densities(self):
        g = DensityGrid(10)
        assert wk_inf_norm(g.rho, 1) == pytest.approx(g.rho.max() + 1.0, rel=1e-12)

    def test_squared_densities_against_stencil(self):
        g = DensityGrid(8)
        F = g.rho**2
        N = 8
        first = max(abs(N * (F[i] - F[i + 1])) for i in range(N - 1))
        second = max(abs(N * N * (F[i] - 2 * F[i + 1] + F[i + 2])) for i in range(N - 2))
        expected = max(abs(F)) + first + second
        assert wk_inf_norm(F, 2) == pytest.approx(expected, rel=1e-12)
        # by hand: 1.9375^2 + (1.8125 + 1.9375) + 2
        assert expected == pytest.approx(9.50390625, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), a=st.floats(-50, 50))
def test_homogeneity_and_triangle(seed, a):
    r = np.random.default_rng(seed)
    g = SpatialGrid(16)
    F, G = r.standard_normal((2, 5, g.M))
    norms = [lambda X: hsk_norm(X, g, 2, 2), lambda X: mixed_norm(X, g, "x", 1, np.inf)]
    norms += [lambda X, p=p, q=q: mixed_norm(X, g, "layer", p, q) for p in EXPONENTS for q in EXPONENTS]
    for n in norms:
        assert n(a * F) == pytest.approx(abs(a) * n(F), rel=1e-12, abs=1e-12)
        assert n(F + G) <= n(F) + n(G) + 1e-12


def test_trace_embedding_ratio_bounded(rng):
    g = SpatialGrid(64)
    worst = 0.0
    for N in (8, 16, 32, 64, 128):
        for _ in range(5):
            F = smooth_field(rng, N, g)
            lhs = mixed_norm(lambda_s(F, g, 2), g, "layer", 2, np.inf)
            worst = max(worst, lhs / hsk_norm(F, g, 2.5, 1))
    assert worst <= 4.0


class TestSolutionNorm:
    def test_rest_is_zero(self, sgrid):
        Z = np.zeros((4, sgrid.M))
        assert solution_norm(Z, Z, sgrid, 0.05, 3, DissipationIntegrals()) == 0.0

    def test_requires_accumulators(self, sgrid):
        Z = np.zeros((4, sgrid.M))
        with pytest.raises(ValueError):
            solution_norm(Z, Z, sgrid, 0.05)
        assert solution_norm(Z, Z, sgrid, 0.05, instantaneous_only=True) == 0.0

    def test_dissipation_weights(self, sgrid):
        Z = np.zeros((4, sgrid.M))
        d = DissipationIntegrals(np.array([4.0, 9.0, 16.0, 25.0]))
        kappa = 0.09
        assert solution_norm(Z, Z, sgrid, kappa, 3, d) == pytest.approx(0.3 * (2 + 3 + 4) + 0.09 * 5)
