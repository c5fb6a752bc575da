import numpy as np
import pytest
import sympy as sp
from scipy.integrate import quad

from multilayer_sw.layers import DensityGrid, restrict
from multilayer_sw.norms import hsk_norm
from multilayer_sw.spectral import SpatialGrid
from multilayer_sw.stratification import (
    ConstX,
    CosRho,
    CosX,
    PolyRho,
    QuadratureError,
    Sech2,
    SeparableField,
    Term,
    consistency_remainder,
    gauss_legendre,
    make_profile,
    montgomery_dx,
    profile_norm,
    project_PN,
    project_PN_bar,
)

SG = SpatialGrid(64)


def field(surf, *terms):
    return SeparableField(tuple(terms), surf)


def brute_force_kink_integral(integrand, surf, bott, rho, panels=100_000):
    """Composite trapezoid on a uniform grid with a node forced onto the kink."""
    r = np.union1d(np.linspace(surf, bott, panels + 1), [rho])
    vals = np.minimum(r, rho) * integrand(r)
    return np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(r))


class TestShapes:
    def test_sech2_derivative(self):
        s = Sech2(1.0, 0.7)
        x = np.linspace(-3, 4, 41)
        h = 1e-6
        np.testing.assert_allclose(s.dx(x), (s(x + h) - s(x - h)) / (2 * h), atol=1e-8)

    def test_cos_rho_derivatives(self):
        c = CosRho(2.5, 0.3)
        z = np.linspace(0, 1, 11)
        np.testing.assert_allclose(c(z, 1), -2.5 * np.sin(2.5 * z + 0.3), atol=1e-14)
        np.testing.assert_allclose(c(z, 2), -6.25 * np.cos(2.5 * z + 0.3), atol=1e-13)

    def test_poly_rho(self):
        p = PolyRho((1.0, 2.0, 3.0))
        assert p(0.5) == pytest.approx(2.75)
        assert p(0.5, 1) == pytest.approx(5.0)
        assert p.antiderivative(1.0) == pytest.approx(3.0)


class TestProjection:
    def test_rho_independent_rows_identical(self):
        dg = DensityGrid(5)
        f = field(dg.surf, Term(1.0, Sech2(3.0), PolyRho((1.0,))))
        P = project_PN(f, SG, dg)
        assert np.all(P == P[0])
        np.testing.assert_array_equal(project_PN_bar(f, SG, dg), P)

    def test_identity_in_rho(self):
        dg = DensityGrid(6, 1.0, 2.0)
        # psi(z) = surf + z  is rho itself
        f = field(dg.surf, Term(1.0, ConstX(), PolyRho((dg.surf, 1.0))))
        np.testing.assert_allclose(project_PN(f, SG, dg)[:, 0], dg.rho, rtol=1e-15)
        np.testing.assert_allclose(project_PN_bar(f, SG, dg)[:, 0], dg.rho, rtol=1e-14)

    def test_cell_average_of_square_against_quad(self):
        dg = DensityGrid(2, 1.0, 2.0)
        f = field(dg.surf, Term(1.0, ConstX(), PolyRho((1.0, 2.0, 1.0))))  # (1 + z)^2 = rho^2
        got = project_PN_bar(f, SG, dg)[:, 0]
        oracle = [quad(lambda r: r**2, a, a + 0.5)[0] / 0.5 for a in (1.0, 1.5)]
        np.testing.assert_allclose(got, oracle, rtol=1e-12)
        np.testing.assert_allclose(got, [19 / 12, 37 / 12], rtol=1e-12)

    def test_cell_average_cosine_against_quad(self):
        dg = DensityGrid(7, 1.0, 2.0)
        f = field(dg.surf, Term(0.3, ConstX(), CosRho(2.0, 0.4)))
        edges = dg.cell_edges()
        oracle = [quad(lambda r: 0.3 * np.cos(2.0 * (r - dg.surf) + 0.4), a, b)[0] * 7 for a, b in zip(edges[:-1], edges[1:])]
        np.testing.assert_allclose(project_PN_bar(f, SG, dg)[:, 0], oracle, rtol=1e-12)

    def test_multiplicative(self, rng):
        dg = DensityGrid(9)
        for _ in range(5):
            a, b, c = rng.standard_normal(3)
            f = field(dg.surf, Term(a, Sech2(6.0, 1.5), CosRho(b)))
            g = field(dg.surf, Term(1.0, CosX(0.5, c), PolyRho((1.0, b))))
            # product built as a single separable term with the product shapes sampled pointwise
            Pf, Pg = project_PN(f, SG, dg), project_PN(g, SG, dg)
            z = dg.rho - dg.surf
            direct = (a * np.cos(b * z) * (1 + b * z))[:, None] * (Sech2(6.0, 1.5)(SG.x) * np.cos(0.5 * SG.x + c))[None]
            np.testing.assert_allclose(Pf * Pg, direct, rtol=1e-14, atol=1e-15)

    @pytest.mark.parametrize("N,r", [(5, 3), (15, 3), (7, 5)])
    def test_nesting_bit_equal(self, N, r):
        coarse, fine = DensityGrid(N), DensityGrid(N * r)
        profile = make_profile("default", SG, coarse)
        np.testing.assert_array_equal(
            restrict(project_PN(profile.h, SG, fine), r), project_PN(profile.h, SG, coarse)
        )

    def test_continuity_ratio_bounded(self):
        f = make_profile("default", SG, DensityGrid(4)).h
        denom = profile_norm(f, SG, 3, 1)
        ratios = [hsk_norm(project_PN(f, SG, DensityGrid(N)), SG, 3, 1) / denom for N in (4, 8, 16, 32, 64, 128)]
        assert max(ratios) <= 1.05
        assert min(ratios) > 0.5


class TestQuadrature:
    def test_polynomial_exact(self):
        got = gauss_legendre(lambda r: (r**5)[None], 0.0, 2.0)
        assert got[0] == pytest.approx(64 / 6, rel=1e-14)

    def test_failure_is_explicit(self):
        with pytest.raises(QuadratureError):
            gauss_legendre(lambda r: (1 / np.abs(r - 0.3) ** 0.9)[None], 0.0, 1.0, max_depth=3)


class TestMontgomery:
    def test_no_x_dependence(self):
        dg = DensityGrid(4)
        f = field(dg.surf, Term(1.0, ConstX(), CosRho(1.0)))
        assert np.max(np.abs(montgomery_dx(f, SG.x, dg.rho[2]))) == 0.0

    def test_rho_independent_vs_brute_force(self):
        dg = DensityGrid(6, 1.0, 2.0)
        phi = Sech2(SG.L / 2, 1.0)
        f = field(dg.surf, Term(1.0, phi, PolyRho((1.0,))))
        x = SG.x[::8]
        for r in dg.rho:
            oracle = brute_force_kink_integral(lambda q: np.ones_like(q), dg.surf, dg.bott, r)
            closed = r * (dg.bott - r) + (r**2 - dg.surf**2) / 2
            assert oracle == pytest.approx(closed, abs=1e-10)
            np.testing.assert_allclose(montgomery_dx(f, x, r), phi.dx(x) * oracle, atol=1e-10)

    def test_linear_in_rho_vs_symbolic(self):
        dg = DensityGrid(5, 1.0, 2.0)
        phi = Sech2(SG.L / 2, 1.0)
        f = field(dg.surf, Term(1.0, phi, PolyRho((0.0, 1.0))))
        q, r, a, b = sp.symbols("q r a b", real=True)
        antider = sp.integrate(q * (q - a), (q, a, r)) + r * sp.integrate(q - a, (q, r, b))
        kernel = sp.lambdify((r, a, b), antider)
        x = SG.x[::4]
        for rho in dg.rho:
            expected = phi.dx(x) * kernel(rho, dg.surf, dg.bott)
            np.testing.assert_allclose(montgomery_dx(f, x, rho), expected, rtol=1e-12, atol=1e-15)

    def test_general_profile_vs_brute_force(self):
        dg = DensityGrid(3, 1.0, 2.0)
        p = make_profile("default", SG, dg)
        x = np.array([SG.L / 2 - 0.7])
        dphi = 0.1 * Sech2(SG.L / 2, 1.0).dx(x)[0]
        for rho in dg.rho:
            oracle = brute_force_kink_integral(
                lambda q: dphi * (1 + 0.5 * np.cos(np.pi * (q - dg.surf))), dg.surf, dg.bott, rho
            )
            assert montgomery_dx(p.h, x, rho)[0] == pytest.approx(oracle, abs=1e-10)

    def test_outside_interval(self):
        dg = DensityGrid(3)
        with pytest.raises(ValueError):
            montgomery_dx(make_profile("default", SG, dg).h, SG.x, dg.bott + 0.1)


class TestRemainder:
    def test_zero_forcing(self):
        dg = DensityGrid(8)
        f = field(dg.surf, Term(1.0, ConstX(), CosRho(2.0)))
        assert np.max(np.abs(consistency_remainder(f, SG, dg).R)) < 1e-15

    @pytest.mark.parametrize("N", [1, 2, 5, 16, 64])
    def test_kink_cell_closed_form(self, N):
        dg = DensityGrid(N, 1.0, 2.0)
        phi = Sech2(SG.L / 2, 1.0)
        f = field(dg.surf, Term(1.0, phi, PolyRho((1.0,))))
        R = consistency_remainder(f, SG, dg).R
        expected = phi.dx(SG.x)[None] / (8 * N**2 * dg.rho[:, None])
        assert np.max(np.abs(R - expected)) <= 1e-8 * np.max(np.abs(expected))

    def test_kink_cell_error_by_brute_force(self):
        # midpoint rule error on the cell containing the kink is exactly 1/(8 N^2)
        N = 10
        dg = DensityGrid(N)
        for i in (0, 4, 9):
            r = dg.rho[i]
            lo, hi = r - 0.5 / N, r + 0.5 / N
            fine = np.linspace(lo, hi, 200_001)
            vals = np.minimum(fine, r)
            exact = np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(fine))
            assert r / N - exact == pytest.approx(1 / (8 * N**2), rel=1e-8)

    def test_self_ratio_on_doubling(self):
        norms = []
        for N in (8, 16):
            dg = DensityGrid(N)
            norms.append(consistency_remainder(make_profile("default", SG, dg).h, SG, dg).norm(3, 2))
        assert 3.4 <= norms[0] / norms[1] <= 4.7

    def test_frame_mismatch_rejected(self):
        dg = DensityGrid(4, 1.0, 2.0)
        other = DensityGrid(4, 3.0, 4.0)
        with pytest.raises(ValueError):
            consistency_remainder(make_profile("default", SG, other).h, SG, dg)


def test_presets_satisfy_non_cavitation():
    dg = DensityGrid(4)
    for name in ("default", "small", "uniform", "mode", "rest"):
        assert make_profile(name, SG, dg).min_total_depth(SG) >= 0.5
    with pytest.raises(ValueError, match="unknown profile"):
        make_profile("nope", SG, dg)
