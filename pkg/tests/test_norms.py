import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from collapsing.exceptions import ConfigurationError, ContractError
from collapsing.families import FamilySpec, build_family
from collapsing.gaussian import BlockSignature, GaussianTerm, WavepacketSum, diagonal_restrict, gram_l2_norm
from collapsing.norms import (
    FracDerivSpec, MixedNormSpec, RegionSpec, diagonal_field, eval_diagonal, frac_deriv_diagonal,
    lp_split, mixed_from_samples, mixed_norm, paper_p_region, paper_q_region, trace_samples,
)
from collapsing.oracle import quad_frac_deriv_1d
from collapsing.scaling import fit_slope


def single(term, sig=None):
    return WavepacketSum.from_terms(sig or BlockSignature.lambda_(1), [term])


class TestRegion:
    @pytest.mark.parametrize("kw", [
        dict(time_interval=(1, 1)), dict(space_box=()), dict(space_box=((1, 0),)),
        dict(t_samples=1), dict(t_rule="simpson"),
    ])
    def test_rejects(self, kw):
        base = dict(time_interval=(0, 1), space_box=((-1, 1),))
        with pytest.raises(ContractError):
            RegionSpec(**{**base, **kw})

    @pytest.mark.parametrize("rule", ["midpoint", "gauss-legendre"])
    def test_constant_integrand(self, rule):
        region = RegionSpec((2.0, 5.0), ((-1.0, 0.5), (0.0, 2.0)), 4, 5, rule, rule)
        _, wt = region.time_nodes()
        _, wx = region.space_nodes()
        vals = np.ones((wt.size, wx.size))
        assert mixed_from_samples(vals, wt, wx, 2, 2) == pytest.approx(math.sqrt(region.volume), rel=1e-14)
        assert mixed_from_samples(vals, wt, wx, math.inf, math.inf) == 1.0

    def test_p_region_geometry(self):
        w = build_family(FamilySpec("GP", 1, R=64))
        reg = paper_p_region(w)
        assert reg.time_interval == (56.0, 64.0)
        h = reg.space_box[0][1]
        # the diagonal point (x, x, x) stays inside the 1/100 ball
        assert math.sqrt(3) * h == pytest.approx(0.01)

    def test_q_region_geometry(self):
        w = build_family(FamilySpec("LambdaQ", 1, R=16, m=2))
        reg = paper_q_region(w)
        assert reg.time_interval == (0.0, 1.0)
        assert reg.space_box == ((-256.0, 256.0),)


class TestDiagonal:
    def test_single_term(self, rng):
        sig = BlockSignature.gamma(2)
        term = GaussianTerm(1 + 2j, rng.uniform(-3, 3, 4), rng.uniform(-1, 1, 4), 9.0)
        x = rng.uniform(-2, 2, 2)
        ref = diagonal_restrict(term, sig, 3.3)(x)
        assert eval_diagonal(single(term, sig), 3.3, x) == pytest.approx(ref, rel=1e-13)

    def test_culling_lambda_q(self, rng):
        w = build_family(FamilySpec("LambdaQ", 1, R=64, m=1))
        for _ in range(20):
            t = rng.uniform(0, 1)
            x = rng.uniform(-64, 64, 1)
            full = eval_diagonal(w, t, x, cull_tol=None)
            assert eval_diagonal(w, t, x, cull_tol=1e-12) == pytest.approx(full, rel=1e-10)

    def test_culling_bound(self, rng):
        # error <= cull_tol * largest term magnitude, even for a loose tolerance
        w = build_family(FamilySpec("LambdaQ", 1, R=16, m=2))
        tol = 1e-6
        for x in rng.uniform(-256, 256, 20):
            full = eval_diagonal(w, 0.5, [x], cull_tol=None)
            terms = [abs(diagonal_restrict(term, w.signature, 0.5)(x)) for term in w.terms]
            assert abs(eval_diagonal(w, 0.5, [x], cull_tol=tol) - full) <= tol * max(terms)

    def test_lambda_p_focus(self):
        R = 1024.0
        w = build_family(FamilySpec("LambdaP", 1, R=R))
        assert abs(eval_diagonal(w, R, [0.0])) >= 0.25 * len(w)

    @pytest.mark.parametrize("tol", [0.0, 1e-3, -1.0])
    def test_cull_range(self, tol):
        w = build_family(FamilySpec("LambdaP", 1, R=64))
        with pytest.raises(ContractError):
            eval_diagonal(w, 1.0, [0.0], cull_tol=tol)


class TestFracDeriv:
    def test_alpha_zero(self, rng):
        w = build_family(FamilySpec("GammaP", 1, R=64))
        for t, x in zip(rng.uniform(0, 64, 5), rng.uniform(-1, 1, 5)):
            ref = eval_diagonal(w, t, [x])
            assert frac_deriv_diagonal(w, t, [x], FracDerivSpec(0.0)) == pytest.approx(ref, rel=1e-6)

    def test_second_derivative_of_unit_gaussian(self):
        # diagonal of a width-2 Lambda term at t = 0 is exp(-x^2 / 2)
        w = single(GaussianTerm(1.0, [0, 0], [0, 0], 2.0))
        assert frac_deriv_diagonal(w, 0.0, [0.0], FracDerivSpec(2.0)) == pytest.approx(1.0, rel=1e-12)
        x = 0.7
        val = frac_deriv_diagonal(w, 0.0, [x], FracDerivSpec(2.0))
        assert val == pytest.approx((1 - x * x) * math.exp(-x * x / 2), rel=1e-12)

    @pytest.mark.parametrize("a", [2, 4])
    def test_even_alpha_analytic(self, a, rng):
        for _ in range(5):
            term = GaussianTerm(complex(*rng.normal(size=2)), rng.uniform(-2, 2, 2), rng.uniform(-1, 1, 2), 6.0)
            t, x = rng.uniform(-5, 5), rng.uniform(-2, 2)
            g = diagonal_restrict(term, BlockSignature.lambda_(1), t)
            u = g.beta[0] - g.alpha * x
            poly = g.alpha - u ** 2 if a == 2 else u ** 4 - 6 * g.alpha * u ** 2 + 3 * g.alpha ** 2
            ref = poly * g(x)
            got = frac_deriv_diagonal(single(term), t, [x], FracDerivSpec(float(a)))
            assert got == pytest.approx(ref, rel=1e-6)

    @pytest.mark.parametrize("a", [0.5, 1.0, 1.5, 3.0])
    def test_fractional_vs_quadrature(self, a):
        term = GaussianTerm(1.0, [0.3, -0.2], [2.0, 2.0], 8.0)
        w = single(term)
        t = 1.5
        g = diagonal_restrict(term, w.signature, t)
        for x in (-0.5, 0.0, 0.8):
            ref = quad_frac_deriv_1d(g, x, a, 60.0, 4096)
            got = frac_deriv_diagonal(w, t, [x], FracDerivSpec(a, freq_samples=24))
            assert got == pytest.approx(ref, rel=1e-6)

    @pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
    def test_lambda_q_concentration(self, a, rng):
        # spectrum sits near 2 xi, so |grad|^a multiplies by about 2^a
        w = build_family(FamilySpec("LambdaQ", 1, R=64, m=2))
        for t, x in zip(rng.uniform(0, 1, 5), rng.uniform(-100, 100, 5)):
            f = eval_diagonal(w, t, [x])
            df = frac_deriv_diagonal(w, t, [x], FracDerivSpec(a, freq_samples=8))
            assert abs(df) >= 0.5 * abs(f) * 2 ** a

    def test_box_padding(self):
        w = single(GaussianTerm(1.0, [0, 0], [2, 2], 8.0))
        with pytest.raises(ConfigurationError):
            frac_deriv_diagonal(w, 0.0, [0.0], FracDerivSpec(0.5, freq_box_padding=4.0))
        with pytest.raises(ConfigurationError):
            frac_deriv_diagonal(w, 0.0, [0.0], FracDerivSpec(0.5, freq_box_padding=7.0, freq_samples=80))

    def test_branch_cut(self):
        w = single(GaussianTerm(1.0, [0, 0], [0, 0], 8.0))
        with pytest.raises(ConfigurationError):
            frac_deriv_diagonal(w, 0.0, [0.0], FracDerivSpec(0.5))

    def test_negative_alpha(self):
        with pytest.raises(ContractError):
            FracDerivSpec(-1.0)


class TestMixedNorm:
    def test_homogeneity(self):
        w = build_family(FamilySpec("LambdaP", 1, R=256))
        spec = MixedNormSpec(1.5, 3.0, paper_p_region(w))
        c = 2.5 - 1j
        a = mixed_norm(w, spec, check_convergence=False).value
        b = mixed_norm(w.scaled(c), spec, check_convergence=False).value
        assert b == pytest.approx(abs(c) * a, rel=1e-12)

    def test_nesting(self):
        w = build_family(FamilySpec("GammaP", 1, R=256))
        region = paper_p_region(w, t_samples=8, x_samples=6)
        vals, wt, wx = trace_samples(w, region)
        flat = math.sqrt(np.sum(np.outer(wt, wx) * vals ** 2))
        got = mixed_norm(w, MixedNormSpec(2, 2, region), check_convergence=False).value
        assert got == pytest.approx(flat, rel=1e-10)

    def test_infinite_exponents(self):
        w = build_family(FamilySpec("LambdaP", 1, R=256))
        region = paper_p_region(w, 8, 6)
        vals, _, _ = trace_samples(w, region)
        got = mixed_norm(w, MixedNormSpec(math.inf, math.inf, region), check_convergence=False).value
        assert got == pytest.approx(vals.max(), rel=1e-15)

    def test_monotone_region(self):
        w = build_family(FamilySpec("LambdaQ", 1, R=16, m=2))
        small = RegionSpec((0, 1), ((-50, 50),), 8, 256)
        big = RegionSpec((0, 1), ((-100, 100),), 8, 512)
        a = mixed_norm(w, MixedNormSpec(2, 2, small))
        b = mixed_norm(w, MixedNormSpec(2, 2, big))
        assert a.converged and b.converged
        assert b.value >= a.value * (1 - 0.01)

    def test_convergence_flag(self):
        # a localized trace over a wide box: four nodes cannot resolve it
        w = build_family(FamilySpec("LambdaP", 1, R=256))
        coarse = RegionSpec((200, 256), ((-300, 300),), 2, 4, "midpoint", "midpoint")
        res = mixed_norm(w, MixedNormSpec(2, 2, coarse))
        assert not res.converged and res.rel_change > 0.01

    def test_p_region_slope(self):
        # lower-bound exponent R^{1/4} R^{n - 1/2} for p = q = 2, n = 1
        Rs = [2.0 ** k for k in range(8, 13)]
        vals = []
        for R in Rs:
            w = build_family(FamilySpec("LambdaP", 1, R=R))
            res = mixed_norm(w, MixedNormSpec(2, 2, paper_p_region(w)))
            assert res.converged
            vals.append(res.value)
        assert fit_slope(Rs, vals).slope >= 0.75 - 0.08

    def test_region_dim_mismatch(self):
        w = build_family(FamilySpec("LambdaP", 1, R=64))
        region = RegionSpec((0, 1), ((0, 1), (0, 1)))
        with pytest.raises(ContractError):
            mixed_norm(w, MixedNormSpec(2, 2, region))

    def test_exponent_range(self):
        with pytest.raises(ContractError):
            MixedNormSpec(0.5, 2, RegionSpec((0, 1), ((0, 1),)))


class TestLittlewoodPaley:
    def test_large_cutoff(self):
        w = build_family(FamilySpec("LambdaP", 1, R=64))
        low, high = lp_split(w, 1e6)
        assert high == 0.0
        assert low == pytest.approx(gram_l2_norm(w) ** 2, rel=1e-12)

    @pytest.mark.parametrize("R", [64, 256])
    def test_tail(self, R):
        w = build_family(FamilySpec("LambdaP", 1, R=R))
        low, high = lp_split(w, 10.0)
        assert high / (low + high) <= math.exp(-math.sqrt(R))

    @pytest.mark.parametrize("cutoff", [0.9, 1.0, 1.2])
    def test_straddling_cutoff_conserves_mass(self, cutoff):
        # cutoff cuts through every term's spectrum: quadrature branch
        w = build_family(FamilySpec("LambdaP", 1, R=64))
        low, high = lp_split(w, cutoff)
        assert low > 0 and high > 0
        assert low + high == pytest.approx(gram_l2_norm(w) ** 2, rel=1e-6)

    def test_small_cutoff(self):
        w = build_family(FamilySpec("LambdaP", 1, R=256))
        low, high = lp_split(w, 0.05)
        assert low == 0.0
        assert high == pytest.approx(gram_l2_norm(w) ** 2, rel=1e-12)

    def test_contract(self):
        w = build_family(FamilySpec("LambdaP", 1, R=64))
        with pytest.raises(ContractError):
            lp_split(w, 0.0)


@given(st.floats(0.1, 10), st.floats(1, 6), st.floats(1, 6))
def test_scaling_commutes_with_norm(c, p, q):
    w = build_family(FamilySpec("LambdaP", 1, R=64))
    region = paper_p_region(w, 4, 4)
    a = mixed_norm(w, MixedNormSpec(p, q, region), check_convergence=False).value
    b = mixed_norm(w.scaled(c), MixedNormSpec(p, q, region), check_convergence=False).value
    assert b == pytest.approx(c * a, rel=1e-12)


def test_field_shape():
    w = build_family(FamilySpec("GammaQ", 1, R=16, m=1))
    out = diagonal_field(w, 0.3, np.linspace(-10, 10, 33)[:, None])
    assert out.shape == (33,)
