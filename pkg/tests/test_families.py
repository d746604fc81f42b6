import math

import numpy as np
import pytest
from scipy.spatial.distance import pdist

from collapsing.exceptions import ContractError, ResourceError
from collapsing.families import (
    FamilySpec, ball_lattice_points, build_family, build_gamma_p, build_lambda_p, cone_points,
    count_envelope, gamma_surface_points, sphere_points,
)
from collapsing.gaussian import BlockSignature, WavepacketSum, evolve_sum, tube_constant
from collapsing.norms import eval_diagonal

P_CASES = [("LambdaP", n, R) for n, R in ((1, 64), (1, 1024), (2, 64), (3, 16))] + \
          [("GammaP", n, R) for n, R in ((1, 256), (2, 64))] + \
          [("GP", n, R) for n, R in ((1, 64), (1, 256), (2, 16))]


def check_cloud(cloud, norm_fn):
    pts = cloud.points
    if len(pts) > 1:
        assert pdist(pts).min() >= cloud.min_spacing
    norm_fn(pts)


class TestSpec:
    @pytest.mark.parametrize("kw", [dict(R=2), dict(C=0.5), dict(family="Nope"), dict(n=0)])
    def test_rejects(self, kw):
        base = dict(family="LambdaP", n=1, R=64)
        with pytest.raises(ContractError):
            FamilySpec(**{**base, **kw})

    def test_q_direction(self):
        with pytest.raises(ContractError):
            FamilySpec("LambdaQ", 2, R=16, m=2, direction=(1.0, 1.0))
        with pytest.raises(ContractError):
            FamilySpec("LambdaQ", 1, R=16, m=0)
        spec = FamilySpec("LambdaQ", 2, R=16, m=2, direction=(0.6, 0.8))
        np.testing.assert_allclose(spec.unit_direction, [0.6, 0.8])

    def test_default_C_is_calibrated(self):
        spec = FamilySpec("GammaP", 2)
        assert spec.tube_C == tube_constant(BlockSignature.gamma(2))
        assert FamilySpec("GammaP", 2, C=3.0).tube_C == 3.0


class TestSphere:
    def test_arc_example(self):
        R = 1024.0
        cloud = sphere_points(R, 1)
        pts = cloud.points
        assert 10 <= len(pts) <= 33
        np.testing.assert_allclose(np.linalg.norm(pts, axis=1), R, rtol=1e-9)
        assert np.all(pts / R >= 0.1 - 1e-12)
        # consecutive points along the admissible arc: chord >= 32
        assert np.diff(np.arctan2(pts[:, 1], pts[:, 0])).min() * R >= 32

    def test_admissible_arc_count(self):
        # arc between angles asin(0.1) and acos(0.1), chord step sqrt(R)
        R = 1024.0
        arc = math.acos(0.1) - math.asin(0.1)
        step = 2 * math.asin(math.sqrt(R) / (2 * R))
        assert len(sphere_points(R, 1)) == min(int(arc / step) + 1, math.ceil(R ** 0.5))

    def test_smallest(self):
        assert len(sphere_points(4.0, 1)) >= 1

    @pytest.mark.parametrize("n,R", [(1, 64), (2, 64), (2, 256), (3, 16)])
    def test_constraints(self, n, R):
        cloud = sphere_points(float(R), n, seed=3)
        check_cloud(cloud, lambda p: np.testing.assert_allclose(np.linalg.norm(p, axis=1), R, rtol=1e-9))
        assert len(cloud) <= math.ceil(R ** (n - 0.5))
        assert np.all(cloud.points / R >= 1 / (10 * n) - 1e-12)

    def test_floor_off(self):
        cloud = sphere_points(256.0, 1, floor=False)
        assert np.any(cloud.points < 0)
        assert pdist(cloud.points).min() >= 16

    def test_small_R_rejected(self):
        with pytest.raises(ContractError):
            sphere_points(2.0, 1)


class TestSurfaces:
    @pytest.mark.parametrize("n,R", [(1, 256), (2, 64), (3, 16)])
    def test_gamma_surface(self, n, R):
        cloud = gamma_surface_points(float(R), n, seed=1)
        x, y = cloud.points[:, :n], cloud.points[:, n:]
        nx, ny = np.linalg.norm(x, axis=1), np.linalg.norm(y, axis=1)
        np.testing.assert_allclose(nx, ny, rtol=1e-9)
        assert np.all((nx >= R / 2 * (1 - 1e-9)) & (nx <= R * (1 + 1e-9)))
        assert pdist(cloud.points).min() >= math.sqrt(R)
        assert np.all(x / R >= 1 / (10 * n) - 1e-12) and np.all(-y / R >= 1 / (10 * n) - 1e-12)

    def test_gamma_n1_on_lines(self):
        pts = gamma_surface_points(256.0, 1).points
        np.testing.assert_allclose(np.abs(pts[:, 0]), np.abs(pts[:, 1]), rtol=1e-12)
        assert pdist(pts).min() >= 16

    @pytest.mark.parametrize("n,R", [(1, 64), (1, 512), (2, 16)])
    def test_cone(self, n, R):
        cloud = cone_points(float(R), n, seed=2)
        p = cloud.points
        x, y, z = p[:, :n], p[:, n:2 * n], p[:, 2 * n:]
        lhs = np.sum(x * x, axis=1) + np.sum(y * y, axis=1)
        np.testing.assert_allclose(lhs, np.sum(z * z, axis=1), rtol=1e-9)
        assert pdist(p).min() >= math.sqrt(R)
        assert len(cloud) <= math.ceil(R ** ((3 * n - 1) / 2))


class TestLattice:
    @pytest.mark.parametrize("R,m,n,count", [(16, 1, 1, 9), (64, 2, 1, 1025)])
    def test_counts(self, R, m, n, count):
        assert len(ball_lattice_points(R, m, n)) == count

    def test_spacing_exact(self):
        cloud = ball_lattice_points(16, 2, 2)
        assert pdist(cloud.points).min() == 4.0
        assert np.all(np.linalg.norm(cloud.points, axis=1) <= 256 * (1 + 1e-12))

    def test_cap(self):
        with pytest.raises(ResourceError) as exc:
            ball_lattice_points(256, 2, 1, cap=1000)
        assert exc.value.required > 1000
        with pytest.raises(ResourceError):
            build_family(FamilySpec("LambdaQ", 3, R=64, m=3))


class TestBuilders:
    @pytest.mark.parametrize("family,n,R", P_CASES)
    def test_count_envelope(self, family, n, R):
        w = build_family(FamilySpec(family, n, R=R))
        lo, hi = count_envelope(FamilySpec(family, n, R=R))
        assert lo <= len(w) <= hi

    @pytest.mark.parametrize("family,R", [("LambdaQ", 64), ("GammaQ", 32), ("GQ", 16)])
    def test_q_envelope(self, family, R):
        spec = FamilySpec(family, 1, R=R, m=2)
        lo, hi = count_envelope(spec)
        assert lo <= len(build_family(spec)) <= hi

    def test_lambda_q_example(self):
        # 2 R^{m - 1/2} + 1 lattice points on [-R^m, R^m]: the segment has length 2
        w = build_family(FamilySpec("LambdaQ", 1, R=64, m=2))
        assert len(w) == 2 * 512 + 1
        lo, hi = count_envelope(FamilySpec("LambdaQ", 1, R=64, m=2))
        assert lo <= len(w) <= hi

    @pytest.mark.parametrize("n", [1, 2])
    def test_lambda_p_structure(self, n):
        spec = FamilySpec("LambdaP", n, R=64)
        w = build_lambda_p(spec)
        np.testing.assert_allclose(np.linalg.norm(w.modulations, axis=1), 1, atol=1e-12)
        np.testing.assert_allclose(w.signature.quadratic(w.modulations), 1, atol=1e-9)
        assert w.width == pytest.approx(spec.tube_C * 64)
        np.testing.assert_array_equal(w.amplitudes, 1)
        np.testing.assert_allclose(w.modulations, -w.centers / 64, rtol=1e-15)

    def test_gamma_p_structure(self):
        w = build_gamma_p(FamilySpec("GammaP", 1, R=256))
        assert np.abs(w.signature.quadratic(w.modulations)).max() <= 1e-9
        norms = np.linalg.norm(w.modulations, axis=1)
        assert np.all((norms >= 0.5 * math.sqrt(2) / 2) & (norms <= math.sqrt(2)))
        assert np.all(w.modulations >= 0.1 - 1e-12)

    def test_g_p_structure(self):
        w = build_family(FamilySpec("GP", 1, R=128))
        assert np.abs(w.signature.quadratic(w.modulations)).max() <= 1e-9
        norms = np.linalg.norm(w.modulations, axis=1)
        assert np.all((norms >= 0.5) & (norms <= 2))

    @pytest.mark.parametrize("family,mods", [
        ("LambdaQ", lambda xi: [xi, xi]),
        ("GammaQ", lambda xi: [xi, 0 * xi]),
        ("GQ", lambda xi: [xi, xi, -xi]),
    ])
    def test_q_structure(self, family, mods):
        xi = np.array([0.6, 0.8])
        w = build_family(FamilySpec(family, 2, R=16, m=1, direction=tuple(xi)))
        expect = np.concatenate(mods(xi))
        np.testing.assert_array_equal(w.modulations, np.tile(expect, (len(w), 1)))
        B = len(w.signature.blocks)
        blocks = w.centers.reshape(len(w), B, 2)
        for j in range(1, B):
            np.testing.assert_array_equal(blocks[:, j], blocks[:, 0])

    def test_gq_phase(self):
        w = build_family(FamilySpec("GQ", 1, R=16, m=2))
        np.testing.assert_allclose(w.signature.quadratic(w.modulations), 1.0)

    @pytest.mark.parametrize("family,R,m", [("LambdaP", 256, None), ("GammaP", 128, None), ("GP", 64, None),
                                            ("GammaQ", 32, 2), ("GQ", 16, 2)])
    def test_deterministic(self, family, R, m):
        spec = FamilySpec(family, 1, R=R, m=m, seed=7)
        a, b = build_family(spec), build_family(spec)
        for attr in ("amplitudes", "centers", "modulations"):
            assert getattr(a, attr).tobytes() == getattr(b, attr).tobytes()

    def test_seed_matters_for_stream(self):
        a = build_family(FamilySpec("LambdaP", 2, R=64, seed=0))
        b = build_family(FamilySpec("LambdaP", 2, R=64, seed=1))
        assert a.centers.tobytes() != b.centers.tobytes()


class TestLowerBounds:
    def test_lambda_p_focus(self):
        R = 64.0
        w = build_family(FamilySpec("LambdaP", 1, R=R))
        assert abs(evolve_sum(w, R, np.zeros((1, 2)))[0]) >= 0.25 * len(w)

    def test_lambda_q_own_term(self):
        w = build_family(FamilySpec("LambdaQ", 1, R=64, m=2))
        for k in (0, len(w) // 3, len(w) - 1):
            x = -w.centers[k, :1]
            assert abs(eval_diagonal(w, 0.0, x, cull_tol=None)) >= 0.9

    def test_gamma_q_drift(self):
        xi = np.array([1.0])
        w = build_family(FamilySpec("GammaQ", 1, R=64, m=2))
        for t in (0.0, 0.5, 1.0):
            for k in (5, len(w) // 2):
                x = t * xi - (-w.centers[k, :1])
                assert abs(eval_diagonal(w, t, x)) >= 0.5

    def test_gamma_q_block_centers(self):
        # evolved x-block drifts to -x_k + t xi, y block stays at -x_k
        w = build_family(FamilySpec("GammaQ", 1, R=16, m=1))
        k = 3
        xk = -w.centers[k, 0]
        t = 0.8
        ys = np.linspace(-xk - 30, -xk + 30, 6001)
        one = WavepacketSum.from_terms(w.signature, [w.terms[k]])
        vals = np.abs(evolve_sum(one, t, np.stack([np.full_like(ys, -xk + t), ys], axis=1)))
        assert ys[np.argmax(vals)] == pytest.approx(-xk, abs=0.01)
        xs = ys
        vals = np.abs(evolve_sum(one, t, np.stack([xs, np.full_like(xs, -xk)], axis=1)))
        assert xs[np.argmax(vals)] == pytest.approx(-xk + t, abs=0.01)

    def test_g_q_lower(self):
        w = build_family(FamilySpec("GQ", 1, R=64, m=2))
        for t in (0.0, 0.4, 1.0):
            for k in (0, len(w) // 2):
                x = t - (-w.centers[k, :1])
                assert abs(eval_diagonal(w, t, x)) >= 0.5
