"""Encoders, estimators (including the exact-Jacobian MMSE), group actions."""

import numpy as np
import pytest

from semtest.errors import (
    ConfigError,
    DimensionMismatchError,
    ExternalProcessError,
    UnknownIdError,
    ZeroImageEmbeddingError,
)
from semtest.operators import (
    AffineEstimator,
    CyclicShift2D,
    ExternalEstimator,
    IdentityEstimator,
    LinearSphereEncoder,
    StoredEncoder,
    affine_mmse,
)
from semtest.rng import master_rng
from semtest.types import CovModel, ForwardModel, ImageVec, MeasurementVec, UnitEmbedding


class TestLinearSphereEncoder:
    def test_unit_norm_output(self):
        rng = master_rng(0)
        enc = LinearSphereEncoder(rng.standard_normal((4, 9)))
        e = enc.encode(rng.standard_normal(9))
        assert np.linalg.norm(e.v) == pytest.approx(1.0)

    def test_scale_invariance(self):
        rng = master_rng(1)
        enc = LinearSphereEncoder(rng.standard_normal((4, 9)))
        x = rng.standard_normal(9)
        a = enc.encode(x)
        b = enc.encode(3.7 * x)
        np.testing.assert_allclose(a.v, b.v, atol=1e-14)

    def test_zero_projection_rejected(self):
        enc = LinearSphereEncoder(np.array([[1.0, 0.0], [0.0, 0.0]]))
        with pytest.raises(ZeroImageEmbeddingError):
            enc.encode(np.array([0.0, 1.0]))

    def test_batch_matches_single(self):
        rng = master_rng(2)
        enc = LinearSphereEncoder(rng.standard_normal((5, 7)))
        xs = rng.standard_normal((6, 7))
        batch = enc.encode_batch(xs)
        for i in range(6):
            np.testing.assert_allclose(batch[i], enc.encode(xs[i]).v, atol=1e-14)

    def test_accepts_image_vec(self):
        enc = LinearSphereEncoder(np.eye(3))
        e = enc.encode(ImageVec([3.0, 0.0, 4.0]))
        np.testing.assert_allclose(e.v, [0.6, 0.0, 0.8])


class TestStoredEncoder:
    def test_lookup(self):
        q = UnitEmbedding([1.0, 0.0])
        enc = StoredEncoder({"cat": q})
        assert enc.encode("cat") is q

    def test_unknown_id(self):
        with pytest.raises(UnknownIdError):
            StoredEncoder({}).encode("dog")


class TestAffineEstimator:
    def test_identity_estimator(self):
        y = MeasurementVec([1.0, 2.0])
        np.testing.assert_array_equal(IdentityEstimator().estimate(y).data, y.data)

    def test_affine_evaluation(self):
        est = AffineEstimator(b=[1.0, 0.0], gain=[[2.0, 0.0], [0.0, 3.0]])
        out = est.estimate(MeasurementVec([1.0, 1.0]))
        np.testing.assert_allclose(out.data, [3.0, 3.0])

    def test_jacobian_is_exact(self):
        # The estimator is affine, so finite differences recover the gain
        # matrix to machine precision at any step size.
        rng = master_rng(3)
        gain = rng.standard_normal((4, 4))
        est = AffineEstimator(b=rng.standard_normal(4), gain=gain)
        y0 = rng.standard_normal(4)
        h = 1e-3
        jac = np.empty((4, 4))
        for j in range(4):
            e = np.zeros(4)
            e[j] = h
            fp = est.estimate(MeasurementVec(y0 + e)).data
            fm = est.estimate(MeasurementVec(y0 - e)).data
            jac[:, j] = (fp - fm) / (2 * h)
        np.testing.assert_allclose(jac, gain, atol=1e-6)

    def test_batch_matches_single(self):
        rng = master_rng(4)
        est = AffineEstimator(b=rng.standard_normal(3), gain=rng.standard_normal((3, 5)))
        ys = rng.standard_normal((4, 5))
        batch = est.estimate_batch(ys)
        for i in range(4):
            np.testing.assert_allclose(
                batch[i], est.estimate(MeasurementVec(ys[i])).data, atol=1e-14
            )

    def test_shape_validation(self):
        with pytest.raises(ConfigError):
            AffineEstimator(b=[1.0, 2.0], gain=[[1.0]])


class TestAffineMmse:
    def test_scalar_wiener_gain(self):
        # Identity forward model with isotropic prior: B = c^2/(c^2+s^2) I.
        c2, s2 = 2.0, 0.5
        est = affine_mmse(
            ForwardModel.identity(3),
            CovModel.scaled_identity(s2, 3),
            ImageVec([0.0, 0.0, 0.0]),
            CovModel.scaled_identity(c2, 3),
        )
        np.testing.assert_allclose(est.gain, (c2 / (c2 + s2)) * np.eye(3), atol=1e-12)
        np.testing.assert_allclose(est.b, 0.0, atol=1e-12)

    def test_dense_oracle(self):
        # Direct-inverse oracle for a 2x2 problem.
        a = np.array([[1.0, 0.5], [0.0, 1.0]])
        c = np.array([[1.5, 0.2], [0.2, 0.8]])
        sigma = np.array([[0.3, 0.0], [0.0, 0.4]])
        mu = np.array([0.4, -0.1])
        est = affine_mmse(
            ForwardModel.dense(a),
            CovModel.dense(sigma),
            ImageVec(mu),
            CovModel.dense(c),
        )
        gain = c @ a.T @ np.linalg.inv(a @ c @ a.T + sigma)
        np.testing.assert_allclose(est.gain, gain, atol=1e-10)
        np.testing.assert_allclose(est.b, mu - gain @ a @ mu, atol=1e-10)

    def test_low_noise_limit(self):
        # Vanishing noise on an invertible forward model: x_hat(Ax) -> x.
        rng = master_rng(5)
        a = rng.standard_normal((4, 4)) + 4 * np.eye(4)
        x = rng.standard_normal(4)
        est = affine_mmse(
            ForwardModel.dense(a),
            CovModel.scaled_identity(1e-10, 4),
            ImageVec(np.zeros(4)),
            CovModel.scaled_identity(1.0, 4),
        )
        out = est.estimate(MeasurementVec(a @ x))
        np.testing.assert_allclose(out.data, x, atol=1e-6)

    def test_unbiased_at_prior_mean(self):
        rng = master_rng(6)
        mu = rng.standard_normal(3)
        a = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]])
        est = affine_mmse(
            ForwardModel.dense(a),
            CovModel.scaled_identity(0.2, 2),
            ImageVec(mu),
            CovModel.scaled_identity(1.0, 3),
        )
        out = est.estimate(MeasurementVec(a @ mu))
        np.testing.assert_allclose(out.data, mu, atol=1e-12)


class TestExternalEstimator:
    def test_echo_protocol(self, tmp_path):
        est = ExternalEstimator(
            command='cp "$ETEST_IO_DIR/in.emt" "$ETEST_IO_DIR/out.emt"',
            workdir=str(tmp_path),
        )
        y = MeasurementVec([1.5, -2.0, 0.25])
        out = est.estimate(y)
        np.testing.assert_array_equal(out.data, y.data)

    def test_nonzero_exit(self, tmp_path):
        est = ExternalEstimator(command="exit 3", workdir=str(tmp_path))
        with pytest.raises(ExternalProcessError, match="exited 3"):
            est.estimate(MeasurementVec([1.0]))

    def test_missing_output(self, tmp_path):
        est = ExternalEstimator(command="true", workdir=str(tmp_path))
        with pytest.raises(ExternalProcessError, match="out.emt"):
            est.estimate(MeasurementVec([1.0]))

    def test_timeout(self, tmp_path):
        est = ExternalEstimator(command="sleep 5", workdir=str(tmp_path), timeout=0.2)
        with pytest.raises(ExternalProcessError, match="timed out"):
            est.estimate(MeasurementVec([1.0]))


class TestCyclicShift2D:
    def test_identity_params(self):
        x = ImageVec(np.arange(16, dtype=np.float64), shape=(4, 4, 1))
        g = CyclicShift2D(2, 2)
        np.testing.assert_array_equal(g.apply((0, 0), x).data, x.data)

    def test_known_shift(self):
        x = ImageVec([1.0, 2.0, 3.0, 4.0], shape=(2, 2, 1))
        g = CyclicShift2D(1, 1)
        out = g.apply((1, 0), x)
        np.testing.assert_array_equal(out.data, [2.0, 1.0, 4.0, 3.0])

    def test_inverse_is_exact(self):
        rng = master_rng(7)
        x = ImageVec(rng.standard_normal(64), shape=(8, 8, 1))
        g = CyclicShift2D(3, 3)
        for _ in range(20):
            params = g.sample_params(rng)
            back = g.invert(params, g.apply(params, x))
            np.testing.assert_array_equal(back.data, x.data)

    def test_composition_closure(self):
        # Exhaustive check on a 4x4 grid: g2 (g1 x) = (g1 + g2 mod 4) x.
        x = ImageVec(np.arange(16, dtype=np.float64), shape=(4, 4, 1))
        g = CyclicShift2D(3, 3)
        for d1 in [(-2, 1), (0, 3), (3, -3)]:
            for d2 in [(1, 1), (-3, 2)]:
                combined = g.apply(d2, g.apply(d1, x))
                dx = (d1[0] + d2[0]) % 4
                dy = (d1[1] + d2[1]) % 4
                dx = dx if dx <= 3 else dx - 4
                dy = dy if dy <= 3 else dy - 4
                direct = g.apply((dx, dy), x)
                np.testing.assert_array_equal(combined.data, direct.data)

    def test_requires_shape(self):
        with pytest.raises(ConfigError):
            CyclicShift2D(1, 1).apply((1, 1), ImageVec([1.0, 2.0]))

    def test_bounds_enforced(self):
        x = ImageVec([1.0, 2.0, 3.0, 4.0], shape=(2, 2, 1))
        with pytest.raises(ConfigError):
            CyclicShift2D(1, 1).apply((2, 0), x)

    def test_sampled_params_within_bounds(self):
        g = CyclicShift2D(2, 1)
        rng = master_rng(8)
        for _ in range(200):
            dx, dy = g.sample_params(rng)
            assert -2 <= dx <= 2 and -1 <= dy <= 1
