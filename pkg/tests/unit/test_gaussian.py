import math

import numpy as np
import pytest
from scipy import linalg

from wavekac import gaussian
from wavekac.gaussian import (GaussianLaw, JetSpec, DegenerateLawError, DuplicatePointError,
                              JetSpecError, SingularConditioningError)
from wavekac.kernel import IsotropicKernel


class TestJetSpec(object):
    def test_layout(self):
        spec = JetSpec([[0.0, 0.0]], ("value", "gradient", "hessian"))
        assert spec.dim == 6
        assert spec.labels() == ["p0:value", "p0:d1", "p0:d2", "p0:d11", "p0:d12", "p0:d22"]
        assert spec.indices(order="gradient") == [1, 2]

    def test_canonical_order(self):
        spec = JetSpec([[0.0, 0.0]], ("hessian", "value"))
        assert spec.orders == [("value", "hessian")]

    def test_per_point_orders(self):
        spec = JetSpec([[0.0, 0.0], [1.0, 0.0]], [("value",), ("gradient",)])
        assert spec.dim == 3
        assert spec.indices(point=1) == [1, 2]
        assert spec.min_separation == 1.0

    def test_duplicate(self):
        with pytest.raises(DuplicatePointError):
            JetSpec([[0.0, 0.0], [0.0, 0.0]])

    def test_bad_order(self):
        with pytest.raises(JetSpecError):
            JetSpec([[0.0, 0.0]], ("laplacian",))
        with pytest.raises(JetSpecError):
            JetSpec([[0.0, 0.0], [1.0, 1.0]], [("value",)])

    def test_hessian_from_vector(self):
        h = gaussian.hessian_from_vector(np.array([1.0, 2.0, 3.0]), 2)
        assert h.tolist() == [[1.0, 2.0], [2.0, 3.0]]


class TestGaussianLaw(object):
    def test_cholesky(self):
        law = GaussianLaw(np.eye(3))
        assert law.factor_method == "cholesky"
        assert law.min_eigenvalue() == pytest.approx(1.0)
        assert not law.is_degenerate()

    def test_degenerate_factor(self):
        law = GaussianLaw([[1.0, 1.0], [1.0, 1.0]])
        assert law.factor_method in ("cholesky+jitter", "eigen")
        assert law.is_degenerate()
        with pytest.raises(DegenerateLawError):
            law.density_at_zero()

    def test_rejects(self):
        with pytest.raises(DegenerateLawError):
            GaussianLaw([[1.0, 0.0], [0.0, -1.0]])
        with pytest.raises(DegenerateLawError):
            GaussianLaw([[1.0, 0.5], [0.0, 1.0]])
        with pytest.raises(DegenerateLawError):
            GaussianLaw(np.ones((2, 3)))

    def test_density(self):
        assert GaussianLaw(np.eye(2)).density_at_zero() == pytest.approx(1.0 / (2 * math.pi))
        law = GaussianLaw([[4.0]], mean=[2.0])
        expected = math.exp(-0.5) / math.sqrt(2 * math.pi * 4.0)
        assert law.density_at_zero() == pytest.approx(expected)

    def test_condition(self):
        law = GaussianLaw([[2.0, 1.0], [1.0, 2.0]], labels=["a", "b"])
        cond = law.condition([0], [1.0])
        assert cond.mean[0] == pytest.approx(0.5)
        assert cond.cov[0, 0] == pytest.approx(1.5)
        assert cond.labels == ["b"]
        assert law.condition([]) is law

    def test_condition_errors(self):
        law = GaussianLaw([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        with pytest.raises(SingularConditioningError) as exc:
            law.condition([0, 1])
        assert exc.value.eigenvalue < 1e-10
        with pytest.raises(JetSpecError):
            law.condition([0, 1, 2])
        with pytest.raises(JetSpecError):
            law.condition([0, 0])
        with pytest.raises(JetSpecError):
            law.condition([5])

    def test_marginal(self):
        law = GaussianLaw(np.diag([1.0, 2.0, 3.0]), labels=["a", "b", "c"])
        m = law.marginal([2, 0])
        assert np.allclose(m.cov, np.diag([3.0, 1.0]))
        assert m.labels == ["c", "a"]

    def test_sample(self):
        cov = np.array([[2.0, 0.6], [0.6, 1.0]])
        law = GaussianLaw(cov, mean=[1.0, -1.0])
        draws = law.sample(np.random.default_rng(11), 40000)
        assert draws.shape == (40000, 2)
        assert np.allclose(draws.mean(axis=0), [1.0, -1.0], atol=0.05)
        assert np.allclose(np.cov(draws.T), cov, atol=0.08)

    def test_scalar_condition(self):
        law = GaussianLaw([[1.0, 0.5], [0.5, 1.0]])
        cond = law.condition([0])
        assert cond.cov[0, 0] == pytest.approx(0.75)
        assert cond.mean[0] == pytest.approx(0.0)

    def test_condition_in_stages(self):
        a = np.random.default_rng(3).standard_normal((5, 5))
        law = GaussianLaw(a.dot(a.T) + 0.5 * np.eye(5), mean=np.arange(5.0))
        # After dropping coordinate 0, coordinate 2 sits at position 1
        staged = law.condition([0], [0.3]).condition([1], [-0.7])
        joint = law.condition([0, 2], [0.3, -0.7])
        assert np.allclose(staged.mean, joint.mean, atol=1e-10)
        assert np.allclose(staged.cov, joint.cov, atol=1e-10)

    def test_block_density(self):
        a = np.array([[2.0, 0.3], [0.3, 1.0]])
        b = np.array([[0.5]])
        law = GaussianLaw(linalg.block_diag(a, b), mean=[0.2, -0.1, 0.4])
        expected = GaussianLaw(a, mean=[0.2, -0.1]).density_at_zero() * \
            GaussianLaw(b, mean=[0.4]).density_at_zero()
        assert law.density_at_zero() == pytest.approx(expected, rel=1e-12)

    def test_hessian_given_critical(self):
        spec = JetSpec([[0.0, 0.0]], ("gradient", "hessian"))
        law = gaussian.assemble_jet_covariance(IsotropicKernel(2), spec)
        cond = law.condition(spec.indices(order="gradient"))
        assert cond.labels == ["p0:d11", "p0:d12", "p0:d22"]
        # Reordered to (d11, d22, d12)
        perm = [0, 2, 1]
        expected = [[3.0 / 8, 1.0 / 8, 0.0], [1.0 / 8, 3.0 / 8, 0.0], [0.0, 0.0, 1.0 / 8]]
        assert np.allclose(cond.cov[np.ix_(perm, perm)], expected, atol=1e-14)
        assert np.allclose(cond.mean, 0.0)

    def test_sampled_gradient_variance(self):
        spec = JetSpec([[0.0, 0.0]], ("value", "gradient"))
        law = gaussian.assemble_jet_covariance(IsotropicKernel(2), spec)
        x = law.sample(np.random.default_rng(21), 10 ** 5)[:, 1]
        dev = (x - x.mean()) ** 2
        se = dev.std(ddof=1) / math.sqrt(len(x))
        assert abs(x.var(ddof=1) - 0.5) < 3 * se

    def test_sample_reproducible(self):
        law = GaussianLaw([[2.0, 0.6], [0.6, 1.0]])
        a = law.sample(np.random.default_rng(5), 100)
        b = law.sample(np.random.default_rng(5), 100)
        assert np.array_equal(a, b)


class TestAssemble(object):
    def test_one_point(self):
        k = IsotropicKernel(2)
        spec = JetSpec([[0.0, 0.0]], ("value", "gradient", "hessian"))
        law = gaussian.assemble_jet_covariance(k, spec)
        cov = law.cov
        assert cov[0, 0] == pytest.approx(1.0)
        assert np.allclose(cov[1:3, 1:3], 0.5 * np.eye(2))
        assert np.allclose(cov[0, 1:3], 0.0)
        assert cov[0, 3] == pytest.approx(-0.5)
        assert cov[0, 4] == pytest.approx(0.0)
        assert cov[3, 3] == pytest.approx(3.0 / 8)
        assert law.labels == spec.labels()

    def test_full_jet_singular(self):
        # Helmholtz: trace of the hessian equals minus the value
        k = IsotropicKernel(2)
        spec = JetSpec([[0.0, 0.0]], ("value", "gradient", "hessian"))
        assert gaussian.assemble_jet_covariance(k, spec).is_degenerate()

    def test_two_points(self):
        k = IsotropicKernel(2)
        spec = JetSpec([[0.0, 0.0], [2.0, 0.0]])
        cov = gaussian.assemble_jet_covariance(k, spec).cov
        assert cov[0, 1] == pytest.approx(k.profile(2.0))
        assert cov[0, 1] == pytest.approx(cov[1, 0])

    def test_dimension_mismatch(self):
        with pytest.raises(JetSpecError):
            gaussian.assemble_jet_covariance(IsotropicKernel(3), JetSpec([[0.0, 0.0]]))
