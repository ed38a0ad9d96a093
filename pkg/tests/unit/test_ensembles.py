import math

import numpy as np
import pytest
from scipy import special

from wavekac import ensembles
from wavekac.ensembles import (EnsembleError, EmptyAnnulusError, ChartError, SphereChart,
                               SphereKernel, SphereWave, RescaledField)


def rng(seed=0):
    return np.random.default_rng(seed)


class TestPlaneWaves(object):
    def test_sample(self):
        f = ensembles.sample_rwm(2, 64, rng=rng())
        assert f.M == 64
        assert f.scale == pytest.approx(1.0 / 8)
        assert f.directions.shape == (64, 2)
        assert np.allclose(np.linalg.norm(f.directions, axis=1), 1.0)

    def test_reproducible(self):
        a = ensembles.sample_rwm(3, 32, rng=rng(5))
        b = ensembles.sample_rwm(3, 32, rng=rng(5))
        assert a.to_dict() == b.to_dict()

    def test_bad_params(self):
        with pytest.raises(EnsembleError):
            ensembles.sample_rwm(3, 16, "equispaced", rng())
        with pytest.raises(EnsembleError):
            ensembles.sample_rwm(2, 16, "random", rng())
        with pytest.raises(EnsembleError):
            ensembles.sample_rwm(2, 0, rng=rng())

    def test_deterministic_wave(self):
        f = ensembles.plane_wave([[1.0, 0.0]])
        assert f.values([math.pi, 0.3])[0] == pytest.approx(-1.0)

    def test_helmholtz(self):
        f = ensembles.sample_rwm(2, 64, rng=rng(2))
        pts = rng(3).uniform(-5, 5, size=(10, 2))
        assert np.allclose(f.laplacian(pts), -f.values(pts), atol=1e-10)

    def test_jet_finite_difference(self):
        f = ensembles.sample_rwm(2, 32, rng=rng(4))
        x = np.array([0.4, -1.2])
        vals, grads, hess = f.jet(x)
        h = 1e-6
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            fd = (f.values(x + e) - f.values(x - e)) / (2 * h)
            assert grads[0, i] == pytest.approx(fd[0], abs=1e-7)
            _, gp, _ = f.jet(x + e)
            _, gm, _ = f.jet(x - e)
            assert np.allclose(hess[0, i], (gp[0] - gm[0]) / (2 * h), atol=1e-6)
        assert vals[0] == pytest.approx(f.values(x)[0])

    @pytest.mark.parametrize("n", [2, 3])
    def test_grid_matches_values(self, n):
        f = ensembles.sample_rwm(n, 16, rng=rng(n))
        axes = [np.linspace(-1, 1, 4), np.linspace(0, 2, 3), np.linspace(-0.5, 0.5, 2)][:n]
        grid = ensembles.grid_values(f, axes)
        direct = ensembles.generic_grid_values(f, axes)
        assert grid.shape == tuple(len(ax) for ax in axes)
        assert np.allclose(grid, direct, atol=1e-12)
        grads = ensembles.grid_gradients(f, axes)
        assert np.allclose(grads, ensembles.generic_grid_gradients(f, axes), atol=1e-12)

    def test_kernel(self):
        f = ensembles.sample_rwm(2, 16, rng=rng())
        k = f.kernel()
        assert k.value(np.zeros(2), np.zeros(2)) == pytest.approx(1.0)

    def test_scaled(self):
        f = ensembles.sample_rwm(2, 16, rng=rng())
        g = f.scaled(-2.0)
        assert g.values([0.1, 0.2])[0] == pytest.approx(-2.0 * f.values([0.1, 0.2])[0])


class TestTorus(object):
    def test_annulus(self):
        lattice = ensembles.torus_annulus(50.0)
        assert len(lattice) == 20
        norms = 2 * math.pi * np.linalg.norm(lattice, axis=1)
        assert np.all((norms >= 50.0) & (norms <= 51.0))

    def test_half_orbit(self):
        lattice = ensembles.torus_annulus(50.0)
        reps = ensembles.half_orbit(lattice)
        assert len(reps) == 10

    def test_empty(self):
        with pytest.raises(EmptyAnnulusError) as exc:
            ensembles.sample_torus(1.0, rng())
        assert exc.value.nearest == pytest.approx(2 * math.pi - 1)

    def test_adjust(self):
        assert ensembles.adjust_lambda(50.0) == 50.0
        assert ensembles.adjust_lambda(1.0) == pytest.approx(2 * math.pi - 1)

    def test_bad_lambda(self):
        with pytest.raises(EnsembleError):
            ensembles.torus_annulus(-1.0)

    def test_sample(self):
        f = ensembles.sample_torus(50.0, rng())
        assert f.dim == 20
        assert len(f.a) == 10
        assert f.to_dict()["dim"] == 20

    def test_periodic(self):
        f = ensembles.sample_torus(50.0, rng(1))
        x = np.array([0.13, 0.77])
        assert f.values(x + [1.0, 0.0])[0] == pytest.approx(f.values(x)[0], abs=1e-9)
        assert f.values(x + [0.0, -1.0])[0] == pytest.approx(f.values(x)[0], abs=1e-9)

    def test_eigenfunction(self):
        # The window [6, 7] holds only the four frequencies of norm 2 pi
        f = ensembles.sample_torus(6.0, rng(2))
        assert f.dim == 4
        pts = rng(3).uniform(0, 1, size=(5, 2))
        assert np.allclose(f.laplacian(pts), -4 * math.pi ** 2 * f.values(pts), atol=1e-9)
        assert np.allclose(f.mode_eigenvalues(), 4 * math.pi ** 2)

    def test_kernel(self):
        assert ensembles.torus_kernel(50.0, np.zeros(2)) == pytest.approx(1.0)
        d = np.array([0.5, 0.0])
        lattice = ensembles.torus_annulus(50.0)
        expected = np.mean(np.cos(math.pi * lattice[:, 0]))
        assert ensembles.torus_kernel(50.0, d) == pytest.approx(expected)

    def test_field_kernel_consistent(self):
        f = ensembles.sample_torus(50.0, rng())
        d = np.array([0.1, 0.2])
        assert f.kernel().value(d, np.zeros(2)) == pytest.approx(ensembles.torus_kernel(50.0, d))


class TestSphere(object):
    def basis_values(self, ell, points):
        rows = []
        for i in range(2 * ell + 1):
            coeffs = np.zeros(2 * ell + 1)
            coeffs[i] = 1.0
            rows.append(SphereWave(ell, coeffs).values(points))
        return np.array(rows)

    def test_north_pole(self):
        coeffs = np.zeros(7)
        coeffs[0] = 1.0
        assert SphereWave(3, coeffs).values([[0.0, 0.0, 1.0]])[0] == pytest.approx(1.0)

    def test_addition_theorem(self):
        ell = 5
        pts = ensembles._random_sphere_points(rng(7), 6)
        B = self.basis_values(ell, pts)
        gram = B.T.dot(B)
        expected = special.eval_legendre(ell, np.clip(pts.dot(pts.T), -1, 1))
        assert np.allclose(gram, expected, atol=1e-10)

    def test_kernel(self):
        k = SphereKernel(4)
        x = np.array([0.0, 0.0, 1.0])
        assert k.value(x, x) == pytest.approx(1.0)
        assert k.value(x, -x) == pytest.approx(1.0)
        assert ensembles.sphere_kernel(3, math.pi) == pytest.approx(-1.0)

    def test_laplacian(self):
        f = ensembles.sample_sphere(6, rng(1), random_frame=False)
        pts = np.array([[0.6, 0.0, 0.8], [0.0, 0.6, -0.8], [0.36, 0.48, 0.8]])
        vals, grads, hess = f.jet(pts)
        assert np.allclose(np.trace(hess, axis1=1, axis2=2), -42.0 * vals, atol=1e-8)
        assert np.allclose(np.sum(grads * pts, axis=1), 0.0, atol=1e-10)

    def test_pole_chart_error(self):
        f = ensembles.sample_sphere(3, rng(), random_frame=False)
        with pytest.raises(ChartError):
            f.jet([[0.0, 0.0, 1.0]])

    def test_bad_degree(self):
        with pytest.raises(EnsembleError):
            ensembles.sample_sphere(0, rng())
        with pytest.raises(EnsembleError):
            SphereWave(2, np.zeros(3))

    def test_chart_origin(self):
        chart = SphereChart([0.0, 0.0, 2.0], 10.0)
        E, dE, _ = chart.jets(np.zeros((1, 2)))
        assert np.allclose(E[0], [0.0, 0.0, 1.0])
        assert np.allclose(dE[0], chart.frame / 10.0)

    def test_chart_derivatives(self):
        chart = SphereChart([0.0, 0.6, 0.8], 3.0)
        u = np.array([[0.7, -0.4]])
        E, dE, d2E = chart.jets(u)
        assert np.linalg.norm(E[0]) == pytest.approx(1.0)
        h = 1e-6
        for i in range(2):
            e = np.zeros((1, 2))
            e[0, i] = h
            Ep, dEp, _ = chart.jets(u + e)
            Em, dEm, _ = chart.jets(u - e)
            assert np.allclose(dE[0, i], (Ep[0] - Em[0]) / (2 * h), atol=1e-7)
            assert np.allclose(d2E[0, i], (dEp[0] - dEm[0]) / (2 * h), atol=1e-6)

    def test_cut_locus(self):
        chart = SphereChart([1.0, 0.0, 0.0], 1.0)
        with pytest.raises(ChartError):
            chart.jets([[4.0, 0.0]])


class TestRescaled(object):
    def test_flat(self):
        f = ensembles.sample_torus(50.0, rng())
        center = np.array([0.2, 0.3])
        g = ensembles.rescale_at(f, center, 50.0)
        u = np.array([[1.0, -2.0]])
        assert g.values(u)[0] == pytest.approx(f.values(center + u[0] / 50.0)[0])
        _, grads, hess = g.jet(u)
        _, bg, bh = f.jet(center + u / 50.0)
        assert np.allclose(grads, bg / 50.0)
        assert np.allclose(hess, bh / 2500.0)

    def test_flat_grid(self):
        f = ensembles.sample_torus(50.0, rng())
        g = RescaledField(f, [0.5, 0.5], 50.0)
        axes = [np.linspace(-1, 1, 3), np.linspace(-1, 1, 4)]
        assert np.allclose(g.grid_values(axes), ensembles.generic_grid_values(g, axes), atol=1e-12)

    def test_sphere_jet(self):
        f = ensembles.sample_sphere(20, rng(3))
        lam = math.sqrt(20 * 21)
        g = RescaledField(f, [0.0, 0.6, 0.8], lam)
        assert g.n == 2
        u = np.array([0.5, 1.0])
        val, grad, hess = ensembles.eval_jet(g, u)
        h = 1e-5
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            fd = (g.values(u + e)[0] - g.values(u - e)[0]) / (2 * h)
            assert grad[i] == pytest.approx(fd, abs=1e-6)
            _, gp, _ = ensembles.eval_jet(g, u + e)
            _, gm, _ = ensembles.eval_jet(g, u - e)
            assert np.allclose(hess[i], (gp - gm) / (2 * h), atol=1e-5)
        assert val == pytest.approx(g.values(u)[0])

    def test_bad_scale(self):
        with pytest.raises(EnsembleError):
            RescaledField(ensembles.sample_rwm(2, 4, rng=rng()), [0.0, 0.0], 0.0)


class TestDiagnostics(object):
    def test_plane_convergence(self):
        sup = ensembles.covariance_convergence_sup("plane", None, R=5.0, max_order=1,
                                                   resolution=5, M=256)
        assert sup < 1e-8

    def test_torus_convergence_finite(self):
        sup = ensembles.covariance_convergence_sup("torus", 100.0, R=2.0, resolution=4)
        assert 0.0 < sup < 2.0

    def test_bad_order(self):
        with pytest.raises(EnsembleError):
            ensembles.covariance_convergence_sup("plane", None, max_order=3)

    def test_sphere_src_antipodal(self):
        value, where = ensembles.src_sup("sphere", 25, 0.5, pair_budget=50, rng=rng(), witness=True)
        assert value >= 1.0 - 1e-9
        assert where["y"][2] == pytest.approx(-1.0)

    def test_torus_src(self):
        value = ensembles.src_sup("torus", 100.0, 0.5, pair_budget=200, rng=rng())
        assert 0.0 <= value <= 1.0 + 1e-12

    def test_src_eps(self):
        with pytest.raises(EnsembleError):
            ensembles.src_sup("torus", 100.0, 1.5)
        with pytest.raises(EnsembleError):
            ensembles.src_sup("disk", 100.0, 0.5)
