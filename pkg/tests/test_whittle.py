import numpy as np
import pytest

from corrspec import whittle


BACKENDS = whittle.available_backends()
BACKEND_IDS = [m.BACKEND_NAME for m in BACKENDS]


def finite_diff_grad(fn, beta, h=1e-5):
    grad = np.empty_like(beta)
    for i in range(beta.size):
        up = beta.copy()
        dn = beta.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (fn(up) - fn(dn)) / (2 * h)
    return grad


class TestPeriodogram:
    def test_frequencies_and_length(self):
        n = 64
        freqs = whittle.fourier_frequencies(n)
        assert freqs[0] == pytest.approx(1.0 / n)
        assert freqs[-1] <= 0.5
        assert freqs.size == (n - 1) // 2

    def test_mean_invariance(self, rng):
        x = rng.normal(size=128)
        p1 = whittle.periodogram(x)
        p2 = whittle.periodogram(x + 100.0)
        np.testing.assert_allclose(p1, p2, atol=1e-6 * p1.max())

    def test_parseval_total_power(self, rng):
        # ordinates tile the variance: sum of the full two-sided periodogram
        # equals n * population variance; interior ordinates count twice
        x = rng.normal(size=101)
        perio = whittle.periodogram(x)
        n = x.size
        total = 2.0 * perio.sum() / n
        np.testing.assert_allclose(total, x.var(), rtol=1e-10)

    def test_white_noise_mean_level(self, rng):
        # E[I(nu)] = sigma^2 for white noise
        sims = [whittle.periodogram(rng.normal(0, 2.0, size=256)).mean()
                for _ in range(200)]
        assert abs(np.mean(sims) - 4.0) < 0.15

    def test_short_series_rejected(self):
        with pytest.raises(ValueError):
            whittle.periodogram(np.zeros(5))


class TestDesign:
    def test_design_shape_and_intercept(self):
        freqs = whittle.fourier_frequencies(128)
        design = whittle.cosine_design(freqs, n_basis=6)
        assert design.shape == (freqs.size, 7)
        np.testing.assert_array_equal(design[:, 0], 1.0)

    def test_cosine_columns(self):
        freqs = whittle.fourier_frequencies(64)
        design = whittle.cosine_design(freqs, n_basis=3)
        np.testing.assert_allclose(
            design[:, 2], np.sqrt(2.0) * np.cos(2 * np.pi * 2 * freqs),
            rtol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS, ids=BACKEND_IDS)
class TestDerivatives:
    def test_gradient_matches_fd(self, rng, backend):
        for _ in range(10):
            n = int(rng.integers(64, 257))
            x = rng.normal(size=n)
            perio = whittle.periodogram(x)
            design = whittle.cosine_design(whittle.fourier_frequencies(n), 5)
            beta = rng.normal(0, 0.5, size=6)
            val, grad, hess = whittle.grad_hess(perio, design, beta,
                                                backend=backend)
            fd = finite_diff_grad(
                lambda b: whittle.loglik(perio, design, b, backend=backend),
                beta, h=1e-4)
            np.testing.assert_allclose(grad, fd, rtol=2e-5, atol=1e-7)

    def test_hessian_matches_fd_of_grad(self, rng, backend):
        n = 128
        x = rng.normal(size=n)
        perio = whittle.periodogram(x)
        design = whittle.cosine_design(whittle.fourier_frequencies(n), 4)
        beta = rng.normal(0, 0.5, size=5)
        _, _, hess = whittle.grad_hess(perio, design, beta, backend=backend)
        h = 1e-5
        for i in range(beta.size):
            up = beta.copy()
            dn = beta.copy()
            up[i] += h
            dn[i] -= h
            _, gu, _ = whittle.grad_hess(perio, design, up, backend=backend)
            _, gd, _ = whittle.grad_hess(perio, design, dn, backend=backend)
            fd_row = (gu - gd) / (2 * h)
            np.testing.assert_allclose(-hess[i], fd_row, rtol=1e-4, atol=1e-6)

    def test_prior_contribution(self, rng, backend):
        n = 128
        x = rng.normal(size=n)
        perio = whittle.periodogram(x)
        design = whittle.cosine_design(whittle.fourier_frequencies(n), 4)
        beta = rng.normal(size=5)
        prec = np.array([0.01, 2.0, 2.0, 2.0, 2.0])
        v0, g0, h0 = whittle.grad_hess(perio, design, beta, backend=backend)
        v1, g1, h1 = whittle.grad_hess(perio, design, beta, prior_prec=prec,
                                       backend=backend)
        np.testing.assert_allclose(g1, g0 - prec * beta, rtol=1e-12)
        np.testing.assert_allclose(h1, h0 + np.diag(prec), rtol=1e-12)


class TestBackendAgreement:
    @pytest.mark.skipif(len(BACKENDS) < 2, reason="single backend build")
    def test_values_agree(self, rng):
        n = 256
        x = rng.normal(size=n)
        perio = whittle.periodogram(x)
        design = whittle.cosine_design(whittle.fourier_frequencies(n), 8)
        beta = rng.normal(size=9)
        results = [whittle.grad_hess(perio, design, beta, backend=b)
                   for b in BACKENDS]
        for other in results[1:]:
            np.testing.assert_allclose(other[0], results[0][0], rtol=1e-12)
            np.testing.assert_allclose(other[1], results[0][1], rtol=1e-10,
                                       atol=1e-12)
            np.testing.assert_allclose(other[2], results[0][2], rtol=1e-10,
                                       atol=1e-12)


class TestModeFinding:
    def test_white_noise_level(self, rng):
        # flat spectrum: intercept estimates log(variance), others near zero
        sigma2 = 2.5
        x = rng.normal(0, np.sqrt(sigma2), size=4096)
        perio = whittle.periodogram(x)
        design = whittle.cosine_design(whittle.fourier_frequencies(x.size), 8)
        prec = np.full(9, 1.0)
        prec[0] = 0.01
        beta, _, _ = whittle.posterior_mode(perio, design, prec)
        assert abs(beta[0] - np.log(sigma2)) < 0.15
        assert np.max(np.abs(beta[1:])) < 0.2

    def test_gradient_small_at_mode(self, rng):
        x = rng.normal(size=512)
        perio = whittle.periodogram(x)
        design = whittle.cosine_design(whittle.fourier_frequencies(x.size), 6)
        prec = np.full(7, 0.5)
        beta, _, _ = whittle.posterior_mode(perio, design, prec, tol=1e-10)
        _, grad, _ = whittle.grad_hess(perio, design, beta, prior_prec=prec)
        assert np.linalg.norm(grad) < 1e-8

    def test_deterministic(self, rng):
        x = rng.normal(size=256)
        perio = whittle.periodogram(x)
        design = whittle.cosine_design(whittle.fourier_frequencies(x.size), 5)
        prec = np.full(6, 1.0)
        b1, h1, _ = whittle.posterior_mode(perio, design, prec)
        b2, h2, _ = whittle.posterior_mode(perio, design, prec)
        np.testing.assert_array_equal(b1, b2)
        np.testing.assert_array_equal(h1, h2)

    def test_zero_periodogram_rejected(self):
        design = whittle.cosine_design(whittle.fourier_frequencies(64), 3)
        with pytest.raises(whittle.ModeFindingError):
            whittle.posterior_mode(np.zeros((64 - 1) // 2), design,
                                   np.full(4, 1.0))


class TestBackendSelection:
    def test_env_override(self, monkeypatch):
        import importlib
        monkeypatch.setenv("CORRSPEC_BACKEND", "python")
        mod = importlib.reload(whittle)
        try:
            assert mod.BACKEND == "python"
        finally:
            monkeypatch.delenv("CORRSPEC_BACKEND")
            importlib.reload(whittle)
