import numpy as np
import pytest

from corrspec import changepoint as cp
from corrspec.spectra import (SpectraError, TVSpectrum, spectral_distance,
                              spectral_distance_matrix, tv_spectrum)


CFG = dict(iterations=700, burnin=300, t_min=30, max_segments=4, n_basis=4)


def run_chain(x, seed=5):
    result = cp.run_rjmcmc(x, cp.RJMCMCConfig(seed=seed, **CFG))
    return result.posterior(), result.samples


def ar1(rng, n, phi, sigma=1.0):
    x = np.empty(n)
    prev = 0.0
    for t in range(n):
        prev = phi * prev + rng.normal(0, sigma)
        x[t] = prev
    return x


def make_surface(times, freqs, values) -> TVSpectrum:
    return TVSpectrum(times=np.asarray(times), freqs=np.asarray(freqs),
                      surface=np.asarray(values, dtype=float))


class TestSurfaceConstruction:
    def test_white_noise_is_flat(self, rng):
        x = rng.normal(0, 1.5, size=360)
        posterior, samples = run_chain(x)
        surf = tv_spectrum(x, posterior, samples, n_freq=48)
        assert surf.surface.shape == (360, 48)
        assert surf.freqs[0] == 0.0
        assert surf.freqs[-1] == 0.5
        # flat spectrum at log variance, modest wiggle allowed
        spread = surf.surface.max() - surf.surface.min()
        assert spread < 1.5
        level = np.log(1.5 ** 2)
        assert abs(surf.surface.mean() - level) < 0.5

    def test_ar1_spectrum_decreases(self, rng):
        # positive phi concentrates power at low frequencies
        x = ar1(rng, 400, phi=0.85)
        posterior, samples = run_chain(x, seed=6)
        surf = tv_spectrum(x, posterior, samples, n_freq=48)
        row = surf.surface[0]
        assert row[0] > row[-1] + 2.0
        assert np.mean(np.diff(row) <= 1e-9) > 0.8

    def test_piecewise_structure(self, rng):
        # distinct AR signs give opposite spectral slopes per segment
        n = 400
        x = np.concatenate([ar1(rng, n // 2, 0.8), ar1(rng, n // 2, -0.8)])
        posterior, samples = run_chain(x, seed=7)
        if posterior.map_m != 2:
            pytest.skip("sampler picked a different segmentation at this size")
        surf = tv_spectrum(x, posterior, samples, n_freq=48)
        early = surf.surface[10]
        late = surf.surface[-10]
        assert early[0] > early[-1]
        assert late[-1] > late[0]
        split = posterior.distributions[0].mode()
        np.testing.assert_array_equal(surf.surface[0], surf.surface[split - 1])
        assert not np.array_equal(surf.surface[split - 1], surf.surface[split])

    def test_frequency_grid_size_validated(self, rng):
        x = rng.normal(size=360)
        posterior, samples = run_chain(x, seed=8)
        with pytest.raises(SpectraError):
            tv_spectrum(x, posterior, samples, n_freq=1)


class TestDistances:
    def test_identical_zero(self):
        s = make_surface([0, 1], np.linspace(0, 0.5, 8), np.ones((2, 8)))
        assert spectral_distance(s, s) == 0.0

    def test_hand_value(self):
        freqs = np.linspace(0, 0.5, 4)
        a = make_surface([0, 1], freqs, np.zeros((2, 4)))
        b = make_surface([0, 1], freqs, np.full((2, 4), 2.0))
        assert spectral_distance(a, b) == 2.0

    def test_mean_absolute_semantics(self):
        freqs = np.linspace(0, 0.5, 2)
        a = make_surface([0, 1], freqs, [[0.0, 0.0], [0.0, 0.0]])
        b = make_surface([0, 1], freqs, [[1.0, 3.0], [0.0, 0.0]])
        assert spectral_distance(a, b) == 1.0

    def test_grid_mismatch_rejected(self):
        a = make_surface([0, 1], np.linspace(0, 0.5, 4), np.zeros((2, 4)))
        b = make_surface([0, 2], np.linspace(0, 0.5, 4), np.zeros((2, 4)))
        with pytest.raises(SpectraError):
            spectral_distance(a, b)

    def test_pseudometric_on_random_surfaces(self, rng):
        freqs = np.linspace(0, 0.5, 16)
        times = np.arange(30)
        surfs = [make_surface(times, freqs, rng.normal(size=(30, 16)))
                 for _ in range(3)]
        dab = spectral_distance(surfs[0], surfs[1])
        dba = spectral_distance(surfs[1], surfs[0])
        dac = spectral_distance(surfs[0], surfs[2])
        dcb = spectral_distance(surfs[2], surfs[1])
        assert dab == dba
        assert dab >= 0.0
        assert dab <= dac + dcb + 1e-10

    def test_matrix_from_mapping_sorts_labels(self, rng):
        freqs = np.linspace(0, 0.5, 8)
        surfs = {"zeta": make_surface([0], freqs, rng.normal(size=(1, 8))),
                 "alpha": make_surface([0], freqs, rng.normal(size=(1, 8)))}
        mat = spectral_distance_matrix(surfs)
        assert mat.labels == ("alpha", "zeta")
        np.testing.assert_allclose(
            mat.values[0, 1], spectral_distance(surfs["alpha"], surfs["zeta"]))

    def test_matrix_from_sequence(self, rng):
        freqs = np.linspace(0, 0.5, 8)
        surfs = [make_surface([0], freqs, rng.normal(size=(1, 8)))
                 for _ in range(3)]
        mat = spectral_distance_matrix(surfs)
        assert mat.labels == ("0", "1", "2")
