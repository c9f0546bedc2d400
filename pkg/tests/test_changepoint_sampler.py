import numpy as np
import pytest

from corrspec import changepoint as cp


SMALL = dict(iterations=900, burnin=400, t_min=30, max_segments=5, n_basis=4)


def ar1_switch(rng, n=360, split=180, phi=(0.8, -0.8), sigma=1.0):
    x = np.empty(n)
    prev = 0.0
    for t in range(n):
        p = phi[0] if t < split else phi[1]
        prev = p * prev + rng.normal(0, sigma)
        x[t] = prev
    return x


class TestDeterminism:
    def test_same_seed_same_chain(self, rng):
        x = rng.normal(size=300)
        config = cp.RJMCMCConfig(seed=42, **SMALL)
        r1 = cp.run_rjmcmc(x, config)
        r2 = cp.run_rjmcmc(x, config)
        np.testing.assert_array_equal(r1.trace_m, r2.trace_m)
        np.testing.assert_array_equal(r1.trace_logpost, r2.trace_logpost)
        assert r1.accepts == r2.accepts
        for a, b in zip(r1.samples, r2.samples):
            np.testing.assert_array_equal(a.xi, b.xi)
            np.testing.assert_array_equal(a.tau2, b.tau2)

    def test_different_seed_differs(self, rng):
        x = rng.normal(size=300)
        r1 = cp.run_rjmcmc(x, cp.RJMCMCConfig(seed=1, **SMALL))
        r2 = cp.run_rjmcmc(x, cp.RJMCMCConfig(seed=2, **SMALL))
        assert not np.array_equal(r1.trace_logpost, r2.trace_logpost)

    def test_location_shift_leaves_posterior_unchanged(self, rng):
        # segment periodograms remove the segment mean, so a constant shift
        # only perturbs the arithmetic at rounding level
        x = rng.normal(size=300)
        config = cp.RJMCMCConfig(seed=3, **SMALL)
        r1 = cp.run_rjmcmc(x, config)
        r2 = cp.run_rjmcmc(x + 7.5, config)
        np.testing.assert_allclose(r1.trace_logpost, r2.trace_logpost,
                                   rtol=1e-9)
        assert r1.posterior().map_m == r2.posterior().map_m


class TestBehavior:
    def test_white_noise_prefers_one_segment(self, rng):
        x = rng.normal(size=360)
        result = cp.run_rjmcmc(x, cp.RJMCMCConfig(seed=11, **SMALL))
        assert result.posterior().map_m == 1

    def test_planted_switch_recovered(self, rng):
        x = ar1_switch(rng, n=360, split=180)
        result = cp.run_rjmcmc(x, cp.RJMCMCConfig(seed=12, **SMALL))
        posterior = result.posterior()
        assert posterior.map_m == 2
        assert abs(posterior.distributions[0].mode() - 180) <= 25

    def test_every_sample_is_admissible(self, rng):
        x = ar1_switch(rng, n=360, split=150)
        config = cp.RJMCMCConfig(seed=13, **SMALL)
        result = cp.run_rjmcmc(x, config)
        for s in result.samples:
            assert s.xi[0] == 0 and s.xi[-1] == 360
            assert np.all(np.diff(s.xi) >= config.t_min)
            assert 1 <= s.m <= config.max_segments
            assert len(s.beta) == s.m
            assert s.tau2.shape == (s.m,)
            assert np.all(s.tau2 > 0)

    def test_moves_are_exercised(self, rng):
        x = ar1_switch(rng, n=360, split=180)
        result = cp.run_rjmcmc(x, cp.RJMCMCConfig(seed=14, **SMALL))
        assert result.proposals["birth"] > 0
        assert result.proposals["death"] > 0
        assert result.proposals["within"] > 0
        assert result.accepts["birth"] > 0
        for move in ("birth", "death", "within", "refresh"):
            assert result.accepts[move] <= result.proposals[move]

    def test_trace_lengths(self, rng):
        x = rng.normal(size=300)
        result = cp.run_rjmcmc(x, cp.RJMCMCConfig(seed=15, **SMALL))
        assert result.trace_m.size == SMALL["iterations"]
        assert len(result.samples) == SMALL["iterations"] - SMALL["burnin"]
        assert result.n == 300


class TestPosteriorExtraction:
    def make_sample(self, xi):
        xi = np.asarray(xi)
        m = xi.size - 1
        return cp.SegmentModel(xi=xi, beta=tuple(np.zeros(3) for _ in range(m)),
                               tau2=np.ones(m))

    def test_map_tie_prefers_fewer_segments(self):
        samples = [self.make_sample([0, 100]), self.make_sample([0, 100]),
                   self.make_sample([0, 50, 100]), self.make_sample([0, 60, 100])]
        posterior = cp.extract_posterior(samples)
        assert posterior.map_m == 1
        assert posterior.distributions == ()
        assert posterior.m_counts == {1: 2, 2: 2}

    def test_distributions_are_location_histograms(self):
        samples = [self.make_sample([0, 50, 100]),
                   self.make_sample([0, 50, 100]),
                   self.make_sample([0, 60, 100]),
                   self.make_sample([0, 100])]
        posterior = cp.extract_posterior(samples)
        assert posterior.map_m == 2
        (dist,) = posterior.distributions
        assert dist.support.tolist() == [50, 60]
        np.testing.assert_allclose(dist.probs, [2 / 3, 1 / 3])
        assert dist.mode() == 50

    def test_empty_samples_rejected(self):
        with pytest.raises(cp.ChangepointError):
            cp.extract_posterior([])


class TestChainIO:
    def test_save_load_roundtrip(self, tmp_path, rng):
        x = rng.normal(size=300)
        result = cp.run_rjmcmc(x, cp.RJMCMCConfig(seed=21, **SMALL))
        path = tmp_path / "chain.json.gz"
        cp.save_chain(result, path)
        samples, meta = cp.load_chain(path)
        assert meta["n"] == 300
        assert meta["config"]["seed"] == 21
        assert len(samples) == len(result.samples)
        for a, b in zip(samples, result.samples):
            np.testing.assert_array_equal(a.xi, b.xi)
            np.testing.assert_allclose(a.tau2, b.tau2, rtol=0, atol=0)
            for ba, bb in zip(a.beta, b.beta):
                np.testing.assert_allclose(ba, bb, rtol=0, atol=0)

    def test_bytes_deterministic(self, tmp_path, rng):
        x = rng.normal(size=300)
        result = cp.run_rjmcmc(x, cp.RJMCMCConfig(seed=22, **SMALL))
        cp.save_chain(result, tmp_path / "a.gz")
        cp.save_chain(result, tmp_path / "b.gz")
        assert (tmp_path / "a.gz").read_bytes() == (tmp_path / "b.gz").read_bytes()

    def test_posterior_roundtrip_consistency(self, tmp_path, rng):
        x = ar1_switch(rng, n=360, split=180)
        result = cp.run_rjmcmc(x, cp.RJMCMCConfig(seed=23, **SMALL))
        cp.save_chain(result, tmp_path / "chain.gz")
        samples, _ = cp.load_chain(tmp_path / "chain.gz")
        direct = result.posterior()
        rebuilt = cp.extract_posterior(samples)
        assert direct.map_m == rebuilt.map_m
        for d, r in zip(direct.distributions, rebuilt.distributions):
            np.testing.assert_array_equal(d.support, r.support)
            np.testing.assert_allclose(d.probs, r.probs, rtol=1e-15)
