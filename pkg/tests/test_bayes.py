import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oamfidelity.bayes import (
    CombinedLikelihood,
    IdealLikelihood,
    TrialSample,
    asymptotic_posterior,
    branch_grid,
    posterior_from_counts,
    simulate_trials,
    summarize,
)
from oamfidelity.errors import ContractError, DegenerateError, DomainError
from oamfidelity.probmodels import InterferometerConfig, NoiseModel
from oamfidelity.quadrature import PriorDensity, QuadratureGrid
from oamfidelity.signalfit import SignalModel

EXPERIMENT = SignalModel(0.911, 4.11, 0.0, 2)
THETA_STAR = 0.0698


def test_simulation_examples_and_determinism():
    ideal = IdealLikelihood(InterferometerConfig(3.0, 2))
    assert simulate_trials(0.0, 500, ideal, seed=1).zero_count == 500
    a = simulate_trials(THETA_STAR, 1000, EXPERIMENT, seed=7, replication=3)
    b = simulate_trials(THETA_STAR, 1000, EXPERIMENT, seed=7, replication=3)
    assert a == b
    c = simulate_trials(THETA_STAR, 1000, EXPERIMENT, seed=7, replication=4)
    assert c.trials == 1000 and 0 <= c.zero_count <= 1000
    assert simulate_trials(THETA_STAR, 0, EXPERIMENT, seed=1).zero_count == 0
    with pytest.raises(DomainError):
        simulate_trials(THETA_STAR, -1, EXPERIMENT, seed=1)


def test_sample_validation():
    with pytest.raises(DomainError):
        TrialSample(0.1, 10, 11)
    with pytest.raises(DomainError):
        TrialSample(0.1, 10.5, 1)
    assert TrialSample(None, 10, 4).nonzero_count == 6


def test_expected_zero_fraction():
    p = EXPERIMENT.zero_probability(THETA_STAR)
    assert 200 * p == pytest.approx(168.3, abs=0.05)
    counts = [simulate_trials(THETA_STAR, 2000, EXPERIMENT, seed=11, replication=r).zero_count
              for r in range(200)]
    assert np.mean(counts) == pytest.approx(2000 * p, abs=4 * math.sqrt(2000 * p * (1 - p) / 200))


def test_zero_trials_return_prior():
    for prior in (None, "bump"):
        grid = branch_grid(2, 1025)
        pr = PriorDensity.tabulated(grid, np.exp(-(grid.nodes - 0.3) ** 2 / 0.02)) if prior else None
        kwargs = {"prior": pr} if pr else {}
        post = posterior_from_counts(TrialSample(None, 0, 0), EXPERIMENT, grid=grid, **kwargs)
        expected = pr.on(grid) if pr else np.full(grid.size, 1 / grid.length)
        np.testing.assert_allclose(post.density, expected, rtol=1e-10)
    summary = summarize(posterior_from_counts(TrialSample(None, 0, 0), EXPERIMENT))
    assert summary.degenerate and summary.peak_count == 0


@settings(max_examples=30, deadline=None)
@given(m=st.integers(1, 3000), frac=st.floats(0, 1), full=st.booleans())
def test_posterior_normalised_and_non_negative(m, frac, full):
    sample = TrialSample(None, m, int(round(frac * m)))
    grid = QuadratureGrid.simpson(1025) if full else branch_grid(2, 1025)
    post = posterior_from_counts(sample, EXPERIMENT, grid=grid)
    assert np.all(post.density >= 0)
    assert grid.integrate(post.density) == pytest.approx(1.0, abs=1e-10)


def test_posterior_sharpens_with_trials():
    widths = []
    for m, k in [(200, 167), (500, 419), (1000, 841)]:
        s = summarize(posterior_from_counts(TrialSample(THETA_STAR, m, k), EXPERIMENT))
        widths.append(s.hpd_width)
        assert s.hpd_interval[0] <= THETA_STAR <= s.hpd_interval[1]
        assert s.hpd_mass == pytest.approx(0.95, abs=1e-6)
    assert widths[0] > widths[1] > widths[2]
    # roughly inverse square root in M for the asymptotic posterior
    w = [summarize(asymptotic_posterior(THETA_STAR, m, EXPERIMENT)).hpd_width for m in (1000, 4000)]
    assert w[0] / w[1] == pytest.approx(2.0, rel=0.15)


def test_full_domain_shows_all_copies():
    post = posterior_from_counts(TrialSample(THETA_STAR, 1000, 841), EXPERIMENT, full_domain=True)
    s = summarize(post)
    assert s.peak_count == 8
    assert s.multimodal


def test_posterior_symmetries():
    grid = QuadratureGrid.simpson(4097)
    post = posterior_from_counts(TrialSample(None, 500, 419), EXPERIMENT, grid=grid)
    np.testing.assert_allclose(post.density, post.density[::-1], atol=1e-12 * post.density.max())
    # shift by pi/l = a quarter of the grid
    q = (grid.size - 1) // 4
    np.testing.assert_allclose(post.density[:-1 - q], post.density[q:-1], atol=1e-11 * post.density.max())


def test_asymptotic_matches_counts():
    m = 1000
    k = round(m * EXPERIMENT.zero_probability(THETA_STAR))
    counted = posterior_from_counts(TrialSample(THETA_STAR, m, k), EXPERIMENT)
    asym = asymptotic_posterior(THETA_STAR, m, EXPERIMENT)
    assert counted.total_variation(asym) < 0.05
    assert summarize(asym).map_theta == pytest.approx(THETA_STAR, abs=2 * asym.grid.spacing)
    with pytest.raises(DomainError):
        asymptotic_posterior(THETA_STAR, 0, EXPERIMENT)
    with pytest.raises(DomainError):
        counted.total_variation(posterior_from_counts(TrialSample(None, 1, 1), EXPERIMENT, full_domain=True))


def test_consistency_over_replications():
    start = time.perf_counter()
    errors = []
    for r in range(100):
        sample = simulate_trials(THETA_STAR, 1000, EXPERIMENT, seed=2024, replication=r)
        errors.append(abs(summarize(posterior_from_counts(sample, EXPERIMENT)).map_theta - THETA_STAR))
    assert np.median(errors) < 0.01
    assert time.perf_counter() - start < 30


def test_other_likelihoods():
    cfg = InterferometerConfig(3.0, 1)
    ideal = posterior_from_counts(TrialSample(None, 100, 50), IdealLikelihood(cfg))
    noisy = posterior_from_counts(TrialSample(None, 100, 50),
                                  CombinedLikelihood(cfg, NoiseModel(0.9, 0.9, 0.8, 0.01)))
    assert summarize(noisy).map_theta != summarize(ideal).map_theta
    with pytest.raises(ContractError):
        CombinedLikelihood(cfg, NoiseModel(0.5, 0.9))


def test_impossible_counts_are_degenerate():
    # p_zero underflows to exactly 0 on this grid, so all-zero counts are impossible
    model = IdealLikelihood(InterferometerConfig(1e6, 1))
    grid = QuadratureGrid.simpson(5, 0.1, 0.2)
    with pytest.raises(DegenerateError):
        posterior_from_counts(TrialSample(None, 3, 3), model, grid=grid)


def test_summary_validation_and_serialisation():
    post = posterior_from_counts(TrialSample(None, 200, 167), EXPERIMENT)
    with pytest.raises(DomainError):
        summarize(post, level=1.0)
    d = summarize(post, level=0.5).to_dict()
    assert d["level"] == 0.5 and d["hpd_low"] < d["map_theta"] < d["hpd_high"]
