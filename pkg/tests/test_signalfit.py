import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oamfidelity.errors import ContractError, DomainError, RankError
from oamfidelity.signalfit import (
    DataPoint,
    SignalModel,
    datapoints_from_counts,
    fit_signal,
    fwhm,
    poisson_error_bar,
    resolution_factor,
    synthesize_counts,
    visibility,
)

REFERENCE = SignalModel(0.911, 4.11, 0.0, 2)


def noiseless(model, n=41, span=None):
    span = span if span is not None else math.pi / model.quantum_number
    thetas = np.linspace(0.0, span, n)
    return [DataPoint(float(t), float(model.zero_probability(t))) for t in thetas]


def test_error_bar_examples():
    assert poisson_error_bar(0, 100) == 0.0
    assert poisson_error_bar(50, 100) == pytest.approx(0.05, abs=1e-15)
    assert poisson_error_bar(841, 1000) == pytest.approx(math.sqrt(0.841 * 0.159 / 1000), rel=1e-14)
    assert poisson_error_bar(1822, 2000) == pytest.approx(0.00637, abs=5e-6)
    with pytest.raises(DomainError):
        poisson_error_bar(3, 0)
    with pytest.raises(DomainError):
        poisson_error_bar(5, 4)


def test_model_validation_and_background_form():
    with pytest.raises(DomainError):
        SignalModel(0.0, 1.0)
    with pytest.raises(DomainError):
        SignalModel(1.2, 1.0)
    with pytest.raises(DomainError):
        SignalModel(0.5, 0.0)
    m = SignalModel.from_background(0.25, 3.0, 0.1, 2)
    assert m.amplitude == pytest.approx(math.exp(-0.25))
    assert m.background == pytest.approx(0.25)
    p0, p1 = m.probabilities(np.linspace(0, 1, 7))
    np.testing.assert_allclose(p0 + p1, 1.0, atol=1e-15)
    np.testing.assert_allclose(p0, m.zero_probability(np.linspace(0, 1, 7)), rtol=1e-14)


def test_visibility_examples():
    assert visibility(REFERENCE) == pytest.approx(math.tanh(2.055), rel=1e-15)
    assert visibility(REFERENCE) == pytest.approx(0.967, abs=2e-3)
    assert visibility(SignalModel(1.0, math.log(3.0))) == pytest.approx(0.5, abs=1e-15)
    values = [visibility(SignalModel(0.9, n)) for n in np.linspace(0.1, 20, 50)]
    assert np.all(np.diff(values) > 0)
    # contrast straight from the fringe extremes
    hi, lo = REFERENCE.zero_probability(0.0), REFERENCE.zero_probability(math.pi / 4)
    assert visibility(REFERENCE) == pytest.approx((hi - lo) / (hi + lo), rel=1e-14)


def _bisect_half_width(model):
    # distance from the peak to the half-maximum crossing, found on the fringe itself
    target = 0.5 * model.amplitude
    a, b = 0.0, math.pi / (2 * model.quantum_number)
    for _ in range(200):
        mid = 0.5 * (a + b)
        if model.zero_probability(mid) > target:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


def test_fwhm_examples():
    assert fwhm(REFERENCE) == pytest.approx(0.4231, abs=1e-4)
    assert fwhm(SignalModel(0.911, 4.11, 0.0, 4)) == pytest.approx(0.5 * fwhm(REFERENCE), rel=1e-14)
    for n, ell in [(1.0, 1), (4.11, 2), (30.0, 3)]:
        model = SignalModel(0.8, n, 0.0, ell)
        assert fwhm(model) == pytest.approx(2 * _bisect_half_width(model), abs=1e-12)
    with pytest.raises(DomainError):
        fwhm(SignalModel(0.9, math.log(2.0)))
    with pytest.raises(DomainError):
        fwhm(SignalModel(0.9, 0.3))


def test_resolution_factor_examples():
    assert resolution_factor(REFERENCE) == pytest.approx(1.856, abs=1e-3)
    # FWHM equal to the classical width pi/(2l): sin^2(pi/4) = ln2 / N_e
    assert resolution_factor(SignalModel(1.0, 2 * math.log(2.0), 0.0, 3)) == pytest.approx(1.0, rel=1e-12)
    # ln2/N_e = sin^2(pi/8) halves the width
    n_e = math.log(2.0) / math.sin(math.pi / 8) ** 2
    assert resolution_factor(SignalModel(1.0, n_e, 0.0, 2)) == pytest.approx(2.0, rel=1e-12)


def test_canonical_offset():
    m = SignalModel(0.9, 3.0, -0.2, 2)
    c = m.canonical()
    assert 0.0 <= c.offset < math.pi / 2
    thetas = np.linspace(-2, 2, 17)
    np.testing.assert_allclose(c.zero_probability(thetas), m.zero_probability(thetas), atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(
    amp=st.floats(0.3, 1.0),
    n_e=st.floats(1.0, 10.0),
    frac=st.floats(0.0, 0.999),
    ell=st.integers(1, 4),
)
def test_noiseless_round_trip(amp, n_e, frac, ell):
    truth = SignalModel(amp, n_e, frac * math.pi / ell, ell)
    report = fit_signal(noiseless(truth), ell)
    got = report.model
    assert got.amplitude == pytest.approx(amp, abs=1e-8)
    assert got.effective_photons == pytest.approx(n_e, abs=1e-8)
    period = math.pi / ell
    gap = abs(got.offset - truth.offset) % period
    assert min(gap, period - gap) < 1e-8
    assert report.residual_norm < 1e-8


def test_parametrizations_agree():
    data = datapoints_from_counts(np.linspace(0, math.pi / 2, 31),
                                  synthesize_counts(REFERENCE, np.linspace(0, math.pi / 2, 31), seed=4),
                                  40000)
    a = fit_signal(data, 2, parametrization="amplitude")
    b = fit_signal(data, 2, parametrization="background")
    assert a.model.amplitude == pytest.approx(b.model.amplitude, abs=1e-10)
    assert a.model.effective_photons == pytest.approx(b.model.effective_photons, abs=1e-10)
    assert a.model.offset == pytest.approx(b.model.offset, abs=1e-10)
    assert b.parameter_names[0] == "background"
    # delta method: var(n_b) = var(A) / A^2
    var_a = a.covariance[0, 0]
    assert b.covariance[0, 0] == pytest.approx(var_a / a.model.amplitude ** 2, rel=1e-4)


def test_uniform_sigma_scaling_leaves_estimate_unchanged():
    thetas = np.linspace(0, math.pi / 2, 25)
    counts = synthesize_counts(REFERENCE, thetas, seed=9)
    frac = counts / 40000
    one = fit_signal([DataPoint(t, y, 0.01) for t, y in zip(thetas, frac)], 2)
    ten = fit_signal([DataPoint(t, y, 0.1) for t, y in zip(thetas, frac)], 2)
    assert one.model.effective_photons == pytest.approx(ten.model.effective_photons, abs=1e-10)
    np.testing.assert_allclose(ten.covariance, 100 * one.covariance, rtol=1e-6)


def test_zero_sigma_points_get_smallest_positive_weight():
    thetas = np.linspace(0, math.pi / 2, 20)
    ys = REFERENCE.zero_probability(thetas)
    data = [DataPoint(t, y, 0.0 if i % 2 else 0.01) for i, (t, y) in enumerate(zip(thetas, ys))]
    assert fit_signal(data, 2).model.effective_photons == pytest.approx(4.11, abs=1e-8)


@pytest.mark.parametrize("seed", range(10))
def test_noisy_replications_recover_reference(seed):
    thetas = np.linspace(0, math.pi / 2, 31)
    truth = SignalModel(0.911, 4.11, 0.3, 2)
    data = datapoints_from_counts(thetas, synthesize_counts(truth, thetas, seed=seed), 40000)
    report = fit_signal(data, 2)
    assert report.model.effective_photons == pytest.approx(4.11, abs=0.10)
    assert report.model.amplitude == pytest.approx(0.911, abs=0.01)
    # parameter errors from the covariance are consistent with the truth
    sd = math.sqrt(report.covariance[1, 1])
    assert abs(report.model.effective_photons - 4.11) < 5 * sd


def test_synthesized_counts_are_deterministic():
    thetas = np.linspace(0, 1, 5)
    a = synthesize_counts(REFERENCE, thetas, seed=1)
    np.testing.assert_array_equal(a, synthesize_counts(REFERENCE, thetas, seed=1))
    assert a.dtype.kind == "i" and np.all((0 <= a) & (a <= 40000))


def test_fit_preconditions():
    with pytest.raises(ContractError):
        fit_signal(noiseless(REFERENCE, n=3), 2)
    with pytest.raises(ContractError):
        fit_signal(noiseless(REFERENCE, n=10, span=0.5), 2)
    with pytest.raises(ContractError):
        fit_signal(noiseless(REFERENCE), 2, parametrization="log")


def test_flat_data_is_rank_deficient():
    data = [DataPoint(t, 0.0) for t in np.linspace(0, math.pi / 2, 10)]
    with pytest.raises(RankError):
        fit_signal(data, 2)
    data = [DataPoint(t, 0.5) for t in np.linspace(0, math.pi / 2, 10)]
    with pytest.raises(RankError):
        fit_signal(data, 2)


def test_report_serialises():
    report = fit_signal(noiseless(REFERENCE), 2)
    d = report.to_dict()
    assert d["model"]["effective_photons"] == pytest.approx(4.11)
    assert len(d["covariance"]) == 3
    assert d["fwhm"] == pytest.approx(fwhm(REFERENCE))
