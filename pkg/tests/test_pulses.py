import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from fockscatter import pulses as P
from fockscatter.scattering import FrequencyGrid

OMEGA = FrequencyGrid().omega


def fine_integral(f, lo, hi, n=400001):
    t = np.linspace(lo, hi, n)
    return trapezoid(np.abs(f(t)) ** 2, t)


# --- top-hat -------------------------------------------------------------------

def test_tophat_two_photon_values():
    p = P.PulseParams(shape="tophat", t_p=1.0, t_b=11.0)
    assert P.tophat_two_photon_envelope(0.5, p) == pytest.approx(1 / math.sqrt(2), abs=1e-12)
    assert P.tophat_two_photon_envelope(5.0, p) == 0.0
    assert fine_integral(lambda t: P.tophat_two_photon_envelope(t, p), -1, 13) == pytest.approx(1, abs=1e-4)
    f = P.discretize_pulse(p, 1e-3, (0.0, 12.0))
    assert np.sum(f.values**2) == pytest.approx(1, abs=1e-10)


def test_tophat_single_segments():
    f1, f2 = P.tophat_single_envelopes(P.PulseParams(shape="tophat", t_p=1.0, t_b=2.0))
    assert f2(2.5) == 1.0
    assert f1(2.5) == 0.0
    # touching segments are fine, overlapping ones are not
    P.tophat_single_envelopes(P.PulseParams(shape="tophat", t_p=1.0, t_b=1.0))
    with pytest.raises(P.PulseError, match="overlapping"):
        P.tophat_single_envelopes(P.PulseParams(shape="tophat", t_p=1.0, t_b=0.5))


def test_tophat_discretization_uniform():
    f1, f2 = P.discretize_single_pulses(P.PulseParams(shape="tophat", t_p=1.0, t_b=2.0), 0.01, (0.0, 3.0))
    lo, hi = f1.support()
    assert (lo, hi) == (0, 99)
    np.testing.assert_allclose(f1.values[:100], 0.1, atol=1e-12)
    assert f2.support() == (200, 299)


# --- Gaussians -----------------------------------------------------------------

def test_gaussian_two_peak_norm():
    p = P.PulseParams(t_b=0.0, sigma_t=1.0)
    assert 2 * P.gaussian_two_peak_norm(1.0, 0.0) == pytest.approx(math.pi**-0.25, abs=1e-12)
    assert P.gaussian_two_peak_envelope(p.t_c, p) == pytest.approx(0.75113, abs=1e-5)
    assert P.gaussian_two_peak_norm(1.0, 80.0) == pytest.approx(1 / math.sqrt(2 * math.sqrt(math.pi)), rel=1e-12)
    q = P.PulseParams(t_b=8.0)
    assert fine_integral(lambda t: P.gaussian_two_peak_envelope(t, q), -10, 22) == pytest.approx(1, abs=1e-10)


def test_gaussian_single():
    assert P.gaussian_single_envelope(3.0, 3.0, 1.0) == pytest.approx(0.75113, abs=1e-5)
    peak = P.gaussian_single_envelope(0.0, 0.0, 1.3)
    for s in (-1.3, 1.3):
        assert P.gaussian_single_envelope(s, 0.0, 1.3) == pytest.approx(peak * math.exp(-0.5), rel=1e-14)
    assert fine_integral(lambda t: P.gaussian_single_envelope(t, 0.0, 1.0), -12, 12) == pytest.approx(1, abs=1e-12)


def test_spectral_amplitude_values():
    assert P.gaussian_spectral_amplitude(0.0, 1.0, 4.0) == 1 + 0j
    assert P.gaussian_spectral_amplitude(1.0, 1.0, 4.0) == pytest.approx(math.exp(-0.5) * np.exp(4j), abs=1e-15)
    a = P.gaussian_spectral_amplitude(OMEGA, 1.0, 0.0)
    b = P.gaussian_spectral_amplitude(OMEGA, 1.0, 7.3)
    np.testing.assert_allclose(np.abs(a), np.abs(b), atol=1e-15)


def test_fourier_consistency():
    sigma, center = 1.0, 0.0
    g = P.gaussian_spectral_amplitude(OMEGA, sigma, center)
    dw = OMEGA[1] - OMEGA[0]
    g = g / math.sqrt(np.sum(np.abs(g) ** 2) * dw)
    t = np.linspace(-8 * sigma, 8 * sigma, 512)
    rec = np.exp(-1j * np.outer(t, OMEGA)) @ g * dw / math.sqrt(2 * math.pi)
    ref = P.gaussian_single_envelope(t, center, sigma)
    phase = rec[256] / abs(rec[256])
    assert np.abs(rec / phase - ref).max() < 1e-6


# --- mixing and symmetrization ------------------------------------------------------

def test_mixed_spectra_cases():
    g1, g2 = P.gaussian_spectra(OMEGA, P.PulseParams(t_b=3.0))
    f1, f2 = P.mixed_spectra(0.0, g1, g2)
    np.testing.assert_array_equal(f1.values, g1.values)
    np.testing.assert_array_equal(f2.values, g2.values)
    f1, f2 = P.mixed_spectra(0.5, g1, g2)
    np.testing.assert_allclose(f1.values, 0.5 * (g1.values + g2.values), atol=0)
    one = P.SpectralAmplitude(np.array([-1.0, 0.0, 1.0]), np.array([0, 1, 0]))
    zero = P.SpectralAmplitude(np.array([-1.0, 0.0, 1.0]), np.zeros(3))
    f1, f2 = P.mixed_spectra(0.25, one, zero)
    assert f1.values[1] == 0.75 and f2.values[1] == 0.25
    with pytest.raises(P.PulseError):
        P.mixed_spectra(0.6, g1, g2)


def test_normalization_constant():
    w = np.linspace(-2, 2, 5)
    a = P.SpectralAmplitude(w, [0, 1, 0, 0, 0])
    b = P.SpectralAmplitude(w, [0, 0, 0, 1, 0])
    assert P.symmetrized_two_photon_spectrum(a, b).K == pytest.approx(1 / math.sqrt(2))
    assert P.symmetrized_two_photon_spectrum(a, a).K == pytest.approx(0.5)


def test_tb0_states_coincide():
    p = P.PulseParams(t_b=0.0)
    a = P.input_spectrum(OMEGA, p, 0.0)
    b = P.input_spectrum(OMEGA, p, 0.5)
    assert np.abs(a.values - b.values).max() <= 1e-12


# --- discretization ------------------------------------------------------------

def test_gaussian_window_rescale():
    f = P.discretize_envelope(lambda t: P.gaussian_single_envelope(t, 0.0, 1.0), 0.01, (-6.0, 6.0))
    assert abs(f.rescale - 1) < 1e-6
    assert np.sum(f.values**2) == pytest.approx(1.0, abs=1e-14)


def test_window_too_short():
    with pytest.raises(P.PulseError, match="required window"):
        P.discretize_pulse(P.PulseParams(t_b=8.0), 0.01, (0.0, 10.0))


def test_bad_params():
    for kw in ({"shape": "square"}, {"sigma_t": 0.0}, {"t_b": -1.0}, {"alpha": 0.7}):
        with pytest.raises(P.PulseError):
            P.PulseParams(**kw)


# --- properties ----------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(sigma=st.floats(0.5, 2.0), t_b=st.floats(0.0, 10.0), dt=st.sampled_from([0.005, 0.01, 0.05]))
def test_envelope_grids_unit_norm(sigma, t_b, dt):
    p = P.PulseParams(sigma_t=sigma, t_b=t_b, t_c=6 * sigma)
    lo, hi = P.pulse_window(p)
    f = P.discretize_pulse(p, dt, (min(0.0, lo), hi + 1))
    assert abs(np.sum(np.abs(f.values) ** 2) - 1) <= 1e-12
    f1, f2 = P.discretize_single_pulses(p, dt, (min(0.0, lo), hi + 1))
    assert abs(np.sum(f1.values**2) - 1) <= 1e-12 and abs(np.sum(f2.values**2) - 1) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(t=st.floats(-10, 20), sigma=st.floats(0.3, 3.0), t_c=st.floats(-2, 8))
def test_two_peak_tb0_equals_single(t, sigma, t_c):
    p = P.PulseParams(sigma_t=sigma, t_c=t_c, t_b=0.0)
    assert abs(P.gaussian_two_peak_envelope(t, p) - P.gaussian_single_envelope(t, t_c, sigma)) <= 1e-12


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(0.0, 0.5), t_b=st.floats(0.0, 12.0), sigma=st.floats(0.7, 1.5))
def test_symmetrized_spectrum_symmetric_unit(alpha, t_b, sigma):
    f = P.input_spectrum(OMEGA, P.PulseParams(sigma_t=sigma, t_b=t_b), alpha)
    np.testing.assert_array_equal(f.values, f.values.T)
    assert abs(f.norm() - 1) <= 1e-10


@settings(max_examples=25, deadline=None)
@given(t_b=st.floats(0.0, 12.0))
def test_alpha_half_equal_factors(t_b):
    g1, g2 = P.gaussian_spectra(OMEGA, P.PulseParams(t_b=t_b))
    f1, f2 = P.mixed_spectra(0.5, g1, g2)
    np.testing.assert_array_equal(f1.values, f2.values)
