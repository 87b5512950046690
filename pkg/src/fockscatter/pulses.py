"""Input pulse envelopes in time and frequency, and their discretization.

All times are in units of 1/gamma. Temporal envelopes are square-normalized
real functions; spectral amplitudes are left unnormalized and only the
symmetrized two-photon spectrum carries an overall normalization constant.

Fourier convention shared by the whole package::

    a(omega) = 1/sqrt(2 pi) * integral dt exp(+i omega t) a(t)
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy.special import erfcinv

Shape = Literal["tophat", "gaussian"]


class PulseError(ValueError):
    """Invalid pulse parameters or an unrepresentable envelope."""


@dataclass(frozen=True)
class PulseParams:
    shape: Shape = "gaussian"
    t_p: float = 1.0
    sigma_t: float = 1.0
    t_c: float = 4.0
    t_b: float = 8.0
    alpha: float = 0.0

    def __post_init__(self):
        if self.shape not in ("tophat", "gaussian"):
            raise PulseError(f"unknown pulse shape {self.shape!r}")
        if self.shape == "tophat" and not self.t_p > 0:
            raise PulseError("t_p must be positive")
        if self.shape == "gaussian" and not self.sigma_t > 0:
            raise PulseError("sigma_t must be positive")
        if self.t_b < 0:
            raise PulseError("t_b must be non-negative")
        if not 0.0 <= self.alpha <= 0.5:
            raise PulseError("alpha must lie in [0, 0.5]")


@dataclass
class EnvelopeGrid:
    """Bin amplitudes ``f_k = f(t_k) sqrt(dt)`` on a uniform grid.

    Bin ``k`` covers ``[t0 + k dt, t0 + (k+1) dt)``.
    """

    dt: float
    t0: float
    values: np.ndarray
    rescale: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if not np.all(np.isfinite(self.values)):
            raise PulseError("envelope values must be finite")
        norm = float(np.sum(np.abs(self.values) ** 2))
        if abs(norm - 1.0) > 1e-10:
            raise PulseError(f"envelope not square-normalized (sum |f_k|^2 = {norm:.12g})")

    def __len__(self):
        return len(self.values)

    @property
    def midpoints(self) -> np.ndarray:
        return self.t0 + (np.arange(len(self.values)) + 0.5) * self.dt

    def support(self, tol: float = 0.0) -> tuple[int, int]:
        """First and last bin index with ``|f_k| > tol``."""
        idx = np.flatnonzero(np.abs(self.values) > tol)
        if idx.size == 0:
            raise PulseError("empty envelope")
        return int(idx[0]), int(idx[-1])


@dataclass
class SpectralAmplitude:
    omega: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.omega.shape != self.values.shape:
            raise PulseError("grid and values differ in shape")
        if not np.allclose(self.omega, -self.omega[::-1], atol=1e-12 * max(1.0, abs(self.omega[0]))):
            raise PulseError("frequency grid must be symmetric about 0")
        if not np.all(np.isfinite(self.values)):
            raise PulseError("spectral values must be finite")

    @property
    def d_omega(self) -> float:
        return float(self.omega[1] - self.omega[0])


@dataclass
class TwoPhotonSpectrum:
    """Symmetric joint spectral amplitude ``f(omega_i, omega_j)``."""

    omega: np.ndarray
    values: np.ndarray
    K: float = float("nan")

    @property
    def d_omega(self) -> float:
        return float(self.omega[1] - self.omega[0])

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2)) * self.d_omega)


# --- temporal envelopes ------------------------------------------------------

def tophat_two_photon_envelope(t, p: PulseParams):
    """Two-segment top-hat shared by both photons of the |2> state."""
    if p.t_b < p.t_p:
        raise PulseError("two-segment top-hat requires t_b >= t_p")
    t = np.asarray(t, dtype=float)
    inside = ((t >= 0) & (t <= p.t_p)) | ((t >= p.t_b) & (t <= p.t_b + p.t_p))
    out = np.where(inside, 1.0 / math.sqrt(2 * p.t_p), 0.0)
    return out if out.ndim else float(out)


def tophat_single_envelopes(p: PulseParams) -> tuple[Callable, Callable]:
    """Envelopes of the two single photons of the |1>|1> top-hat state."""
    if p.t_b < p.t_p:
        raise PulseError("overlapping single-photon envelopes not representable")
    amp = 1.0 / math.sqrt(p.t_p)

    def segment(start):
        def f(t):
            t = np.asarray(t, dtype=float)
            out = np.where((t >= start) & (t <= start + p.t_p), amp, 0.0)
            return out if out.ndim else float(out)
        return f

    return segment(0.0), segment(p.t_b)


def gaussian_single_envelope(t, center: float, sigma_t: float):
    if not sigma_t > 0:
        raise PulseError("sigma_t must be positive")
    t = np.asarray(t, dtype=float)
    out = (sigma_t * math.sqrt(math.pi)) ** -0.5 * np.exp(-((t - center) ** 2) / (2 * sigma_t**2))
    return out if out.ndim else float(out)


def gaussian_two_peak_norm(sigma_t: float, t_b: float) -> float:
    """Normalization constant C of the two-peak Gaussian envelope."""
    return 1.0 / math.sqrt(2 * sigma_t * math.sqrt(math.pi) * (1 + math.exp(-(t_b**2) / (4 * sigma_t**2))))


def gaussian_two_peak_envelope(t, p: PulseParams):
    t = np.asarray(t, dtype=float)
    s2 = 2 * p.sigma_t**2
    C = gaussian_two_peak_norm(p.sigma_t, p.t_b)
    out = C * (np.exp(-((t - p.t_c) ** 2) / s2) + np.exp(-((t - p.t_c - p.t_b) ** 2) / s2))
    return out if out.ndim else float(out)


def pulse_window(p: PulseParams, eps: float = 1e-6) -> tuple[float, float]:
    """Smallest time window holding all but ``eps`` of the envelope weight."""
    if p.shape == "tophat":
        return 0.0, p.t_b + p.t_p
    # each tail of a unit Gaussian |f|^2 holds erfc(w/sigma)/2
    w = p.sigma_t * float(erfcinv(eps))
    return p.t_c - w, p.t_c + p.t_b + w


# --- spectral amplitudes -----------------------------------------------------

def gaussian_spectral_amplitude(omega, sigma_t: float, center: float):
    """Unnormalized ``exp(-sigma^2 omega^2 / 2 + i omega center)``."""
    omega = np.asarray(omega, dtype=float)
    out = np.exp(-(sigma_t**2) * omega**2 / 2 + 1j * omega * center)
    return out if out.ndim else complex(out)


def gaussian_spectra(omega, p: PulseParams) -> tuple[SpectralAmplitude, SpectralAmplitude]:
    """Spectra of the two peaks, centered at ``t_c`` and ``t_c + t_b``."""
    g1 = SpectralAmplitude(omega, gaussian_spectral_amplitude(omega, p.sigma_t, p.t_c))
    g2 = SpectralAmplitude(omega, gaussian_spectral_amplitude(omega, p.sigma_t, p.t_c + p.t_b))
    return g1, g2


def mixed_spectra(alpha: float, g1: SpectralAmplitude, g2: SpectralAmplitude):
    """Interpolate between localized (alpha=0) and delocalized (alpha=0.5) photons."""
    if not 0.0 <= alpha <= 0.5:
        raise PulseError("alpha must lie in [0, 0.5]")
    if g1.omega.shape != g2.omega.shape or not np.array_equal(g1.omega, g2.omega):
        raise PulseError("spectra live on different grids")
    f1 = (1 - alpha) * g1.values + alpha * g2.values
    f2 = alpha * g1.values + (1 - alpha) * g2.values
    return SpectralAmplitude(g1.omega, f1), SpectralAmplitude(g1.omega, f2)


def symmetrized_two_photon_spectrum(f1: SpectralAmplitude, f2: SpectralAmplitude) -> TwoPhotonSpectrum:
    """Build ``K [f1(w1) f2(w2) + f1(w2) f2(w1)]`` with unit discrete norm.

    K follows from the Gram data of ``f1, f2``:
    ``||f||^2 = 2 K^2 (||f1||^2 ||f2||^2 + |<f1, f2>|^2)``.
    """
    if not np.array_equal(f1.omega, f2.omega):
        raise PulseError("spectra live on different grids")
    dw = f1.d_omega
    n1 = np.vdot(f1.values, f1.values).real * dw
    n2 = np.vdot(f2.values, f2.values).real * dw
    overlap = np.vdot(f1.values, f2.values) * dw
    gram = n1 * n2 + abs(overlap) ** 2
    if not gram > 0 or n1 == 0 or n2 == 0:
        raise PulseError("zero-norm single-photon spectrum")
    K = 1.0 / math.sqrt(2 * gram)
    prod = np.outer(f1.values, f2.values)
    values = K * (prod + prod.T)
    return TwoPhotonSpectrum(f1.omega.copy(), values, K)


def input_spectrum(omega, p: PulseParams, alpha: float | None = None) -> TwoPhotonSpectrum:
    """Two-photon Gaussian input spectrum; ``alpha`` defaults to ``p.alpha``."""
    if p.shape != "gaussian":
        raise PulseError("only Gaussian pulses have a frequency-domain input")
    g1, g2 = gaussian_spectra(omega, p)
    f1, f2 = mixed_spectra(p.alpha if alpha is None else alpha, g1, g2)
    return symmetrized_two_photon_spectrum(f1, f2)


# --- discretization ----------------------------------------------------------

def discretize_envelope(f: Callable, dt: float, window: tuple[float, float], eps: float = 1e-6,
                        hint: tuple[float, float] | None = None) -> EnvelopeGrid:
    """Sample ``f`` at bin midpoints inside ``window`` and renormalize.

    Parameters
    ----------
    f : callable
        Square-normalized envelope, vectorized over time.
    dt : float
        Bin width.
    window : (float, float)
        Start and end time; the number of bins is ``round((end - start) / dt)``.
    eps : float
        Largest tolerated envelope weight outside the window.
    hint : (float, float), optional
        Required window, quoted in the error message when truncation is too large.
    """
    if not dt > 0:
        raise PulseError("dt must be positive")
    t0, t1 = window
    m = int(round((t1 - t0) / dt))
    if m < 1:
        raise PulseError("window shorter than one bin")
    t = t0 + (np.arange(m) + 0.5) * dt
    samples = np.asarray(f(t)) * math.sqrt(dt)
    captured = float(np.sum(np.abs(samples) ** 2))
    if 1.0 - captured > eps or captured == 0.0:
        msg = f"window [{t0}, {t1}] keeps only {captured:.8f} of the envelope weight"
        if hint is not None:
            msg += f"; required window is about [{hint[0]:.4g}, {hint[1]:.4g}]"
        raise PulseError(msg)
    rescale = 1.0 / math.sqrt(captured)
    if abs(rescale - 1.0) > 1e-4:
        warnings.warn(f"envelope rescaled by {rescale:.6f}; grid may be too coarse", stacklevel=2)
    values = samples * rescale
    values = values / math.sqrt(np.sum(np.abs(values) ** 2))
    return EnvelopeGrid(dt=dt, t0=t0, values=values, rescale=rescale)


def discretize_pulse(p: PulseParams, dt: float, window: tuple[float, float], eps: float = 1e-6) -> EnvelopeGrid:
    """Discretize the |2> envelope of ``p``."""
    f = (lambda t: tophat_two_photon_envelope(t, p)) if p.shape == "tophat" else (
        lambda t: gaussian_two_peak_envelope(t, p))
    return discretize_envelope(f, dt, window, eps, hint=pulse_window(p, eps))


def discretize_single_pulses(p: PulseParams, dt: float, window: tuple[float, float],
                             eps: float = 1e-6) -> tuple[EnvelopeGrid, EnvelopeGrid]:
    """Discretize the two single-photon envelopes of the |1>|1> state.

    Top-hats land on disjoint bin ranges; the two Gaussians are kept whole and
    may overlap through their tails.
    """
    if p.shape == "tophat":
        f1, f2 = tophat_single_envelopes(p)
    else:
        def f1(t):
            return gaussian_single_envelope(t, p.t_c, p.sigma_t)

        def f2(t):
            return gaussian_single_envelope(t, p.t_c + p.t_b, p.sigma_t)
    hint = pulse_window(p, eps)
    return (discretize_envelope(f1, dt, window, eps, hint=hint),
            discretize_envelope(f2, dt, window, eps, hint=hint))
