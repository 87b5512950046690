"""Frequency-space two-photon scattering off a chiral two-level emitter.

The two-photon S-matrix splits into a linear part ``t(nu1) t(nu2)`` and a
bound-state part living on the energy shell ``nu1 + nu2 = omega1 + omega2``.
On a uniform grid the energy shell is an anti-diagonal, so the delta function
is integrated out exactly and only a 1-D quadrature per anti-diagonal remains.

Time amplitudes use ``phi(t1, t2) = 1/(2 pi) sum f(w1, w2) exp(-i (w1 t1 + w2 t2)) dw^2``,
the inverse of the package-wide ``exp(+i omega t)`` forward transform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .observables import CorrelationMap, ObservableSeries
from .pulses import PulseParams, SpectralAmplitude, TwoPhotonSpectrum, input_spectrum

# Applying S to (1/sqrt 2) int f a^dag a^dag |0> and projecting back onto the
# same normalization gives f_out = 1/2 int S f; the 1/2 survives on the
# bound-state term. Pinned by unitarity, see ``unitarity_prefactor``.
NL_PREFACTOR = 0.5


class ScatteringError(RuntimeError):
    """Numerical contract violated (under-resolved grid, aliasing, short window)."""


@dataclass(frozen=True)
class FrequencyGrid:
    omega_max: float = 30.0
    n: int = 1024

    def __post_init__(self):
        if not self.omega_max > 0 or self.n < 4:
            raise ValueError("need omega_max > 0 and at least 4 points")

    @property
    def omega(self) -> np.ndarray:
        return np.linspace(-self.omega_max, self.omega_max, self.n)

    @property
    def d_omega(self) -> float:
        return 2 * self.omega_max / (self.n - 1)

    def check_resolution(self, gamma: float) -> None:
        if self.d_omega > gamma / 10:
            raise ScatteringError(f"frequency step {self.d_omega:.4g} does not resolve gamma={gamma} "
                                  f"(need <= gamma/10)")


@dataclass
class TwoPhotonAmplitude:
    t: np.ndarray
    values: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2)) * self.dt)


# --- kernels -----------------------------------------------------------------

def transmission_coefficient(omega, gamma: float = 1.0):
    omega = np.asarray(omega, dtype=float)
    return (omega - 0.5j * gamma) / (omega + 0.5j * gamma)


def nonlinear_kernel(omega, gamma: float = 1.0):
    omega = np.asarray(omega, dtype=float)
    return math.sqrt(gamma) / (omega + 0.5j * gamma)


def _check_unit(f: TwoPhotonSpectrum, tol: float = 1e-8) -> None:
    nrm = f.norm()
    if abs(nrm - 1.0) > tol:
        raise ScatteringError(f"input spectrum has norm {nrm:.10f}, expected 1")


def _antidiagonal_sums(m: np.ndarray) -> np.ndarray:
    """Trapezoidal sums of ``m`` along each line ``i + j = k``."""
    n = m.shape[0]
    i, j = np.indices(m.shape)
    # every line starts and ends on the grid boundary
    w = np.where((i == 0) | (j == 0) | (i == n - 1) | (j == n - 1), 0.5, 1.0)
    k = (i + j).ravel()
    vals = (m * w).ravel()
    re = np.bincount(k, weights=vals.real, minlength=2 * n - 1)
    im = np.bincount(k, weights=vals.imag, minlength=2 * n - 1)
    return re + 1j * im


def _bound_state_term(f_in: TwoPhotonSpectrum, gamma: float) -> np.ndarray:
    """``int T(nu1, nu2, w, E - w) f(w, E - w) dw`` on the grid, no prefactor.

    ``s(w) + s(E - w)`` integrates to twice ``s(w)`` against a symmetric ``f``.
    """
    w = f_in.omega
    s = nonlinear_kernel(w, gamma)
    line = 2 * _antidiagonal_sums(s[:, None] * f_in.values) * f_in.d_omega
    n = len(w)
    k = np.add.outer(np.arange(n), np.arange(n))
    return (1j * math.sqrt(gamma) / math.pi) * np.outer(s, s) * line[k]


def unitarity_prefactor(f_in: TwoPhotonSpectrum, gamma: float = 1.0) -> float:
    """Bound-state prefactor ``c`` making ``||t t f + c N||`` equal to one.

    With ``|t| = 1`` the linear part has unit norm, so ``c`` is the non-zero
    root of ``2 c Re<L, N> + c^2 ||N||^2 = 0``.
    """
    tt = np.outer(*(2 * [transmission_coefficient(f_in.omega, gamma)]))
    lin = tt * f_in.values
    nl = _bound_state_term(f_in, gamma)
    return float(-2 * np.vdot(lin, nl).real / np.vdot(nl, nl).real)


def scatter_two_photon(f_in: TwoPhotonSpectrum, gamma: float = 1.0, nonlinear: bool = True,
                       prefactor: float = NL_PREFACTOR, tol: float = 1e-3) -> TwoPhotonSpectrum:
    """Output two-photon spectrum after scattering off the ground-state emitter.

    Raises
    ------
    ScatteringError
        Input not unit norm, or the output norm deviates from one by more
        than ``tol`` (grid under-resolved).
    """
    _check_unit(f_in)
    t = transmission_coefficient(f_in.omega, gamma)
    out = np.outer(t, t) * f_in.values
    if nonlinear:
        out = out + prefactor * _bound_state_term(f_in, gamma)
    out = 0.5 * (out + out.T)
    res = TwoPhotonSpectrum(f_in.omega.copy(), out, f_in.K)
    defect = abs(res.norm() - 1.0)
    if defect > tol:
        raise ScatteringError(f"grid under-resolved: output norm {res.norm():.6f} (defect {defect:.2e})")
    return res


# --- time domain -------------------------------------------------------------

def time_grid(omega: np.ndarray, t_center: float, oversample: int = 2) -> np.ndarray:
    """Full periodic time grid dual to ``omega``, centered on ``t_center``."""
    dw = omega[1] - omega[0]
    N = oversample * len(omega)
    period = 2 * math.pi / dw
    return t_center - period / 2 + np.arange(N) * (period / N)


def _partial_transform(values: np.ndarray, omega: np.ndarray, t: np.ndarray, axis: int) -> np.ndarray:
    """Inverse transform along one axis onto the FFT-compatible grid ``t``."""
    dw = omega[1] - omega[0]
    N = len(t)
    k = np.arange(len(omega))
    shape = [1, 1]
    shape[axis] = -1
    pre = np.exp(-1j * k * dw * t[0]).reshape(shape)
    post = (dw / math.sqrt(2 * math.pi)) * np.exp(-1j * omega[0] * t).reshape(shape)
    return np.fft.fft(values * pre, n=N, axis=axis) * post


def _check_aliasing(marginal: np.ndarray, frac: float = 0.05, tol: float = 1e-4) -> None:
    n = len(marginal)
    edge = max(1, int(frac * n))
    outer = marginal[:edge].sum() + marginal[-edge:].sum()
    if outer > tol * marginal.sum():
        raise ScatteringError(f"aliasing: {outer / marginal.sum():.2e} of the weight in the outer "
                              f"{frac:.0%} of the time window")


def spectrum_to_time_amplitude(f: TwoPhotonSpectrum, t_center: float, oversample: int = 2,
                               check: bool = True) -> TwoPhotonAmplitude:
    """Two-dimensional inverse transform; Parseval holds exactly on this grid."""
    t = time_grid(f.omega, t_center, oversample)
    half = _partial_transform(f.values, f.omega, t, axis=0)
    phi = _partial_transform(half, f.omega, t, axis=1)
    phi = 0.5 * (phi + phi.T)  # exact exchange symmetry, lost to FFT roundoff
    if check:
        _check_aliasing(np.sum(np.abs(phi) ** 2, axis=1))
    return TwoPhotonAmplitude(t, phi)


def transmitted_flux(phi: TwoPhotonAmplitude) -> np.ndarray:
    return 2 * np.sum(np.abs(phi.values) ** 2, axis=1) * phi.dt


def flux_from_spectrum(f: TwoPhotonSpectrum, t_center: float, oversample: int = 2,
                       check: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Photon flux via a single-axis transform (Parseval in the other time)."""
    t = time_grid(f.omega, t_center, oversample)
    half = _partial_transform(f.values, f.omega, t, axis=0)
    flux = 2 * np.sum(np.abs(half) ** 2, axis=1) * f.d_omega
    if check:
        _check_aliasing(flux)
    return t, flux


def input_flux(f_in: TwoPhotonSpectrum, t_center: float, oversample: int = 2) -> tuple[np.ndarray, np.ndarray]:
    return flux_from_spectrum(f_in, t_center, oversample)


def _crop(t: np.ndarray, window) -> np.ndarray:
    if window is None:
        return np.arange(len(t))
    lo, hi = window
    idx = np.flatnonzero((t >= lo) & (t <= hi))
    if idx.size < 2:
        raise ScatteringError("time window selects fewer than two grid points")
    return idx


def correlation_maps(phi: TwoPhotonAmplitude, window=None, f: TwoPhotonSpectrum | None = None):
    """``(G1, G2)`` restricted to ``window``.

    ``G1`` sums over the second photon's time on the full period; when the
    spectrum is supplied that sum runs in frequency (Parseval), which is cheaper.
    """
    idx = _crop(phi.t, window)
    rows = phi.values[idx]
    if f is not None:
        half = _partial_transform(f.values, f.omega, phi.t, axis=0)[idx]
        g1 = 2 * (half.conj() @ half.T) * f.d_omega
    else:
        g1 = 2 * (rows.conj() @ rows.T) * phi.dt
    g2 = 2 * np.abs(rows[:, idx]) ** 2
    t = phi.t[idx]
    return CorrelationMap(t, g1, "G1"), CorrelationMap(t, g2, "G2")


def tls_population_by_continuity(n_in: np.ndarray, n_t: np.ndarray, dt: float,
                                 final_tol: float = 1e-3, check: bool = True) -> np.ndarray:
    """Emitter population from photon-number balance, ``int (n_in - n_T) dt``."""
    pop = cumulative_trapezoid(np.asarray(n_in) - np.asarray(n_t), dx=dt, initial=0.0)
    if check and abs(pop[-1]) > final_tol:
        raise ScatteringError(f"window too short or grids inconsistent: final population {pop[-1]:.2e}")
    lo, hi = pop.min(), pop.max()
    if lo < -1e-3 or hi > 1 + 1e-3:
        raise ScatteringError(f"population left [0, 1]: range [{lo:.4f}, {hi:.4f}]")
    return np.clip(pop, 0.0, 1.0)


# --- single photon -----------------------------------------------------------

def single_photon_series(g: SpectralAmplitude, gamma: float, t_center: float, window=None,
                         oversample: int = 2) -> ObservableSeries:
    """Flux and population for one photon with spectrum ``g`` (normalized here)."""
    dw = g.d_omega
    v = g.values / math.sqrt(np.vdot(g.values, g.values).real * dw)
    t = time_grid(g.omega, t_center, oversample)
    tin = _partial_transform(v[:, None], g.omega, t, axis=0)[:, 0]
    tout = _partial_transform((transmission_coefficient(g.omega, gamma) * v)[:, None], g.omega, t, axis=0)[:, 0]
    n_in, n_t = np.abs(tin) ** 2, np.abs(tout) ** 2
    _check_aliasing(n_t)
    pop = tls_population_by_continuity(n_in, n_t, t[1] - t[0])
    idx = _crop(t, window)
    return ObservableSeries(t[idx], n_in[idx], pop[idx], n_t[idx], np.zeros(idx.size))


# --- full pipeline -----------------------------------------------------------

@dataclass
class ScatteringResult:
    series: ObservableSeries
    f_in: TwoPhotonSpectrum
    f_out: TwoPhotonSpectrum
    phi_out: TwoPhotonAmplitude | None
    g1: CorrelationMap | None
    g2: CorrelationMap | None
    unitarity_defect: float


def run_scattering(p: PulseParams, gamma: float = 1.0, grid: FrequencyGrid = FrequencyGrid(),
                   window: tuple[float, float] = (0.0, 27.0), alpha: float | None = None,
                   oversample: int = 2, maps: tuple[str, ...] = ("G1", "G2"),
                   nonlinear: bool = True) -> ScatteringResult:
    """Input spectrum -> S-matrix -> time domain -> series and correlation maps."""
    grid.check_resolution(gamma)
    f_in = input_spectrum(grid.omega, p, alpha)
    f_out = scatter_two_photon(f_in, gamma, nonlinear=nonlinear)
    tc = 0.5 * (window[0] + window[1])
    t, n_in = flux_from_spectrum(f_in, tc, oversample)
    want_phi = bool(maps)
    if want_phi:
        phi = spectrum_to_time_amplitude(f_out, tc, oversample)
        n_t = transmitted_flux(phi)
        n_tt_full = 2 * np.abs(np.diag(phi.values)) ** 2
    else:
        phi = None
        _, n_t = flux_from_spectrum(f_out, tc, oversample)
        n_tt_full = None
    pop = tls_population_by_continuity(n_in, n_t, t[1] - t[0])
    idx = _crop(t, window)
    if n_tt_full is None:
        n_tt = _same_time_g2(f_out, t, idx)
    else:
        n_tt = n_tt_full[idx]
    series = ObservableSeries(t[idx], n_in[idx], pop[idx], n_t[idx], n_tt)
    g1 = g2 = None
    if want_phi:
        g1, g2 = correlation_maps(phi, window, f_out if "G1" in maps else None)
        if "G1" not in maps:
            g1 = None
        if "G2" not in maps:
            g2 = None
    return ScatteringResult(series, f_in, f_out, phi, g1, g2, abs(f_out.norm() - 1.0))


def _same_time_g2(f: TwoPhotonSpectrum, t: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """``2 |phi(t, t)|^2`` without forming the full time amplitude."""
    half = _partial_transform(f.values, f.omega, t, axis=0)[idx]
    phase = np.exp(-1j * np.outer(t[idx], f.omega)) * (f.d_omega / math.sqrt(2 * math.pi))
    return 2 * np.abs(np.sum(half * phase, axis=1)) ** 2
