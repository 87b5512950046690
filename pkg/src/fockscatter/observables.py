"""Observable containers shared by both engines, plus their CSV formats."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

SERIES_FIELDS = ("t", "n_in", "n_tls", "n_t", "n_tt")


@dataclass
class ObservableSeries:
    t: np.ndarray
    n_in: np.ndarray
    n_tls: np.ndarray
    n_t: np.ndarray
    n_tt: np.ndarray

    def __post_init__(self):
        for name in SERIES_FIELDS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n = len(self.t)
        if any(len(getattr(self, k)) != n for k in SERIES_FIELDS):
            raise ValueError("series columns differ in length")

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def column(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def crop(self, lo: float, hi: float) -> "ObservableSeries":
        keep = (self.t >= lo - 1e-12) & (self.t <= hi + 1e-12)
        return ObservableSeries(*(getattr(self, k)[keep] for k in SERIES_FIELDS))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(SERIES_FIELDS)
            for row in zip(*(getattr(self, k) for k in SERIES_FIELDS)):
                w.writerow([f"{x:.12g}" for x in row])

    @classmethod
    def from_csv(cls, path) -> "ObservableSeries":
        data = np.genfromtxt(path, delimiter=",", names=True)
        return cls(*(np.atleast_1d(data[k]) for k in SERIES_FIELDS))


@dataclass
class CorrelationMap:
    """Two-time correlation ``G(t, tau)`` stored on the grid of its two times.

    ``values[i, j]`` holds ``G(t[i], tau = t[j] - t[i])``; the map covers both
    signs of ``tau``.
    """

    t: np.ndarray
    values: np.ndarray
    kind: str = "G2"

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values)
        if self.values.shape != (len(self.t), len(self.t)):
            raise ValueError("values must be square over the time grid")

    @property
    def tau(self) -> np.ndarray:
        """Delays available from ``t[0]``; negative delays mirror these."""
        return self.t - self.t[0]

    def diagonal(self) -> np.ndarray:
        """Same-time values ``G(t, 0)``."""
        return np.diag(self.values)

    def interpolator(self):
        if np.iscomplexobj(self.values):
            re = RegularGridInterpolator((self.t, self.t), self.values.real, bounds_error=False, fill_value=None)
            im = RegularGridInterpolator((self.t, self.t), self.values.imag, bounds_error=False, fill_value=None)
            return lambda pts: re(pts) + 1j * im(pts)
        return RegularGridInterpolator((self.t, self.t), self.values, bounds_error=False, fill_value=None)

    def at(self, t, tau):
        """Linear interpolation of ``G(t, tau)``."""
        t = np.asarray(t, dtype=float)
        pts = np.stack(np.broadcast_arrays(t, t + np.asarray(tau, dtype=float)), axis=-1)
        return self.interpolator()(pts)

    def resample(self, t_new: np.ndarray) -> "CorrelationMap":
        t1, t2 = np.meshgrid(t_new, t_new, indexing="ij")
        vals = self.interpolator()(np.stack([t1, t2], axis=-1))
        return CorrelationMap(np.asarray(t_new, dtype=float), vals, self.kind)

    def integral(self) -> complex:
        dt = self.t[1] - self.t[0]
        return self.values.sum() * dt**2

    def to_csv(self, path) -> None:
        i, j = np.meshgrid(np.arange(len(self.t)), np.arange(len(self.t)), indexing="ij")
        t = self.t[i].ravel()
        tau = (self.t[j] - self.t[i]).ravel()
        v = self.values.ravel()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if self.kind == "G1":
                w.writerow(("t", "tau", "re", "im"))
                for row in zip(t, tau, v.real, v.imag):
                    w.writerow([f"{x:.12g}" for x in row])
            else:
                w.writerow(("t", "tau", "value"))
                for row in zip(t, tau, np.real(v)):
                    w.writerow([f"{x:.12g}" for x in row])

    @classmethod
    def from_csv(cls, path) -> "CorrelationMap":
        data = np.genfromtxt(path, delimiter=",", names=True)
        kind = "G1" if "re" in data.dtype.names else "G2"
        t = np.unique(np.round(data["t"], 12))
        n = len(t)
        vals = data["re"] + 1j * data["im"] if kind == "G1" else data["value"]
        return cls(t, vals.reshape(n, n), kind)


def write_spectrum_csv(path, omega, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("omega", "re", "im"))
        for row in zip(omega, np.real(values), np.imag(values)):
            w.writerow([f"{x:.12g}" for x in row])


def write_envelope_csv(path, t, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("t", "re", "im"))
        for row in zip(t, np.real(values), np.imag(values)):
            w.writerow([f"{x:.12g}" for x in row])


def write_two_photon_csv(path, omega, values) -> None:
    i, j = np.meshgrid(np.arange(len(omega)), np.arange(len(omega)), indexing="ij")
    rows = zip(omega[i].ravel(), omega[j].ravel(), values.real.ravel(), values.imag.ravel())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("omega1", "omega2", "re", "im"))
        for row in rows:
            w.writerow([f"{x:.12g}" for x in row])


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
