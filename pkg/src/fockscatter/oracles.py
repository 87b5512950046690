"""Closed-form and ODE references that share no code with either engine."""
from __future__ import annotations

import math

import numpy as np
from scipy.integrate import solve_ivp


def spontaneous_decay(t, gamma: float = 1.0):
    return np.exp(-gamma * np.asarray(t, dtype=float))


def tophat_single_photon_population(t, t_p: float, gamma: float = 1.0):
    """Excited population driven by one photon in a top-hat of length ``t_p``."""
    t = np.asarray(t, dtype=float)
    amp = 2 / math.sqrt(t_p * gamma) * (1 - np.exp(-gamma * np.minimum(t, t_p) / 2))
    amp = amp * np.exp(-gamma * np.clip(t - t_p, 0, None) / 2)
    return np.where(t < 0, 0.0, amp**2)


def single_photon_population(envelope, t_eval, gamma: float = 1.0, t_start: float | None = None):
    """Integrate ``c' = -(gamma/2) c - i sqrt(gamma) f(t)`` and return ``|c|^2``.

    ``envelope`` is a callable square-normalized temporal amplitude.
    """
    t_eval = np.asarray(t_eval, dtype=float)
    t0 = t_eval[0] if t_start is None else t_start
    sg = math.sqrt(gamma)

    def rhs(t, y):
        c = y[0] + 1j * y[1]
        dc = -0.5 * gamma * c - 1j * sg * envelope(t)
        return [dc.real, dc.imag]

    sol = solve_ivp(rhs, (t0, t_eval[-1]), [0.0, 0.0], t_eval=t_eval, rtol=1e-10, atol=1e-12,
                    max_step=0.01)
    return sol.y[0] ** 2 + sol.y[1] ** 2
