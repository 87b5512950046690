"""Discretization studies for both engines.

MPS: max |n_TLS - reference| as the bin width halves, against the scattering
engine. Scattering: unitarity defect as the frequency grid is refined, either
with fixed span (bandwidth-limited) or with span and point count doubled.
"""
import argparse

import numpy as np

from fockscatter import mps as M
from fockscatter import pulses as P
from fockscatter import scattering as S


def mps_study(t_b, dts):
    p = P.PulseParams(t_b=t_b)
    win = (0.0, p.t_c + t_b + 15)
    ref = S.run_scattering(p, alpha=0.5, window=win, maps=()).series
    prev = None
    print(f"MPS |2>, t_b={t_b}: dt, max|dn_TLS|, ratio")
    for dt in dts:
        state = M.build_two_photon_mps(P.discretize_pulse(p, dt, win))
        r = M.evolve(state, M.EvolutionParams(dt=dt))
        err = np.abs(np.interp(ref.t, r.series.t, r.series.n_tls) - ref.n_tls).max()
        print(f"  {dt:<8g} {err:.3e}  {'' if prev is None else f'{prev / err:.2f}'}")
        prev = err


def grid_study(t_b):
    print(f"S-matrix |2>, t_b={t_b}: omega_max, n, unitarity defect")
    for wm, n in ((30, 512), (30, 1024), (30, 2048), (15, 512), (60, 2048), (120, 4096)):
        f = P.input_spectrum(S.FrequencyGrid(wm, n).omega, P.PulseParams(t_b=t_b), 0.5)
        print(f"  {wm:<5g} {n:<5d} {abs(S.scatter_two_photon(f, tol=1.0).norm() - 1):.3e}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t-b", type=float, default=8.0)
    ap.add_argument("--dts", type=float, nargs="+", default=[0.04, 0.02, 0.01, 0.005])
    args = ap.parse_args()
    mps_study(args.t_b, args.dts)
    grid_study(args.t_b)
