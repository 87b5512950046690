"""Time-bin matrix product states for a chirally coupled two-level emitter.

Chain layout: ``[bin_0, ..., bin_{k-1}, TLS, bin_k, ..., bin_{m-1}]`` after
``k`` interaction steps. Bins left of the TLS have already scattered (output
field), bins to its right are still incoming. Site tensors are indexed
``(left bond, physical, right bond)``.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .observables import CorrelationMap, ObservableSeries
from .pulses import EnvelopeGrid, PulseError

D_BIN = 3


class TruncationError(RuntimeError):
    """Bond cap reached while discarding non-negligible weight."""


@dataclass
class TimeBinMPS:
    sites: list[np.ndarray]
    tls_index: int
    oc_index: int
    dt: float
    t0: float = 0.0
    discarded_weight: float = 0.0

    @property
    def n_bins(self) -> int:
        return len(self.sites) - 1

    @property
    def physical_dims(self) -> list[int]:
        return [a.shape[1] for a in self.sites]

    @property
    def bond_dims(self) -> list[int]:
        return [a.shape[2] for a in self.sites[:-1]]

    def bin_position(self, k: int) -> int:
        if not 0 <= k < self.n_bins:
            raise IndexError(f"bin {k} outside chain of {self.n_bins} bins")
        return k if k < self.tls_index else k + 1

    def copy(self) -> "TimeBinMPS":
        return TimeBinMPS([a.copy() for a in self.sites], self.tls_index, self.oc_index,
                          self.dt, self.t0, self.discarded_weight)


@dataclass(frozen=True)
class EvolutionParams:
    gamma: float = 1.0
    dt: float = 0.01
    n_steps: int | None = None
    svd_cutoff: float = 1e-10
    max_bond: int = 16

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.svd_cutoff < 0:
            raise ValueError("svd_cutoff must be non-negative")


# --- local operators ---------------------------------------------------------

def annihilation(d: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, d)), 1)


def number(d: int) -> np.ndarray:
    return np.diag(np.arange(d, dtype=float))


# --- state construction ------------------------------------------------------

def _tls_site(excited: bool = False) -> np.ndarray:
    t = np.zeros((1, 2, 1), dtype=complex)
    t[0, 1 if excited else 0, 0] = 1.0
    return t


def _counter_chain(creation: list[dict[int, np.ndarray]], n_photons: int, d: int) -> list[np.ndarray]:
    """Bins of a photon-counting automaton.

    ``creation[k]`` maps a local occupation ``n >= 1`` to the ``D x D`` matrix
    that raises the running photon count, ``D = n_photons + 1``. Boundary
    vectors pick count 0 on the left and ``n_photons`` on the right.
    """
    D = n_photons + 1
    sites = []
    for k, ops in enumerate(creation):
        a = np.zeros((D, d, D), dtype=complex)
        a[:, 0, :] = np.eye(D)
        for n, mat in ops.items():
            a[:, n, :] = mat
        sites.append(a)
    sites[0] = sites[0][:1]
    sites[-1] = sites[-1][:, :, n_photons:]
    return sites


def _shift(D: int, step: int, weight) -> np.ndarray:
    return weight * np.eye(D, k=step)


def _right_canonicalize(mps: TimeBinMPS, stop: int) -> None:
    """QR sweep from the right end down to (excluding) position ``stop``."""
    for p in range(len(mps.sites) - 1, stop, -1):
        a = mps.sites[p]
        Dl, d, Dr = a.shape
        q, r = np.linalg.qr(a.reshape(Dl, d * Dr).T)
        mps.sites[p] = q.T.reshape(-1, d, Dr)
        mps.sites[p - 1] = np.tensordot(mps.sites[p - 1], r.T, axes=(2, 0))
    mps.oc_index = stop


def _assemble(bins: list[np.ndarray], dt: float, t0: float, excited: bool = False) -> TimeBinMPS:
    mps = TimeBinMPS([_tls_site(excited)] + bins, tls_index=0, oc_index=1, dt=dt, t0=t0)
    _right_canonicalize(mps, 1)
    nrm = np.vdot(mps.sites[1], mps.sites[1]).real
    if abs(nrm - 1.0) > 1e-10:
        raise PulseError(f"pulse state not normalized (norm^2 = {nrm:.12g})")
    return mps


def _check_envelope(f: EnvelopeGrid, min_bins: int = 1) -> np.ndarray:
    v = np.asarray(f.values, dtype=complex)
    if len(v) < min_bins:
        raise PulseError(f"need at least {min_bins} bins")
    if abs(np.sum(np.abs(v) ** 2) - 1.0) > 1e-10:
        raise PulseError("envelope is not square-normalized")
    return v


def build_vacuum(m: int, dt: float, t0: float = 0.0, excited: bool = False, d: int = D_BIN) -> TimeBinMPS:
    """Empty waveguide; the TLS starts in ``|g>`` unless ``excited``."""
    if m < 1:
        raise ValueError("need at least one bin")
    b = np.zeros((1, d, 1), dtype=complex)
    b[0, 0, 0] = 1.0
    return _assemble([b.copy() for _ in range(m)], dt, t0, excited)


def build_single_photon_mps(f: EnvelopeGrid, d: int = D_BIN) -> TimeBinMPS:
    v = _check_envelope(f)
    if len(v) == 1:
        b = np.zeros((1, d, 1), dtype=complex)
        b[0, 1, 0] = v[0]
        return _assemble([b], f.dt, f.t0)
    bins = _counter_chain([{1: _shift(2, 1, fk)} for fk in v], 1, d)
    return _assemble(bins, f.dt, f.t0)


def build_two_photon_mps(f: EnvelopeGrid, d: int = D_BIN) -> TimeBinMPS:
    """Two indistinguishable photons sharing the envelope ``f`` (the |2> state).

    Bin amplitudes are ``f_i^2`` for ``|2_i>`` and ``sqrt(2) f_i f_j`` for
    ``|1_i, 1_j>``, i.e. the bond-3 automaton with the overall sqrt(2).
    """
    v = _check_envelope(f, min_bins=2)
    bins = _counter_chain(
        [{1: _shift(3, 1, fk), 2: _shift(3, 2, fk**2 / math.sqrt(2))} for fk in v], 2, d)
    bins[0] = bins[0] * math.sqrt(2)
    return _assemble(bins, f.dt, f.t0)


def concat_product_pulses(f1: EnvelopeGrid, f2: EnvelopeGrid, d: int = D_BIN) -> TimeBinMPS:
    """The |1>|1> state: one photon in ``f1``, a later one in ``f2``."""
    v1, v2 = _check_envelope(f1), _check_envelope(f2)
    if len(v1) != len(v2) or f1.dt != f2.dt or f1.t0 != f2.t0:
        raise PulseError("single-photon envelopes must share one bin grid")
    (a1, b1), (a2, b2) = f1.support(), f2.support()
    if a2 <= b1:
        if a1 > b2:
            v1, v2 = v2, v1
        else:
            raise PulseError("single-photon envelopes overlap in time")
    ops = []
    for x, y in zip(v1, v2):
        m = np.zeros((3, 3), dtype=complex)
        m[0, 1], m[1, 2] = x, y
        ops.append({1: m})
    return _assemble(_counter_chain(ops, 2, d), f1.dt, f1.t0)


def build_product_mps(f1: EnvelopeGrid, f2: EnvelopeGrid, d: int = D_BIN) -> TimeBinMPS:
    """Normalized ``a^dag(f1) a^dag(f2)|0>`` for envelopes that may overlap.

    The bond index records which of the two photons has been placed so far
    (none, first, second, both), so the bond dimension is 4.
    """
    v1, v2 = _check_envelope(f1), _check_envelope(f2)
    if len(v1) != len(v2) or f1.dt != f2.dt or f1.t0 != f2.t0:
        raise PulseError("single-photon envelopes must share one bin grid")
    ops = []
    for x, y in zip(v1, v2):
        one = np.zeros((4, 4), dtype=complex)
        one[0, 1], one[0, 2], one[1, 3], one[2, 3] = x, y, y, x
        two = np.zeros((4, 4), dtype=complex)
        two[0, 3] = math.sqrt(2) * x * y
        ops.append({1: one, 2: two})
    bins = _counter_chain(ops, 3, d)
    bins[0] = bins[0] / math.sqrt(1 + abs(np.vdot(v1, v2)) ** 2)
    return _assemble(bins, f1.dt, f1.t0)


# --- canonical form utilities ------------------------------------------------

def move_oc(mps: TimeBinMPS, target: int) -> None:
    """Shift the orthogonality center to position ``target`` by QR sweeps."""
    while mps.oc_index < target:
        p = mps.oc_index
        a = mps.sites[p]
        Dl, d, Dr = a.shape
        q, r = np.linalg.qr(a.reshape(Dl * d, Dr))
        mps.sites[p] = q.reshape(Dl, d, -1)
        mps.sites[p + 1] = np.tensordot(r, mps.sites[p + 1], axes=(1, 0))
        mps.oc_index += 1
    while mps.oc_index > target:
        p = mps.oc_index
        a = mps.sites[p]
        Dl, d, Dr = a.shape
        q, r = np.linalg.qr(a.reshape(Dl, d * Dr).T)
        mps.sites[p] = q.T.reshape(-1, d, Dr)
        mps.sites[p - 1] = np.tensordot(mps.sites[p - 1], r.T, axes=(2, 0))
        mps.oc_index -= 1


def canonical_defect(mps: TimeBinMPS) -> float:
    """Largest deviation from isometry over all non-center sites."""
    worst = 0.0
    for p, a in enumerate(mps.sites):
        Dl, d, Dr = a.shape
        if p < mps.oc_index:
            m = a.reshape(Dl * d, Dr)
            worst = max(worst, np.abs(m.conj().T @ m - np.eye(Dr)).max())
        elif p > mps.oc_index:
            m = a.reshape(Dl, d * Dr)
            worst = max(worst, np.abs(m @ m.conj().T - np.eye(Dl)).max())
    return float(worst)


def _transfer(env: np.ndarray, a: np.ndarray, op: np.ndarray | None = None) -> np.ndarray:
    """Left environment (``[..., bra, ket]``) pushed through site ``a``."""
    ket = a if op is None else np.einsum("st,atb->asb", op, a)
    Dl, d, Dr = a.shape
    x = env @ ket.reshape(Dl, d * Dr)
    x = x.reshape(*env.shape[:-2], Dl * d, Dr)
    return a.conj().reshape(Dl * d, Dr).T @ x


def _right_envs(sites: list[np.ndarray]) -> list[np.ndarray]:
    """``envs[p]``: contraction of all sites right of ``p`` (``[bra, ket]``)."""
    envs = [None] * len(sites)
    env = np.ones((1, 1), dtype=complex)
    for p in range(len(sites) - 1, -1, -1):
        envs[p] = env
        a = sites[p]
        env = np.einsum("asc,bsd,cd->ab", a.conj(), a, env)
    return envs


def norm_squared(mps: TimeBinMPS) -> float:
    env = np.ones((1, 1), dtype=complex)
    for a in mps.sites:
        env = _transfer(env, a)
    return float(env[0, 0].real)


def expect_bins(mps: TimeBinMPS, op: np.ndarray) -> np.ndarray:
    """``<op>`` on every bin, in bin order; no canonical form assumed."""
    renvs = _right_envs(mps.sites)
    env = np.ones((1, 1), dtype=complex)
    out = []
    for p, a in enumerate(mps.sites):
        if p != mps.tls_index:
            out.append(np.sum(_transfer(env, a, op) * renvs[p]).real)
        env = _transfer(env, a)
    return np.array(out) / norm_squared(mps)


def amplitude(mps: TimeBinMPS, occupations, tls: int = 0) -> complex:
    """Coefficient of one Fock configuration of the bins (in bin order)."""
    occupations = list(occupations)
    vec = np.ones(1, dtype=complex)
    it = iter(occupations)
    for p, a in enumerate(mps.sites):
        s = tls if p == mps.tls_index else next(it)
        vec = vec @ a[:, s, :]
    return complex(vec[0])


def measure_tls_population(mps: TimeBinMPS) -> float:
    p = mps.tls_index
    if mps.oc_index != p:
        mps = mps.copy()
        move_oc(mps, p)
    a = mps.sites[p]
    return float(np.sum(np.abs(a[:, 1, :]) ** 2).real / np.sum(np.abs(a) ** 2))


def _local_bin(mps: TimeBinMPS, k: int, op: np.ndarray) -> float:
    p = mps.bin_position(k)
    move_oc(mps, p)
    a = mps.sites[p]
    return float(np.einsum("asb,st,atb->", a.conj(), op, a).real / np.vdot(a, a).real)


def measure_flux(mps: TimeBinMPS, k: int) -> float:
    """``<dB^dag dB> / dt^2`` on bin ``k``; moves the orthogonality center."""
    d = mps.sites[mps.bin_position(k)].shape[1]
    return _local_bin(mps, k, number(d)) / mps.dt


def measure_nTT(mps: TimeBinMPS, k: int) -> float:
    """``<dB^dag^2 dB^2> / dt^4`` on bin ``k``; moves the orthogonality center."""
    d = mps.sites[mps.bin_position(k)].shape[1]
    n = number(d)
    return _local_bin(mps, k, n @ (n - np.eye(d))) / mps.dt**2


# --- evolution ---------------------------------------------------------------

def interaction_step_unitary(gamma: float, dt: float, d: int = D_BIN) -> np.ndarray:
    """``exp(-i sqrt(gamma) (s+ dB + s- dB^dag))`` on ``TLS (x) bin``.

    Index order is ``2 * d``: ``(g, 0..d-1), (e, 0..d-1)``. Each sector
    ``{|e,n>, |g,n+1>}`` is a rotation by ``sqrt(gamma dt (n+1))``; the top
    state ``|e, d-1>`` has no partner inside the truncation.
    """
    if gamma * dt > 0.1:
        warnings.warn(f"gamma*dt = {gamma * dt:g} is large for a first-order scheme", stacklevel=2)
    u = np.zeros((2 * d, 2 * d), dtype=complex)
    u[0, 0] = 1.0
    u[d + d - 1, d + d - 1] = 1.0
    for n in range(d - 1):
        e, g = d + n, n + 1
        th = math.sqrt(gamma * dt * (n + 1))
        u[e, e] = u[g, g] = math.cos(th)
        u[e, g] = u[g, e] = -1j * math.sin(th)
    return u


def _truncate(s: np.ndarray, cutoff: float, max_bond: int) -> tuple[int, float]:
    """Number of singular values kept and the squared weight discarded."""
    w = s**2
    tail = np.cumsum(w[::-1])[::-1]  # tail[i] = sum_{j >= i} w_j
    keep = int(np.count_nonzero(tail > cutoff)) if cutoff > 0 else int(np.count_nonzero(s))
    keep = max(keep, 1)
    # never split a degenerate pair
    while keep < len(s) and abs(s[keep] - s[keep - 1]) <= 1e-12 * s[0]:
        keep += 1
    if keep > max_bond:
        lost = float(w[max_bond:].sum())
        if lost > 1e-6:
            raise TruncationError(f"bond dimension {keep} exceeds max_bond={max_bond} "
                                  f"(would discard {lost:.2e}); raise the cap")
        keep = max_bond
    return keep, float(w[keep:].sum())


@dataclass
class EvolutionResult:
    state: TimeBinMPS
    series: ObservableSeries
    tls_edges: np.ndarray
    photons: np.ndarray
    norm_history: np.ndarray
    discarded_weight: float
    max_bond_used: int = 0
    extra: dict = field(default_factory=dict)


def evolve(mps: TimeBinMPS, p: EvolutionParams, n_steps: int | None = None) -> EvolutionResult:
    """Sweep the TLS through the incoming bins, one interaction per bin.

    At step ``k`` the TLS and bin ``k`` are merged, rotated by the step
    unitary and split again with the bin placed left of the TLS, which keeps
    the orthogonality center on the TLS next to the following bin.
    """
    if abs(p.dt - mps.dt) > 1e-12 * mps.dt:
        raise ValueError(f"evolution dt {p.dt} differs from the state's bin width {mps.dt}")
    mps = mps.copy()
    start = mps.tls_index
    if mps.oc_index not in (start, start + 1):
        move_oc(mps, start + 1)
    steps = mps.n_bins - start if n_steps is None else n_steps
    if n_steps is None and p.n_steps is not None:
        steps = p.n_steps
    if steps > mps.n_bins - start:
        raise ValueError("more steps requested than incoming bins")

    d = mps.sites[start + 1].shape[1]
    u = interaction_step_unitary(p.gamma, p.dt, d)
    nop = number(d)
    nn = np.diag(nop @ (nop - np.eye(d)))
    nd = np.diag(nop)

    n_in = np.empty(steps)
    n_t = np.empty(steps)
    n_tt = np.empty(steps)
    tls = np.empty(steps + 1)
    norms = np.empty(steps)
    tls[0] = measure_tls_population(mps)
    max_chi = max(mps.bond_dims) if mps.bond_dims else 1

    for k in range(steps):
        q = mps.tls_index
        theta = np.tensordot(mps.sites[q], mps.sites[q + 1], axes=(2, 0))  # a s n c
        Dl, _, _, Dr = theta.shape
        n_in[k] = np.einsum("asnc,n->", np.abs(theta) ** 2, nd).real
        theta = np.einsum("xy,ayc->axc", u, theta.reshape(Dl, 2 * d, Dr)).reshape(Dl, 2, d, Dr)
        w = np.abs(theta) ** 2
        norms[k] = w.sum()
        n_t[k] = np.einsum("asnc,n->", w, nd)
        n_tt[k] = np.einsum("asnc,n->", w, nn)
        tls[k + 1] = w[:, 1].sum() / norms[k]

        mat = theta.transpose(0, 2, 1, 3).reshape(Dl * d, 2 * Dr)
        uu, s, vh = np.linalg.svd(mat, full_matrices=False)
        chi, lost = _truncate(s, p.svd_cutoff, p.max_bond)
        mps.discarded_weight += lost
        mps.sites[q] = uu[:, :chi].reshape(Dl, d, chi)
        mps.sites[q + 1] = (s[:chi, None] * vh[:chi]).reshape(chi, 2, Dr)
        mps.tls_index = mps.oc_index = q + 1
        max_chi = max(max_chi, chi)

    dt = p.dt
    t_mid = mps.t0 + (start + np.arange(steps) + 0.5) * dt
    n_in, n_t = n_in / norms / dt, n_t / norms / dt
    n_tt = n_tt / norms / dt**2
    # bins not yet reached keep their input occupation
    photons = np.cumsum(n_t) * dt + (np.sum(n_in) - np.cumsum(n_in)) * dt
    series = ObservableSeries(t=t_mid, n_in=n_in, n_tls=0.5 * (tls[:-1] + tls[1:]), n_t=n_t, n_tt=n_tt)
    return EvolutionResult(state=mps, series=series, tls_edges=tls, photons=photons,
                           norm_history=norms, discarded_weight=mps.discarded_weight,
                           max_bond_used=max_chi)


# --- two-time correlations ---------------------------------------------------

def _rows_sweep(sites, renvs, rows, cols_mask, op1, op2, first, last):
    """Off-diagonal correlator ``<op1_i op2_j>`` for ``i`` in ``rows``, ``j > i``.

    Left environments are identities (all bins left-canonical).
    """
    n = len(sites)
    out = np.zeros((len(rows), n), dtype=complex)
    row_pos = {r: i for i, r in enumerate(rows)}
    active: list[int] = []
    env = None
    for j in range(first, last + 1):
        a = sites[j]
        if active:
            if cols_mask[j]:
                closed = _transfer(env, a, op2)
                out[active, j] = np.sum(closed * renvs[j], axis=(1, 2))
            env = _transfer(env, a)
        if j in row_pos:
            Dl = a.shape[0]
            new = _transfer(np.eye(Dl, dtype=complex)[None], a, op1)
            env = new if env is None else np.concatenate([env, new], axis=0)
            active.append(row_pos[j])
    return out


def two_time_correlation(mps: TimeBinMPS, kind: str = "G2", stride: int = 1,
                         window: tuple[float, float] | None = None, threads: int = 1) -> CorrelationMap:
    """G1 or G2 of the output field, evaluated on the fully scattered chain.

    Parameters
    ----------
    kind : {"G1", "G2"}
    stride : int
        Evaluate every ``stride``-th bin in each time argument.
    window : (float, float), optional
        Restrict both time arguments to this range of bin midpoints.
    threads : int
        Row blocks evaluated concurrently on the frozen chain.
    """
    if kind not in ("G1", "G2"):
        raise ValueError("kind must be 'G1' or 'G2'")
    if mps.tls_index != mps.n_bins:
        raise ValueError("evolution has not swept every bin; correlations undefined")
    mps = mps.copy()
    move_oc(mps, mps.tls_index)
    sites = mps.sites[:-1]
    m = len(sites)
    tmid = mps.t0 + (np.arange(m) + 0.5) * mps.dt
    sel = np.arange(0, m, stride)
    if window is not None:
        lo, hi = window
        if lo < mps.t0 - 1e-12 or hi > mps.t0 + m * mps.dt + 1e-12:
            raise ValueError(f"requested window {window} outside simulated range")
        sel = sel[(tmid[sel] >= lo) & (tmid[sel] <= hi)]
    if sel.size == 0:
        raise ValueError("no bins selected")

    d = sites[0].shape[1]
    ad = annihilation(d)
    nop = number(d)
    if kind == "G2":
        op1, op2, diag_op, scale = nop, nop, nop @ (nop - np.eye(d)), mps.dt**2
    else:
        op1, op2, diag_op, scale = ad.T, ad, nop, mps.dt

    renvs = _right_envs(mps.sites)
    cols = np.zeros(m, dtype=bool)
    cols[sel] = True
    blocks = np.array_split(sel, max(1, min(threads, len(sel))))

    def run(block):
        if len(block) == 0:
            return block, np.zeros((0, m), dtype=complex)
        return block, _rows_sweep(sites, renvs, list(block), cols, op1, op2, int(block[0]), int(sel[-1]))

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, blocks))
    else:
        results = [run(b) for b in blocks]

    full = np.zeros((len(sel), m), dtype=complex)
    for block, vals in results:
        idx = np.searchsorted(sel, block)
        full[idx] = vals
    g = full[:, sel]
    for r, j in enumerate(sel):
        eye = np.eye(sites[j].shape[0], dtype=complex)
        g[r, r] = np.sum(_transfer(eye, sites[j], diag_op) * renvs[j])
    upper = np.triu(g, 1)
    g = upper + np.diag(np.diag(g)) + (upper.T if kind == "G2" else upper.conj().T)
    g = g / scale
    if kind == "G2":
        g = g.real
    return CorrelationMap(t=tmid[sel], values=g, kind=kind)
