"""Randomized benchmarking on the simulated device: standard, interleaved
and simultaneous single-qubit variants, decay fitting, and fidelity
extraction.

Single-qubit Clifford layers are applied as ideal unitaries followed by a
decoherence idle of ``single_qubit_duration``; the idle keeps the static ZZ
phase, so correlated-error physics survives in the reference decay. The
entangling cZ is either ideal (instantaneous) or a fully simulated compiled
gate channel.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .cliffords import (
    CZ,
    ISWAP,
    canonical_key,
    single_qubit_cliffords,
    two_qubit_clifford_group,
)
from .device import Device
from .dynamics import label_index, static_channel, unitary_channel
from .gates import (
    GateSpec,
    embed_computational,
    gate_channel,
    _frame_diagonal,
)


class NonConvergenceError(RuntimeError):
    """Decay fit failed or hit the parameter boundary."""


class SignalDomainError(ValueError):
    """(S - C)/A is not positive; cannot invert the decay law."""


@dataclass(frozen=True)
class RBConfig:
    lengths: tuple[int, ...]
    sequences_per_length: int
    seed: int
    interleaved_gate: GateSpec | None = None
    single_qubit_duration: float = 25e-9

    def __post_init__(self):
        ls = list(self.lengths)
        if ls != sorted(ls) or min(ls) < 1:
            raise ValueError("lengths must be ascending and >= 1")
        object.__setattr__(self, "lengths", tuple(ls))


@dataclass
class RBResult:
    lengths: np.ndarray
    mean_survival: np.ndarray
    sem: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["length", "mean", "sem"])
            for n, m, s in zip(self.lengths, self.mean_survival, self.sem):
                w.writerow([int(n), repr(float(m)), repr(float(s))])


@dataclass
class DecayFit:
    a: float
    p: float
    c: float
    covariance: np.ndarray
    residual_rms: float


def _ideal_gate_unitary(kind: str) -> np.ndarray:
    if kind in ("pswap_cz", "swapfree_cz"):
        return CZ
    if kind == "iswap":
        return ISWAP
    return np.eye(4, dtype=complex)


class _RBEngine:
    """Caches the embedded layer unitaries and noise channels."""

    def __init__(self, device: Device, config: RBConfig, native_cz: GateSpec | None,
                 interleaved_channel: np.ndarray | None):
        self.group = two_qubit_clifford_group()
        self.device = device
        self.config = config
        levels = device.levels
        self.d = levels**2
        self.gg = label_index("gg", levels)
        self._embed_cache: dict[bytes, np.ndarray] = {}

        # frame-corrected decoherence idle for one single-qubit layer
        tau = config.single_qubit_duration
        self.idle = self._framed_static(tau) if tau > 0 else None

        if native_cz is None:
            self.cz_channel = None  # ideal, applied as a unitary
            self.cz_unitary = embed_computational(CZ, levels)
        else:
            self.cz_channel = gate_channel(device, native_cz, device.decoherence)
            self.cz_unitary = None

        self.interleaved_channel = interleaved_channel
        if config.interleaved_gate is not None and interleaved_channel is None:
            self.interleaved_channel = gate_channel(
                device, config.interleaved_gate, device.decoherence
            )
        self.interleaved_ideal = (
            None
            if config.interleaved_gate is None and interleaved_channel is None
            else _ideal_gate_unitary(
                config.interleaved_gate.kind
                if config.interleaved_gate is not None
                else "pswap_cz"
            )
        )

    def _framed_static(self, duration: float) -> np.ndarray:
        ch = static_channel(
            self.device.params,
            self.device.phi_s,
            self.device.decoherence,
            self.device.hilbert,
            self.device.sim,
            duration,
        )
        w = np.diag(_frame_diagonal(self.device, duration))
        return unitary_channel(w) @ ch

    def embed(self, u4: np.ndarray) -> np.ndarray:
        key = u4.tobytes()
        if key not in self._embed_cache:
            self._embed_cache[key] = embed_computational(u4, self.device.levels)
        return self._embed_cache[key]

    def apply_layers(self, rho: np.ndarray, decomposition) -> np.ndarray:
        for layer in decomposition:
            if isinstance(layer, str):
                if self.cz_channel is not None:
                    rho = (self.cz_channel @ rho.reshape(-1)).reshape(rho.shape)
                else:
                    rho = self.cz_unitary @ rho @ self.cz_unitary.conj().T
            else:
                u = self.embed(layer)
                rho = u @ rho @ u.conj().T
                if self.idle is not None:
                    rho = (self.idle @ rho.reshape(-1)).reshape(rho.shape)
        return rho

    def run_sequence(self, rng, length: int,
                     extra_channel=None) -> float:
        g = self.group
        rho = np.zeros((self.d, self.d), dtype=complex)
        rho[self.gg, self.gg] = 1.0
        total = g.lookup(np.eye(4))
        for _ in range(length):
            idx = g.sample(rng)
            rho = self.apply_layers(rho, g.element(idx).decomposition)
            if extra_channel is not None:
                rho = (extra_channel @ rho.reshape(-1)).reshape(rho.shape)
            total = g.compose(idx, total)
            if self.interleaved_channel is not None:
                rho = (self.interleaved_channel @ rho.reshape(-1)).reshape(
                    rho.shape
                )
                total = g.compose(g.lookup(self.interleaved_ideal), total)
        recovery = g.inverse(total)
        rho = self.apply_layers(rho, g.element(recovery).decomposition)
        if extra_channel is not None:
            rho = (extra_channel @ rho.reshape(-1)).reshape(rho.shape)
        return float(rho[self.gg, self.gg].real)


def run_rb(
    device: Device,
    config: RBConfig,
    native_cz: GateSpec | None = None,
    interleaved_channel: np.ndarray | None = None,
    extra_channel_per_clifford: np.ndarray | None = None,
) -> RBResult:
    """Survival of |gg> vs sequence length; deterministic given the seed.

    ``native_cz`` selects the compiled gate used for the cZ steps inside
    Clifford decompositions (ideal when None). ``interleaved_channel``
    overrides the channel built from config.interleaved_gate (used to
    benchmark synthetic channels). ``extra_channel_per_clifford`` injects a
    noise channel after every Clifford (testing hook).
    """
    engine = _RBEngine(device, config, native_cz, interleaved_channel)
    means, sems = [], []
    for li, length in enumerate(config.lengths):
        vals = []
        for si in range(config.sequences_per_length):
            rng = np.random.default_rng((config.seed, li, si))
            vals.append(
                engine.run_sequence(rng, length, extra_channel_per_clifford)
            )
        vals = np.array(vals)
        means.append(vals.mean())
        sems.append(vals.std(ddof=1) / math.sqrt(len(vals)) if len(vals) > 1
                    else 0.0)
    return RBResult(np.array(config.lengths), np.array(means), np.array(sems))


def run_single_qubit_rb(
    device: Device, config: RBConfig, qubits: str = "both"
) -> RBResult:
    """Simultaneous (or individual) single-qubit RB; survival of |gg>.

    ``qubits``: "L", "R", or "both" (independent Cliffords on each).
    """
    engine = _RBEngine(device, config, None, None)
    singles = single_qubit_cliffords()
    eye = np.eye(2, dtype=complex)
    index = {canonical_key(u): i for i, u in enumerate(singles)}

    def lookup1(u):
        return index[canonical_key(u)]

    means, sems = [], []
    for li, length in enumerate(config.lengths):
        vals = []
        for si in range(config.sequences_per_length):
            rng = np.random.default_rng((config.seed, li, si))
            rho = np.zeros((engine.d, engine.d), dtype=complex)
            rho[engine.gg, engine.gg] = 1.0
            tot_l = np.eye(2, dtype=complex)
            tot_r = np.eye(2, dtype=complex)
            for _ in range(length):
                ul = singles[int(rng.integers(24))] if qubits in ("L", "both") else eye
                ur = singles[int(rng.integers(24))] if qubits in ("R", "both") else eye
                tot_l, tot_r = ul @ tot_l, ur @ tot_r
                rho = engine.apply_layers(rho, (np.kron(ul, ur),))
            rec = np.kron(
                singles[lookup1(tot_l.conj().T)],
                singles[lookup1(tot_r.conj().T)],
            )
            rho = engine.apply_layers(rho, (rec,))
            vals.append(float(rho[engine.gg, engine.gg].real))
        vals = np.array(vals)
        means.append(vals.mean())
        sems.append(vals.std(ddof=1) / math.sqrt(len(vals)) if len(vals) > 1
                    else 0.0)
    return RBResult(np.array(config.lengths), np.array(means), np.array(sems))


def fit_decay(data) -> DecayFit:
    """Nonlinear least squares of S = A P^N + C, P constrained to (0, 1).

    ``data`` is an RBResult or a (lengths, means) pair.
    """
    if isinstance(data, RBResult):
        lengths, means = data.lengths, data.mean_survival
    else:
        lengths, means = data
    lengths = np.asarray(lengths, dtype=float)
    means = np.asarray(means, dtype=float)
    if len(np.unique(lengths)) < 4:
        raise ValueError("need at least 4 distinct lengths")

    def model(n, a, p, c):
        return a * p**n + c

    s_inf = means[-1]
    p0 = [means[0] - s_inf, 0.99, s_inf]
    eps = 1e-12
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            popt, pcov = curve_fit(
                model,
                lengths,
                means,
                p0=p0,
                bounds=([-np.inf, eps, -np.inf], [np.inf, 1.0 - eps, np.inf]),
                maxfev=10000,
            )
    except (RuntimeError, ValueError) as exc:
        raise NonConvergenceError(str(exc)) from exc
    a, p, c = popt
    if p <= 2 * eps or p >= 1.0 - 2 * eps or abs(a) < 1e-6:
        raise NonConvergenceError("decay fit degenerate (P at boundary)")
    residual = means - model(lengths, *popt)
    return DecayFit(
        a=float(a),
        p=float(p),
        c=float(c),
        covariance=pcov,
        residual_rms=float(np.sqrt(np.mean(residual**2))),
    )


def interleaved_fidelity(p_ref: float, p_int: float, n_qubits: int = 2) -> float:
    """F = 1 - (1 - P_int/P_ref) (2^n - 1)/2^n."""
    if p_int > p_ref:
        warnings.warn("interleaved decay slower than reference (P_int > P_ref)")
    dim_factor = (2**n_qubits - 1) / 2**n_qubits
    return 1.0 - (1.0 - p_int / p_ref) * dim_factor


def signal_to_p(s: float, fit: DecayFit, n_gates: int) -> float:
    """Invert the decay law: P = ((S - C)/A)^(1/N)."""
    x = (s - fit.c) / fit.a
    if x <= 0:
        raise SignalDomainError("(S - C)/A must be positive")
    return float(x ** (1.0 / n_gates))


def depolarizing_channel(p: float, d: int) -> np.ndarray:
    """rho -> (1-p) rho + p I/d on the full space (testing stub)."""
    dd = d * d
    eye_vec = np.eye(d, dtype=complex).reshape(-1)
    # Tr(rho) = <vec(I), vec(rho)>
    return (1.0 - p) * np.eye(dd, dtype=complex) + (
        p / d
    ) * np.outer(eye_vec, eye_vec.conj())
