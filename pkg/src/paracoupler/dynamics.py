"""Hamiltonian construction and open-system time evolution of the truncated
two-transmon system under flux modulation.

The model is two Duffing oscillators whose frequencies, anharmonicities and
exchange coupling follow the instantaneous flux phi(t) through the circuit
module's closed forms. Evolution is fixed-step RK4 on either the Schrodinger
equation (pure inputs, no decoherence) or the Lindblad master equation, with
the inner loops in numba (see _kernels).

Frames:
  lab            full model, counter-rotating terms kept by default
  rwa_two_level  the idealized parametric-exchange frame
                 H = Delta_p n_R + g_p(t) (q_L q_R^dag + h.c.), with
                 Delta_p = omega_p - (omega_R - omega_L) at the static bias
                 and g_p(t) from the coupling slope times the tone envelope
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import _kernels
from .circuit import (
    CircuitParams,
    anharmonicity,
    coupling_slope,
    static_couplings,
    transmon_frequency,
)
from .pulses import PulseSchedule, envelope_value, flux_waveform

TWO_PI = 2.0 * math.pi

# integrate in chunks to bound the coefficient-table memory
_CHUNK_STEPS = 200_000

_LEVEL_LETTERS = "gefh"


class StepTooLargeError(ValueError):
    """Integration step does not resolve the fastest qubit frequency."""


class AssignmentAmbiguityError(RuntimeError):
    """Two bare states claim the same dressed eigenvector."""


class NonUnitaryError(ValueError):
    """Operator passed to apply_unitary is not unitary."""


def level_label(n: int) -> str:
    return _LEVEL_LETTERS[n] if n < len(_LEVEL_LETTERS) else str(n)


def basis_labels(levels: int) -> list[str]:
    return [
        level_label(nl) + level_label(nr)
        for nl in range(levels)
        for nr in range(levels)
    ]


def label_index(label: str, levels: int) -> int:
    nl = _LEVEL_LETTERS.index(label[0])
    nr = _LEVEL_LETTERS.index(label[1])
    if nl >= levels or nr >= levels:
        raise ValueError(f"label {label!r} outside {levels} levels")
    return nl * levels + nr


@dataclass(frozen=True)
class HilbertConfig:
    levels_per_transmon: int = 4
    frame: str = "lab"

    def __post_init__(self):
        if self.levels_per_transmon < 2:
            raise ValueError("need at least two levels per transmon")
        if self.frame not in ("lab", "rwa_two_level"):
            raise ValueError(f"unknown frame {self.frame!r}")

    @property
    def dim(self) -> int:
        return self.levels_per_transmon**2


@dataclass(frozen=True)
class DecoherenceParams:
    """Per-qubit T1/T2 (seconds); pure dephasing 1/T_phi = 1/T2 - 1/(2 T1)."""

    t1: tuple[float, float]
    t2: tuple[float, float]

    def __post_init__(self):
        for t1, t2 in zip(self.t1, self.t2):
            if t1 <= 0 or t2 <= 0:
                raise ValueError("T1 and T2 must be positive")
            if t2 > 2.0 * t1 * (1.0 + 1e-12):
                raise ValueError("T2 cannot exceed 2*T1")

    def pure_dephasing_rates(self) -> tuple[float, float]:
        return tuple(
            max(1.0 / t2 - 0.5 / t1, 0.0) for t1, t2 in zip(self.t1, self.t2)
        )


@dataclass(frozen=True)
class SimOptions:
    step: float = 2e-12
    direct_drive_coupling: tuple[float, float] = (0.0, 0.0)
    residual_nonlinear_zz: float = 0.0
    counter_rotating: bool = True

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")


@dataclass
class DensityState:
    """Density matrix over the |n_L, n_R> product basis."""

    matrix: np.ndarray
    levels: int

    @property
    def labels(self) -> list[str]:
        return basis_labels(self.levels)

    @classmethod
    def from_label(cls, label: str, levels: int) -> "DensityState":
        d = levels**2
        m = np.zeros((d, d), dtype=complex)
        m[label_index(label, levels)][label_index(label, levels)] = 1.0
        return cls(m, levels)

    @classmethod
    def from_statevector(cls, psi: np.ndarray, levels: int) -> "DensityState":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()), levels)

    def population(self, label: str) -> float:
        return float(self.matrix[label_index(label, self.levels)][
            label_index(label, self.levels)
        ].real)

    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)

    def as_statevector(self, tol: float = 1e-9) -> np.ndarray:
        """Return the pure state when the matrix is rank one, else raise."""
        vals, vecs = np.linalg.eigh(self.matrix)
        if vals[-2] > tol:
            raise ValueError("state is not pure")
        return vecs[:, -1]

    def validate(self) -> None:
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > 1e-10:
            raise ValueError("density matrix not Hermitian")
        if abs(np.trace(m).real - 1.0) > 1e-9:
            raise ValueError("density matrix trace != 1")
        if np.linalg.eigvalsh(m).min() < -1e-9:
            raise ValueError("density matrix not positive semidefinite")


@dataclass
class Trajectory:
    times: np.ndarray
    states: list[DensityState]

    @property
    def final(self) -> DensityState:
        return self.states[-1]

    @property
    def labels(self) -> list[str]:
        return self.states[0].labels

    def populations(self) -> np.ndarray:
        return np.array(
            [np.diag(s.matrix).real for s in self.states]
        )

    def to_csv(self, path) -> None:
        pops = self.populations()
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["t"] + [f"p_{lab}" for lab in self.labels])
            for t, row in zip(self.times, pops):
                w.writerow([repr(float(t))] + [repr(float(p)) for p in row])


def destroy(levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, levels)), k=1).astype(complex)


def _mode_operators(levels: int):
    a = destroy(levels)
    eye = np.eye(levels, dtype=complex)
    a_l = np.kron(a, eye)
    a_r = np.kron(eye, a)
    return a_l, a_r


def _lab_terms(params: CircuitParams, cfg: HilbertConfig, opts: SimOptions):
    """Operator stack and coefficient table builder for the lab frame."""
    a_l, a_r = _mode_operators(cfg.levels_per_transmon)
    n_l = a_l.conj().T @ a_l
    n_r = a_r.conj().T @ a_r
    k_l = a_l.conj().T @ a_l.conj().T @ a_l @ a_l
    k_r = a_r.conj().T @ a_r.conj().T @ a_r @ a_r
    exchange = a_l @ a_r.conj().T + a_l.conj().T @ a_r
    ops = [n_l, n_r, k_l, k_r, exchange]
    if opts.counter_rotating:
        ops.append(a_l.conj().T @ a_r.conj().T + a_l @ a_r)
    if opts.residual_nonlinear_zz != 0.0:
        p_ee = np.zeros((cfg.dim, cfg.dim), dtype=complex)
        i_ee = label_index("ee", cfg.levels_per_transmon)
        p_ee[i_ee, i_ee] = 1.0
        ops.append(p_ee)
    ddc = opts.direct_drive_coupling
    if ddc[0] != 0.0:
        ops.append(a_l + a_l.conj().T)
    if ddc[1] != 0.0:
        ops.append(a_r + a_r.conj().T)
    ops = np.ascontiguousarray(np.array(ops))

    def coeffs(schedule: PulseSchedule, times: np.ndarray) -> np.ndarray:
        phi = flux_waveform(schedule.phi_s, schedule.tones, times)
        cols = [
            transmon_frequency(params, "L", phi),
            transmon_frequency(params, "R", phi),
            0.5 * anharmonicity(params, "L", phi),
            0.5 * anharmonicity(params, "R", phi),
            static_couplings(params, phi)[2],
        ]
        if opts.counter_rotating:
            cols.append(cols[4])
        if opts.residual_nonlinear_zz != 0.0:
            cols.append(np.full_like(phi, opts.residual_nonlinear_zz))
        ac = None
        if ddc[0] != 0.0 or ddc[1] != 0.0:
            ac = phi - schedule.phi_s
        if ddc[0] != 0.0:
            cols.append(ddc[0] * ac)
        if ddc[1] != 0.0:
            cols.append(ddc[1] * ac)
        return np.ascontiguousarray(np.column_stack(cols))

    return ops, coeffs


def _rwa_terms(params: CircuitParams, cfg: HilbertConfig, opts: SimOptions):
    """Operator stack for the idealized parametric-exchange frame."""
    a_l, a_r = _mode_operators(cfg.levels_per_transmon)
    n_r = a_r.conj().T @ a_r
    exchange = a_l @ a_r.conj().T + a_l.conj().T @ a_r
    ops = np.ascontiguousarray(np.array([n_r, exchange]))

    def coeffs(schedule: PulseSchedule, times: np.ndarray) -> np.ndarray:
        phi_s = schedule.phi_s
        g_amp = np.zeros_like(times)
        for tone in schedule.tones:
            g_amp = g_amp + tone.amplitude * envelope_value(
                tone.envelope, times - tone.start
            )
        slope = abs(coupling_slope(params, phi_s))
        g_p = 0.5 * slope * g_amp
        if schedule.tones:
            delta_bare = transmon_frequency(params, "R", phi_s) - transmon_frequency(
                params, "L", phi_s
            )
            detuning = schedule.tones[0].omega_p - delta_bare
        else:
            detuning = 0.0
        return np.ascontiguousarray(
            np.column_stack([np.full_like(times, detuning), g_p])
        )

    return ops, coeffs


def _terms(params, cfg, opts):
    if cfg.frame == "lab":
        return _lab_terms(params, cfg, opts)
    return _rwa_terms(params, cfg, opts)


def build_hamiltonian(
    params: CircuitParams, phi, cfg: HilbertConfig, opts: SimOptions = SimOptions()
) -> np.ndarray:
    """Static Hamiltonian (rad/s) at a fixed flux bias."""
    phi = getattr(phi, "phi", phi)
    ops, coeffs = _terms(params, cfg, opts)
    c = coeffs(PulseSchedule(phi_s=phi), np.array([0.0]))
    return np.tensordot(c[0], ops, axes=1)


def _collapse_operators(dec: DecoherenceParams | None, levels: int) -> list[np.ndarray]:
    """Pre-scaled collapse operators B = sqrt(rate) L."""
    if dec is None:
        return []
    a_l, a_r = _mode_operators(levels)
    out = []
    for k, a in enumerate((a_l, a_r)):
        g1 = 1.0 / dec.t1[k]
        if g1 > 0:
            out.append(math.sqrt(g1) * a)
        gphi = dec.pure_dephasing_rates()[k]
        if gphi > 0:
            out.append(math.sqrt(2.0 * gphi) * (a.conj().T @ a))
    return out


def _check_step(params, cfg, opts, schedule, step):
    if cfg.frame != "lab":
        return
    amp = sum(t.amplitude for t in schedule.tones)
    phis = [schedule.phi_s, schedule.phi_s - amp, schedule.phi_s + amp]
    fmax = max(
        transmon_frequency(params, k, p) for k in ("L", "R") for p in phis
    ) / TWO_PI
    if step > 1.0 / (20.0 * fmax):
        raise StepTooLargeError(
            f"step {step:g} s does not resolve {fmax / 1e9:.2f} GHz"
        )


def _segment_counts(duration, record_times, step):
    """Snap record times onto the step grid; return cumulative step counts."""
    if record_times is None:
        record_times = [duration]
    counts = sorted({int(round(t / step)) for t in record_times if t > 0})
    total = int(round(duration / step))
    if not counts or counts[-1] != total:
        counts.append(total)
    return [0] + sorted(set(counts))


def _is_pure(matrix, tol=1e-12):
    tr2 = np.trace(matrix @ matrix).real
    return abs(tr2 - 1.0) < 1e-9


def evolve(
    initial: DensityState,
    params: CircuitParams,
    schedule: PulseSchedule,
    dec: DecoherenceParams | None,
    cfg: HilbertConfig,
    opts: SimOptions,
    duration: float,
    record_times=None,
) -> Trajectory:
    """Deterministic fixed-step RK4 evolution; returns the state at t=0 and
    at each (grid-snapped) record time, ending at ``duration``."""
    step = opts.step
    _check_step(params, cfg, opts, schedule, step)
    ops, coeff_fn = _terms(params, cfg, opts)
    levels = cfg.levels_per_transmon
    cops = _collapse_operators(dec, levels)

    pure = not cops and _is_pure(initial.matrix)
    counts = _segment_counts(duration, record_times, step)

    times = [0.0]
    states = [DensityState(initial.matrix.copy(), levels)]
    if pure:
        psi = initial.as_statevector().astype(complex)
    else:
        rho = np.ascontiguousarray(initial.matrix.astype(complex))
        carr = np.array(cops) if cops else np.zeros((0, cfg.dim, cfg.dim), complex)
        cdag = np.ascontiguousarray(carr.conj().transpose(0, 2, 1))
        cdc_half = np.ascontiguousarray(
            0.5 * np.einsum("cij,cjk->cik", cdag, carr)
        )
        carr = np.ascontiguousarray(carr)

    for n0, n1 in zip(counts[:-1], counts[1:]):
        k = n0
        while k < n1:
            n = min(n1 - k, _CHUNK_STEPS)
            grid = (k + 0.5 * np.arange(2 * n + 1)) * step
            c = coeff_fn(schedule, grid)
            if pure:
                psi = _kernels.rk4_state(psi, ops, c, step)
                # RK4 is not norm-preserving; project back to the sphere
                psi /= np.linalg.norm(psi)
            else:
                rho = _kernels.rk4_density(rho, ops, c, carr, cdag, cdc_half, step)
            k += n
        times.append(n1 * step)
        if pure:
            states.append(DensityState(np.outer(psi, psi.conj()), levels))
        else:
            states.append(DensityState(rho.copy(), levels))
    return Trajectory(np.array(times), states)


def propagate_unitary(
    params: CircuitParams,
    schedule: PulseSchedule,
    cfg: HilbertConfig,
    opts: SimOptions,
    duration: float,
) -> np.ndarray:
    """Full-propagator RK4 integration (no decoherence)."""
    step = opts.step
    _check_step(params, cfg, opts, schedule, step)
    ops, coeff_fn = _terms(params, cfg, opts)
    u = np.eye(cfg.dim, dtype=complex)
    total = int(round(duration / step))
    k = 0
    while k < total:
        n = min(total - k, _CHUNK_STEPS)
        grid = (k + 0.5 * np.arange(2 * n + 1)) * step
        c = coeff_fn(schedule, grid)
        u = _kernels.rk4_unitary(u, ops, c, step)
        k += n
    return u


def _super_hamiltonian_parts(ops: np.ndarray) -> np.ndarray:
    """-i (A x I - I x A^T) for each stack operator (row-major vec)."""
    d = ops.shape[1]
    eye = np.eye(d, dtype=complex)
    return np.ascontiguousarray(
        np.array(
            [-1j * (np.kron(a, eye) - np.kron(eye, a.T)) for a in ops]
        )
    )


def _super_dissipator(cops, d: int) -> np.ndarray:
    eye = np.eye(d, dtype=complex)
    out = np.zeros((d * d, d * d), dtype=complex)
    for b in cops:
        bdb = b.conj().T @ b
        out += np.kron(b, b.conj())
        out -= 0.5 * (np.kron(bdb, eye) + np.kron(eye, bdb.T))
    return out


def propagate_channel(
    params: CircuitParams,
    schedule: PulseSchedule,
    dec: DecoherenceParams | None,
    cfg: HilbertConfig,
    opts: SimOptions,
    duration: float,
) -> np.ndarray:
    """Superoperator (d^2 x d^2, row-major vec) of the full evolution."""
    step = opts.step
    _check_step(params, cfg, opts, schedule, step)
    ops, coeff_fn = _terms(params, cfg, opts)
    d = cfg.dim
    sops = _super_hamiltonian_parts(ops)
    m_const = np.ascontiguousarray(
        _super_dissipator(_collapse_operators(dec, cfg.levels_per_transmon), d)
    )
    phi_mat = np.eye(d * d, dtype=complex)
    total = int(round(duration / step))
    k = 0
    # chunk more tightly: the table is only m columns but keep parity
    while k < total:
        n = min(total - k, _CHUNK_STEPS)
        grid = (k + 0.5 * np.arange(2 * n + 1)) * step
        c = coeff_fn(schedule, grid)
        phi_mat = _kernels.rk4_superprop(phi_mat, sops, c, m_const, step)
        k += n
    return phi_mat


def static_channel(
    params: CircuitParams,
    phi,
    dec: DecoherenceParams | None,
    cfg: HilbertConfig,
    opts: SimOptions,
    duration: float,
) -> np.ndarray:
    """Exact idle channel exp(M t) at a fixed flux (used for RB idles)."""
    h = build_hamiltonian(params, phi, cfg, opts)
    d = cfg.dim
    eye = np.eye(d, dtype=complex)
    m = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    m += _super_dissipator(_collapse_operators(dec, cfg.levels_per_transmon), d)
    return expm(m * duration)


def unitary_channel(u: np.ndarray) -> np.ndarray:
    return np.kron(u, u.conj())


def apply_channel(channel: np.ndarray, state: DensityState) -> DensityState:
    d = state.matrix.shape[0]
    vec = channel @ state.matrix.reshape(-1)
    return DensityState(vec.reshape(d, d), state.levels)


@dataclass(frozen=True)
class StaticSpectrum:
    """Dressed eigenvalues with bare-state identification."""

    energies: np.ndarray
    assignment: dict
    omega: tuple[float, float]
    alpha: tuple[float, float]
    zeta: float

    def energy_of(self, label: str) -> float:
        return float(self.energies[self.assignment[label]])

    def transition(self, upper: str, lower: str) -> float:
        return self.energy_of(upper) - self.energy_of(lower)


def diagonalize_static(
    params: CircuitParams,
    phi,
    cfg: HilbertConfig,
    opts: SimOptions = SimOptions(),
) -> StaticSpectrum:
    """Exact diagonalization oracle with max-overlap level identification."""
    if cfg.levels_per_transmon < 3:
        raise ValueError("level identification needs at least 3 levels")
    h = build_hamiltonian(params, phi, cfg, opts)
    vals, vecs = np.linalg.eigh(h)
    labels = basis_labels(cfg.levels_per_transmon)
    assignment = {}
    claimed = {}
    for b, label in enumerate(labels):
        overlaps = np.abs(vecs[b, :]) ** 2
        order = np.argsort(overlaps)
        i = int(order[-1])
        if overlaps[order[-1]] - overlaps[order[-2]] < 1e-12:
            raise AssignmentAmbiguityError(f"ambiguous assignment for |{label}>")
        if i in claimed:
            raise AssignmentAmbiguityError(
                f"|{label}> and |{claimed[i]}> claim the same eigenvector"
            )
        claimed[i] = label
        assignment[label] = i

    e = lambda lab: float(vals[assignment[lab]])
    omega = (e("eg") - e("gg"), e("ge") - e("gg"))
    alpha = (
        e("fg") - 2.0 * e("eg") + e("gg"),
        e("gf") - 2.0 * e("ge") + e("gg"),
    )
    zeta = e("ee") - e("eg") - e("ge") + e("gg")
    return StaticSpectrum(vals, assignment, omega, alpha, zeta)


def apply_unitary(state: DensityState, u: np.ndarray) -> DensityState:
    d = u.shape[0]
    if np.max(np.abs(u.conj().T @ u - np.eye(d))) > 1e-10:
        raise NonUnitaryError("operator is not unitary within 1e-10")
    return DensityState(u @ state.matrix @ u.conj().T, state.levels)


def rwa_rabi(g_p: float, detuning: float, t) -> float:
    """Analytic parametric Rabi transfer probability."""
    omega = math.sqrt(4.0 * g_p**2 + detuning**2)
    if omega == 0.0:
        return 0.0 * np.asarray(t) if np.ndim(t) else 0.0
    amp = 4.0 * g_p**2 / omega**2
    return amp * np.sin(0.5 * omega * np.asarray(t)) ** 2
