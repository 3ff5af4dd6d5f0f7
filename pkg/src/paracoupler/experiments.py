"""Scripted simulated experiments mirroring the measurement suite:
spectroscopy, chevrons, ZZ cancellation, cross-Ramsey, subharmonic scans,
and decoherence-limit curves."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .circuit import DivergenceError, coupling_slope, parametric_strength
from .device import Device
from .dynamics import (
    DecoherenceParams,
    DensityState,
    HilbertConfig,
    SimOptions,
    Trajectory,
    basis_labels,
    evolve,
    label_index,
)
from .pulses import Envelope, PulseSchedule, PumpTone

TWO_PI = 2.0 * math.pi


class FitFailureError(RuntimeError):
    """Oscillation contrast too low to fit a phase."""


class NoRootError(RuntimeError):
    """No cancellation amplitude inside the searched range."""


@dataclass(frozen=True)
class SweepGrid:
    """One or two named linear sweep axes plus an rng seed."""

    axis1: tuple[str, float, float, int]
    axis2: tuple[str, float, float, int] | None = None
    seed: int = 0

    def __post_init__(self):
        for ax in (self.axis1, self.axis2):
            if ax is None:
                continue
            _, start, stop, points = ax
            if points < 2:
                raise ValueError("sweep axis needs at least 2 points")
            if not start < stop:
                raise ValueError("sweep axis needs start < stop")

    @staticmethod
    def _values(axis):
        _, start, stop, points = axis
        return np.linspace(start, stop, points)

    def values1(self) -> np.ndarray:
        return self._values(self.axis1)

    def values2(self) -> np.ndarray:
        if self.axis2 is None:
            raise ValueError("grid has no second axis")
        return self._values(self.axis2)


def zeta_parametric(g_p: float, delta_p: float, alpha_L: float, alpha_R: float):
    """Pump-induced ZZ: the static formula with g_s -> g_p, Delta_s -> Delta_p."""
    from .circuit import zz_static

    return zz_static(g_p, delta_p, alpha_L, alpha_R)


# --------------------------------------------------------------------------
# cross-Ramsey


def _qubit_pi_half(levels: int, qubit: str, beta: float) -> np.ndarray:
    """pi/2 rotation about the axis at angle beta in the qubit's g-e plane,
    embedded in the full product space (identity on the other mode and on
    leakage levels)."""
    r = np.eye(levels, dtype=complex)
    c = 1.0 / math.sqrt(2.0)
    r[0, 0] = c
    r[1, 1] = c
    r[0, 1] = -1j * c * np.exp(-1j * beta)
    r[1, 0] = -1j * c * np.exp(1j * beta)
    eye = np.eye(levels, dtype=complex)
    return np.kron(r, eye) if qubit == "L" else np.kron(eye, r)


def _qubit_pi(levels: int, qubit: str) -> np.ndarray:
    r = np.eye(levels, dtype=complex)
    r[0, 0] = r[1, 1] = 0.0
    r[0, 1] = -1j
    r[1, 0] = -1j
    eye = np.eye(levels, dtype=complex)
    return np.kron(r, eye) if qubit == "L" else np.kron(eye, r)


def _excited_population(rho: np.ndarray, levels: int, qubit: str) -> float:
    pops = np.diag(rho).real.reshape(levels, levels)
    return float(pops[1, :].sum() if qubit == "L" else pops[:, 1].sum())


@dataclass(frozen=True)
class CrossRamseyResult:
    phase: float
    contrast: float
    residual_rms: float


def cross_ramsey(
    device: Device,
    target: str,
    control_prepared: bool,
    delay: float,
    phase_points: int = 24,
    extra_tones=(),
    dec: DecoherenceParams | None = None,
) -> CrossRamseyResult:
    """Swept-phase Ramsey on the target qubit with the control prepared or
    not; the returned phase is referenced to the target's dressed frame.

    The pump tones active during the delay are the device's cancellation
    tone (when set) plus ``extra_tones``.
    """
    if delay <= 0:
        raise ValueError("delay must be positive")
    levels = device.levels
    control = "R" if target == "L" else "L"

    psi = np.zeros(levels**2, dtype=complex)
    psi[label_index("gg", levels)] = 1.0
    if control_prepared:
        psi = _qubit_pi(levels, control) @ psi
    psi = _qubit_pi_half(levels, target, 0.0) @ psi

    tones = list(extra_tones)
    if device.cancellation_tone is not None:
        tone = device.cancellation_tone
        tones.append(
            replace(tone, envelope=Envelope.rectangular(delay), start=0.0)
        )
    schedule = PulseSchedule(phi_s=device.phi_s, tones=tuple(tones))
    traj = evolve(
        DensityState.from_statevector(psi, levels),
        device.params,
        schedule,
        dec,
        device.hilbert,
        device.sim,
        delay,
    )
    rho = traj.final.matrix

    # reference frame: dressed target frequency at the idle bias
    omega_ref = device.dressed().omega[0 if target == "L" else 1]
    betas = np.linspace(0.0, TWO_PI, phase_points, endpoint=False)
    signal = np.empty(phase_points)
    for i, beta in enumerate(betas):
        u = _qubit_pi_half(levels, target, beta + omega_ref * delay)
        signal[i] = _excited_population(u @ rho @ u.conj().T, levels, target)

    # linear least squares on s = a cos(beta) + b sin(beta) + c
    design = np.column_stack([np.cos(betas), np.sin(betas), np.ones_like(betas)])
    (a, b, c), *_ = np.linalg.lstsq(design, signal, rcond=None)
    contrast = 2.0 * math.hypot(a, b)
    if contrast < 0.1:
        raise FitFailureError(f"Ramsey contrast {contrast:.3f} < 0.1")
    residual = signal - design @ np.array([a, b, c])
    # sign convention: control-prepared minus not equals zeta_total * delay
    return CrossRamseyResult(
        phase=math.atan2(-b, a),
        contrast=contrast,
        residual_rms=float(np.sqrt(np.mean(residual**2))),
    )


def cross_ramsey_zz(
    device: Device,
    delay: float,
    extra_tones=(),
    target: str = "L",
    phase_points: int = 24,
) -> float:
    """Total ZZ rate from the control-prepared-minus-not phase difference.

    The phase difference is only unambiguous for |zeta|*delay < pi.
    """
    with_c = cross_ramsey(device, target, True, delay, phase_points, extra_tones)
    without = cross_ramsey(device, target, False, delay, phase_points, extra_tones)
    dphase = (with_c.phase - without.phase + math.pi) % TWO_PI - math.pi
    return dphase / delay


# --------------------------------------------------------------------------
# ZZ cancellation


@dataclass(frozen=True)
class ZZCancellationResult:
    pump_amplitude_star: float
    zeta_total_curve: tuple[tuple[float, float], ...]
    uncertainty: float
    zeta_refined: float


def _cancellation_tone(omega_p: float, amplitude: float, duration: float) -> PumpTone:
    return PumpTone(
        omega_p=omega_p,
        amplitude=amplitude,
        envelope=Envelope.rectangular(duration),
    )


def zz_cancellation_search(
    device: Device,
    omega_p: float,
    amplitude_range: tuple[float, float],
    coarse_points: int = 7,
    coarse_delay: float = 20e-9,
    refine_delay: float = 200e-9,
) -> ZZCancellationResult:
    """Find the pump amplitude nulling the total ZZ.

    Coarse stage: quadratic fit of the measured zeta_total(amplitude) curve;
    refinement: secant iteration on longer-delay cross-Ramsey around the
    fitted root, down to |zeta_total|/2pi < 10 kHz.
    """
    a_lo, a_hi = amplitude_range

    def measure(amplitude: float, delay: float) -> float:
        tones = ()
        if amplitude > 0:
            tones = (_cancellation_tone(omega_p, amplitude, delay),)
        return cross_ramsey_zz(device, delay, tones)

    amps = np.linspace(a_lo, a_hi, coarse_points)
    curve = [(float(a), measure(float(a), coarse_delay)) for a in amps]
    zetas = np.array([z for _, z in curve])

    # zeta_total = zeta_s + K a^2
    design = np.column_stack([np.ones_like(amps), amps**2])
    (zeta_s_fit, k_fit), *_ = np.linalg.lstsq(design, zetas, rcond=None)
    if abs(zeta_s_fit) < TWO_PI * 1e3:
        root = 0.0
    else:
        if zeta_s_fit * k_fit > 0:
            raise NoRootError("pump shifts zeta away from zero")
        root = math.sqrt(-zeta_s_fit / k_fit)
        if not a_lo <= root <= a_hi:
            raise NoRootError(f"cancellation amplitude {root:.4g} outside range")

    # secant refinement at longer delay
    a0, a1 = root, root * 1.02 + 1e-5
    z0 = measure(a0, refine_delay)
    tol = TWO_PI * 10e3
    best_a, best_z = a0, z0
    for _ in range(12):
        if abs(best_z) < 0.5 * tol:
            break
        z1 = measure(a1, refine_delay)
        if abs(z1) < abs(best_z):
            best_a, best_z = a1, z1
        if z1 == z0:
            break
        a2 = a1 - z1 * (a1 - a0) / (z1 - z0)
        a2 = max(a2, 0.0)
        a0, z0, a1 = a1, z1, a2
        if abs(a1 - a0) < 1e-9:
            a1 = a0 * (1 + 1e-4) + 1e-9
    else:
        pass
    if abs(best_z) >= tol:
        raise NoRootError(
            f"refinement stalled at |zeta|/2pi = {abs(best_z) / TWO_PI:.1f} Hz"
        )
    uncertainty = TWO_PI * 5e3
    return ZZCancellationResult(
        pump_amplitude_star=best_a,
        zeta_total_curve=tuple(curve),
        uncertainty=uncertainty,
        zeta_refined=best_z,
    )


# --------------------------------------------------------------------------
# chevrons


@dataclass
class ChevronMap:
    detunings: np.ndarray
    times: np.ndarray
    populations: np.ndarray  # (n_detunings, n_times)
    pump_center: float

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["detuning_rad_s", "t", "population"])
            for i, d in enumerate(self.detunings):
                for j, t in enumerate(self.times):
                    w.writerow(
                        [repr(float(d)), repr(float(t)),
                         repr(float(self.populations[i, j]))]
                    )


def chevron_scan(
    device: Device,
    pump_center: float,
    detuning_span: float,
    time_span: float,
    grid: SweepGrid,
    amplitude: float,
    initial: str = "eg",
    target: str = "ge",
) -> ChevronMap:
    """Target-state population over (pump detuning, time)."""
    detunings = np.linspace(-0.5 * detuning_span, 0.5 * detuning_span,
                            grid.axis1[3])
    n_t = grid.axis2[3] if grid.axis2 is not None else grid.axis1[3]
    times = np.linspace(time_span / n_t, time_span, n_t)
    levels = device.levels
    init = DensityState.from_label(initial, levels)
    pops = np.empty((len(detunings), len(times)))
    for i, d in enumerate(detunings):
        tone = PumpTone(
            omega_p=pump_center + d,
            amplitude=amplitude,
            envelope=Envelope.rectangular(time_span),
        )
        traj = evolve(
            init,
            device.params,
            PulseSchedule(device.phi_s, (tone,)),
            None,
            device.hilbert,
            device.sim,
            time_span,
            record_times=times,
        )
        idx = label_index(target, levels)
        pops[i] = [s.matrix[idx, idx].real for s in traj.states[1:]]
    return ChevronMap(detunings, times, pops, pump_center)


# --------------------------------------------------------------------------
# subharmonics


def subharmonic_scan(
    device: Device,
    n_range,
    amplitude: float,
    scan_halfwidth: float = TWO_PI * 10e6,
    scan_points: int = 9,
    duration: float = 300e-9,
    target: str = "L",
):
    """Direct-drive multi-photon scan: for each integer n, sweep the pump
    around omega_target/n and record the maximum excited-population
    transfer. Requires a nonzero direct_drive_coupling in the device.

    Smooth (hann-edged) turn-on and turn-off so the diabatic switching
    transient does not masquerade as transfer."""
    ddc = device.sim.direct_drive_coupling
    if ddc[0] == 0.0 and ddc[1] == 0.0:
        raise ValueError("subharmonic scan needs direct_drive_coupling > 0")
    levels = device.levels
    omega_target = device.dressed().omega[0 if target == "L" else 1]
    init = DensityState.from_label("gg", levels)
    rise = min(duration / 4.0, 100e-9)
    envelope = Envelope.hann_edges(rise, duration - 2.0 * rise, rise)
    out = []
    for n in n_range:
        center = omega_target / n
        best = (center, 0.0)
        for omega_p in np.linspace(
            center - scan_halfwidth, center + scan_halfwidth, scan_points
        ):
            tone = PumpTone(
                omega_p=omega_p,
                amplitude=amplitude,
                envelope=envelope,
            )
            traj = evolve(
                init,
                device.params,
                PulseSchedule(device.phi_s, (tone,)),
                None,
                device.hilbert,
                device.sim,
                duration,
            )
            p = _excited_population(traj.final.matrix, levels, target)
            if p > best[1]:
                best = (float(omega_p), float(p))
        out.append((int(n), best[0], best[1]))
    return out


# --------------------------------------------------------------------------
# spectroscopy and decoherence limits


def probe_spectroscopy(
    device: Device,
    target: str,
    probe_freqs,
    probe_rabi: float = TWO_PI * 0.2e6,
    duration: float = 2e-6,
):
    """Weak-probe population transfer vs probe frequency.

    The probe is a weak direct charge drive on the target qubit; returns
    (frequency, excited population after ``duration``) pairs.
    """
    levels = device.levels
    # weak flux tone scaled so ddc * amplitude equals the requested Rabi rate
    ddc_value = TWO_PI * 1e9
    amp = probe_rabi / ddc_value
    ddc = (ddc_value, 0.0) if target == "L" else (0.0, ddc_value)
    opts = replace(device.sim, direct_drive_coupling=ddc)
    init = DensityState.from_label("gg", levels)
    out = []
    for omega in probe_freqs:
        tone = PumpTone(
            omega_p=float(omega),
            amplitude=amp,
            envelope=Envelope.rectangular(duration),
        )
        traj = evolve(
            init,
            device.params,
            PulseSchedule(device.phi_s, (tone,)),
            None,
            device.hilbert,
            opts,
            duration,
        )
        out.append((float(omega), _excited_population(traj.final.matrix, levels, target)))
    return out


@dataclass(frozen=True)
class DecoherenceLimit:
    """Decoherence-limited error per gate and its limiting-case variants."""

    error: float          # (2/5)(G1 + 2 G2) t_g with G2 = 1/t2_eff
    best_case: float      # (4/5) G1 t_g, reached when T2 = 2 T1
    t2_equals_t1: float   # (6/5) G1 t_g


def decoherence_limit(t_g: float, t1_eff: float, t2_eff: float) -> DecoherenceLimit:
    if t1_eff <= 0 or t2_eff <= 0:
        raise ValueError("coherence times must be positive")
    g1 = 1.0 / t1_eff
    g2 = 1.0 / t2_eff
    return DecoherenceLimit(
        error=0.4 * (g1 + 2.0 * g2) * t_g,
        best_case=0.8 * g1 * t_g,
        t2_equals_t1=1.2 * g1 * t_g,
    )
