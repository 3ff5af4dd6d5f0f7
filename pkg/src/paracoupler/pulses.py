"""Pulse envelopes, flux waveforms, rectification math, and pump-line
amplitude compensation."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np


class SignMismatchError(ValueError):
    """Measured shift and curvature disagree in sign."""


class ZeroShiftError(ValueError):
    """A rectification sample has zero shift; lambda would diverge."""


@dataclass(frozen=True)
class Envelope:
    """Unit-amplitude pulse envelope: Hann half-window rise, flat plateau,
    mirrored Hann fall. ``rectangular`` and ``pure_hann`` are the two
    degenerate cases."""

    kind: str
    rise: float
    plateau: float
    fall: float

    def __post_init__(self):
        if self.kind not in ("hann_edges", "pure_hann", "rectangular"):
            raise ValueError(f"unknown envelope kind {self.kind!r}")
        if min(self.rise, self.plateau, self.fall) < 0:
            raise ValueError("envelope segments must be nonnegative")
        if self.duration <= 0:
            raise ValueError("envelope must have positive duration")
        if self.kind == "pure_hann" and (
            self.plateau != 0.0 or self.rise != self.fall
        ):
            raise ValueError("pure_hann requires plateau=0 and rise=fall")

    @property
    def duration(self) -> float:
        return self.rise + self.plateau + self.fall

    @classmethod
    def pure_hann(cls, t_g: float) -> "Envelope":
        return cls("pure_hann", 0.5 * t_g, 0.0, 0.5 * t_g)

    @classmethod
    def hann_edges(cls, rise: float, plateau: float, fall: float) -> "Envelope":
        return cls("hann_edges", rise, plateau, fall)

    @classmethod
    def rectangular(cls, t_g: float) -> "Envelope":
        return cls("rectangular", 0.0, t_g, 0.0)


def envelope_value(env: Envelope, t):
    """Envelope amplitude in [0, 1]; vectorized over t. Zero outside the
    pulse, continuous everywhere."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    t_g = env.duration
    inside = (t >= 0.0) & (t <= t_g)
    out[inside] = 1.0
    if env.rise > 0:
        m = inside & (t < env.rise)
        out[m] = np.sin(np.pi * t[m] / (2.0 * env.rise)) ** 2
    if env.fall > 0:
        m = inside & (t > t_g - env.fall)
        out[m] = np.sin(np.pi * (t_g - t[m]) / (2.0 * env.fall)) ** 2
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PumpTone:
    """One enveloped cosine flux-modulation tone."""

    omega_p: float
    amplitude: float
    envelope: Envelope
    phase: float = 0.0
    start: float = 0.0

    def __post_init__(self):
        if self.omega_p <= 0:
            raise ValueError("omega_p must be positive")
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "omega_p": self.omega_p,
            "amplitude": self.amplitude,
            "phase": self.phase,
            "start": self.start,
            "envelope": {
                "kind": self.envelope.kind,
                "rise": self.envelope.rise,
                "plateau": self.envelope.plateau,
                "fall": self.envelope.fall,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PumpTone":
        e = d["envelope"]
        return cls(
            omega_p=d["omega_p"],
            amplitude=d["amplitude"],
            envelope=Envelope(e["kind"], e["rise"], e["plateau"], e["fall"]),
            phase=d.get("phase", 0.0),
            start=d.get("start", 0.0),
        )


@dataclass(frozen=True)
class PulseSchedule:
    """Static flux bias plus pump tones; fully determines phi(t)."""

    phi_s: float
    tones: tuple[PumpTone, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tones", tuple(self.tones))

    @property
    def duration(self) -> float:
        if not self.tones:
            return 0.0
        return max(t.start + t.envelope.duration for t in self.tones)


def flux_waveform(phi_s, tones, t):
    """phi(t) = phi_s + sum_i a_i env_i(t - start_i) cos(w_i t + phase_i).

    Vectorized over t; ``phi_s`` may be a FluxBias or a plain float.
    """
    phi_s = getattr(phi_s, "phi", phi_s)
    t = np.asarray(t, dtype=float)
    out = np.full_like(t, float(phi_s))
    for tone in tones:
        env = envelope_value(tone.envelope, t - tone.start)
        out += tone.amplitude * env * np.cos(tone.omega_p * t + tone.phase)
    return out if out.ndim else float(out)


def rectified_shift(omega_second_derivative: float, pump_amplitude: float) -> float:
    """Time-averaged frequency shift under flux modulation: w'' a^2 / 4."""
    return 0.25 * omega_second_derivative * pump_amplitude**2


def calibrate_pump_amplitude(
    measured_shift: float, omega_second_derivative: float
) -> float:
    """Invert rectified_shift: a = 2 sqrt(shift / w'')."""
    if measured_shift == 0.0:
        return 0.0
    if measured_shift * omega_second_derivative < 0:
        raise SignMismatchError("shift and curvature must share sign")
    return 2.0 * math.sqrt(measured_shift / omega_second_derivative)


@dataclass(frozen=True)
class PumpLineCalibration:
    """Frequency-dependent generator amplitude multiplier lambda(omega_p),
    normalized to 1 at the reference frequency."""

    reference_frequency: float
    table: tuple[tuple[float, float], ...]

    def __post_init__(self):
        freqs = [w for w, _ in self.table]
        if sorted(freqs) != freqs:
            raise ValueError("table must be sorted by frequency")
        if any(lam <= 0 for _, lam in self.table):
            raise ValueError("lambda values must be positive")

    def lambda_at(self, omega_p: float) -> float:
        freqs = np.array([w for w, _ in self.table])
        lams = np.array([lam for _, lam in self.table])
        return float(np.interp(omega_p, freqs, lams))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["omega_hz", "lambda"])
            for omega, lam in self.table:
                w.writerow([repr(omega / (2.0 * math.pi)), repr(lam)])

    @classmethod
    def from_csv(cls, path, reference_frequency: float) -> "PumpLineCalibration":
        rows = []
        with open(path, newline="") as f:
            r = csv.reader(f)
            next(r)
            for omega_hz, lam in r:
                rows.append((2.0 * math.pi * float(omega_hz), float(lam)))
        return cls(reference_frequency, tuple(rows))


def build_compensation(
    rectification_samples, reference_frequency: float
) -> PumpLineCalibration:
    """Turn measured rectified shifts vs pump frequency into a lambda table.

    lambda(w) ~ 1/sqrt(|shift(w)|), normalized so the interpolated value at
    the reference frequency is exactly 1. Generator amplitude to use is
    target amplitude times lambda(omega_p).
    """
    samples = sorted(rectification_samples)
    if any(shift == 0.0 for _, shift in samples):
        raise ZeroShiftError("rectification sample with zero shift")
    freqs = np.array([w for w, _ in samples])
    if not freqs[0] <= reference_frequency <= freqs[-1]:
        raise ValueError("reference frequency outside sample range")
    raw = np.array([1.0 / math.sqrt(abs(shift)) for _, shift in samples])
    norm = np.interp(reference_frequency, freqs, raw)
    table = tuple((float(w), float(lam / norm)) for w, lam in zip(freqs, raw))
    return PumpLineCalibration(reference_frequency, table)
