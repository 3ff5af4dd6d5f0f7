"""Device bundle: circuit parameters, operating point, simulation settings.

A Device is what experiments, gate compilation and benchmarking consume.
Serialized as a single JSON document; a default file with the fitted
lumped-element values ships with the package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources

from .circuit import CircuitParams, cancellation_flux, derived_spectrum
from .dynamics import (
    DecoherenceParams,
    HilbertConfig,
    SimOptions,
    StaticSpectrum,
    diagonalize_static,
)
from .pulses import PumpTone


@dataclass(frozen=True)
class Device:
    params: CircuitParams
    phi_s: float = 0.0
    hilbert: HilbertConfig = HilbertConfig(levels_per_transmon=3)
    sim: SimOptions = SimOptions()
    decoherence: DecoherenceParams | None = None
    cancellation_tone: PumpTone | None = None

    @property
    def levels(self) -> int:
        return self.hilbert.levels_per_transmon

    def at_bias(self, phi_s: float) -> "Device":
        return replace(self, phi_s=phi_s)

    def with_decoherence(self, dec: DecoherenceParams | None) -> "Device":
        return replace(self, decoherence=dec)

    def spectrum(self):
        """Closed-form spectrum quantities at the operating bias."""
        return derived_spectrum(self.params, self.phi_s)

    def dressed(self) -> StaticSpectrum:
        """Exact static diagonalization at the operating bias."""
        return diagonalize_static(self.params, self.phi_s, self.hilbert, self.sim)

    def cancellation_flux(self) -> float:
        return cancellation_flux(self.params).phi

    def to_dict(self) -> dict:
        return {
            "circuit": self.params.to_dict(),
            "phi_s": self.phi_s,
            "hilbert": {
                "levels_per_transmon": self.hilbert.levels_per_transmon,
                "frame": self.hilbert.frame,
            },
            "sim": {
                "step": self.sim.step,
                "direct_drive_coupling": list(self.sim.direct_drive_coupling),
                "residual_nonlinear_zz": self.sim.residual_nonlinear_zz,
                "counter_rotating": self.sim.counter_rotating,
            },
            "decoherence": None
            if self.decoherence is None
            else {
                "t1": list(self.decoherence.t1),
                "t2": list(self.decoherence.t2),
            },
            "cancellation_tone": None
            if self.cancellation_tone is None
            else self.cancellation_tone.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Device":
        h = d.get("hilbert", {})
        s = d.get("sim", {})
        dec = d.get("decoherence")
        tone = d.get("cancellation_tone")
        return cls(
            params=CircuitParams.from_dict(d["circuit"]),
            phi_s=d.get("phi_s", 0.0),
            hilbert=HilbertConfig(
                levels_per_transmon=h.get("levels_per_transmon", 3),
                frame=h.get("frame", "lab"),
            ),
            sim=SimOptions(
                step=s.get("step", 2e-12),
                direct_drive_coupling=tuple(
                    s.get("direct_drive_coupling", (0.0, 0.0))
                ),
                residual_nonlinear_zz=s.get("residual_nonlinear_zz", 0.0),
                counter_rotating=s.get("counter_rotating", True),
            ),
            decoherence=None
            if dec is None
            else DecoherenceParams(t1=tuple(dec["t1"]), t2=tuple(dec["t2"])),
            cancellation_tone=None if tone is None else PumpTone.from_dict(tone),
        )

    @classmethod
    def from_json(cls, path) -> "Device":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")


def default_device() -> Device:
    """Device built from the bundled fitted parameter table."""
    text = resources.files("paracoupler").joinpath("data/default_device.json")
    return Device.from_dict(json.loads(text.read_text()))
