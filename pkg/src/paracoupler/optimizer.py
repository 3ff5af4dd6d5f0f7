"""Simplified evolution-strategy closed-loop gate calibration.

Each iteration samples a uniform box around the current center, keeps the
best ceil(m*s) candidates, recenters on their mean and rescales the box to
the scattering prefactor times their per-coordinate spread. The incumbent
center is not re-injected into later populations; the best sample ever seen
is tracked separately and returned, so the loop cannot lose ground.

The objective mirrors the hardware protocol: mean survival of |gg> after M
copies of the candidate gate interleaved in a random Clifford scaffold,
resampled per evaluation. The scaffold runs coherently (pure states, ideal
Clifford layers); decoherence adds only a parameter-independent offset, so
leaving it out sharpens the signal without moving the optimum.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .benchmarking import DecayFit, interleaved_fidelity, signal_to_p
from .cliffords import two_qubit_clifford_group
from .device import Device
from .dynamics import label_index
from .gates import GateSpec, embed_computational, simulate_gate_unitary

STEP_FLOOR_FRACTION = 1e-6

KNOWN_PARAMETERS = (
    "pump_frequency",
    "pump_amplitude",
    "virtual_z_l",
    "virtual_z_r",
    "drag1",  # placeholder, no effect on the waveform
    "drag2",  # placeholder, no effect on the waveform
)


class ObjectiveFailureError(RuntimeError):
    """The objective could not be evaluated; the ES step is aborted."""


@dataclass(frozen=True)
class EsConfig:
    population_m: int
    survival_rate_s: float
    scattering_p: float
    initial_steps: tuple[float, ...]
    max_iterations: int
    seed: int

    def __post_init__(self):
        if not 0.0 < self.survival_rate_s < 1.0:
            raise ValueError("survival rate must be in (0, 1)")
        if math.floor(self.population_m * self.survival_rate_s) < 2:
            raise ValueError("floor(m*s) must be at least 2")
        if self.scattering_p <= 0:
            raise ValueError("scattering prefactor must be positive")
        steps = tuple(float(x) for x in self.initial_steps)
        if any(x <= 0 for x in steps):
            raise ValueError("initial steps must be positive")
        object.__setattr__(self, "initial_steps", steps)

    @property
    def n_survivors(self) -> int:
        return math.ceil(self.population_m * self.survival_rate_s)


@dataclass(frozen=True)
class ObjectiveSpec:
    interleaved_count_m: int
    repeats: int
    direction: str  # minimize | maximize
    parameter_names: tuple[str, ...]

    def __post_init__(self):
        if self.interleaved_count_m < 1 or self.repeats < 1:
            raise ValueError("M and repeats must be >= 1")
        if self.direction not in ("minimize", "maximize"):
            raise ValueError("direction must be minimize or maximize")
        for name in self.parameter_names:
            if name not in KNOWN_PARAMETERS:
                raise ValueError(f"unknown parameter {name!r}")
        object.__setattr__(
            self, "parameter_names", tuple(self.parameter_names)
        )


def es_step(center, steps, objective, config: EsConfig, rng,
            direction: str = "minimize"):
    """One ES iteration; returns (new center, new steps, evaluations).

    Evaluations are (sample, value) pairs in sampling order. Survivor
    selection is a stable sort, ties broken by sample index.
    """
    center = np.asarray(center, dtype=float)
    steps = np.asarray(steps, dtype=float)
    m = config.population_m
    samples = center + (2.0 * rng.uniform(size=(m, len(center))) - 1.0) * steps
    try:
        values = np.array([float(objective(s)) for s in samples])
    except Exception as exc:
        raise ObjectiveFailureError(str(exc)) from exc
    if not np.all(np.isfinite(values)):
        raise ObjectiveFailureError("objective returned a non-finite value")
    keyed = values if direction == "minimize" else -values
    order = np.argsort(keyed, kind="stable")[: config.n_survivors]
    survivors = samples[order]
    new_center = survivors.mean(axis=0)
    floor = STEP_FLOOR_FRACTION * np.asarray(config.initial_steps)
    # survivor spread measured about the old box center, not the survivor
    # mean: the displacement term keeps the box from collapsing while the
    # center is still drifting downhill
    spread = np.sqrt(((survivors - center) ** 2).mean(axis=0))
    new_steps = np.maximum(config.scattering_p * spread, floor)
    return new_center, new_steps, list(zip(samples, values))


def _gate_to_vector(gate: GateSpec, names) -> np.ndarray:
    vec = []
    for name in names:
        if name == "pump_frequency":
            vec.append(gate.gate_tone.omega_p)
        elif name == "pump_amplitude":
            vec.append(gate.gate_tone.amplitude)
        elif name == "virtual_z_l":
            vec.append(gate.virtual_z[0])
        elif name == "virtual_z_r":
            vec.append(gate.virtual_z[1])
        else:  # drag placeholders
            vec.append(0.0)
    return np.array(vec)


def _vector_to_gate(gate: GateSpec, names, vec) -> GateSpec:
    tone = gate.gate_tone
    vz = list(gate.virtual_z)
    for name, x in zip(names, vec):
        if name == "pump_frequency":
            tone = replace(tone, omega_p=float(x))
        elif name == "pump_amplitude":
            tone = replace(tone, amplitude=float(abs(x)))
        elif name == "virtual_z_l":
            vz[0] = float(x)
        elif name == "virtual_z_r":
            vz[1] = float(x)
    return replace(gate, gate_tone=tone, virtual_z=(vz[0], vz[1]))


def _scaffold_survival(u_gate, ideal_gate_index, device, m_count, rng,
                       group, embeds) -> float:
    """Survival of |gg> through M candidate gates in a Clifford scaffold."""
    d = device.levels**2
    psi = np.zeros(d, dtype=complex)
    psi[label_index("gg", device.levels)] = 1.0
    total = group.lookup(np.eye(4))
    for _ in range(m_count):
        idx = group.sample(rng)
        psi = embeds[idx] @ psi
        psi = u_gate @ psi
        total = group.compose(ideal_gate_index, group.compose(idx, total))
    rec = group.inverse(total)
    psi = embeds[rec] @ psi
    return float(abs(psi[label_index("gg", device.levels)]) ** 2)


def optimize_gate(device: Device, gate: GateSpec, es: EsConfig,
                  obj: ObjectiveSpec, sim_step: float = 2e-12):
    """Closed-loop ES calibration of a compiled gate.

    Returns (tuned GateSpec, history), history being the best objective
    value seen up to each iteration (monotone by construction).
    """
    from .benchmarking import _ideal_gate_unitary

    group = two_qubit_clifford_group()
    ideal_index = group.lookup(_ideal_gate_unitary(gate.kind))
    levels = device.levels
    embed_cache: dict[int, np.ndarray] = {}

    def embeds(idx):
        if idx not in embed_cache:
            embed_cache[idx] = embed_computational(
                group.unitaries[idx], levels
            )
        return embed_cache[idx]

    class _Embeds:
        def __getitem__(self, idx):
            return embeds(idx)

    embed_view = _Embeds()
    rng = np.random.default_rng(es.seed)

    def objective(vec) -> float:
        candidate = _vector_to_gate(gate, obj.parameter_names, vec)
        u = simulate_gate_unitary(device, candidate, step=sim_step)
        vals = [
            _scaffold_survival(
                u, ideal_index, device, obj.interleaved_count_m, rng,
                group, embed_view,
            )
            for _ in range(obj.repeats)
        ]
        return float(np.mean(vals))

    sign = 1.0 if obj.direction == "maximize" else -1.0
    center = _gate_to_vector(gate, obj.parameter_names)
    steps = np.asarray(es.initial_steps, dtype=float)
    if len(steps) != len(center):
        raise ValueError("initial_steps length must match parameter_names")

    best_vec = center.copy()
    best_val = objective(center)
    history = []
    centers = [center.copy()]
    for _ in range(es.max_iterations):
        center, steps, evals = es_step(
            center, steps, objective, es, rng, direction=obj.direction
        )
        for sample, value in evals:
            if sign * value > sign * best_val:
                best_val, best_vec = value, sample.copy()
        history.append(best_val)
        centers.append(center.copy())

    tuned = _vector_to_gate(gate, obj.parameter_names, best_vec)
    return tuned, OptimizationHistory(
        best=np.array(history), centers=np.array(centers),
        best_vector=best_vec, best_value=best_val,
    )


@dataclass
class OptimizationHistory:
    best: np.ndarray  # best-so-far objective per iteration
    centers: np.ndarray  # center vector per iteration (incl. initial)
    best_vector: np.ndarray
    best_value: float

    def to_csv(self, path, parameter_names=None) -> None:
        n = self.centers.shape[1]
        names = list(parameter_names or [f"p{i}" for i in range(n)])
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["iteration", "best_signal"] + names)
            for i, val in enumerate(self.best):
                row = [i + 1, repr(float(val))]
                row += [repr(float(x)) for x in self.centers[i + 1]]
                w.writerow(row)


def history_to_fidelity(history, reference_fit: DecayFit,
                        n_gates: int) -> np.ndarray:
    """Convert raw best-signal history to gate fidelity, pointwise."""
    return np.array(
        [
            interleaved_fidelity(
                reference_fit.p, signal_to_p(s, reference_fit, n_gates)
            )
            for s in np.asarray(history, dtype=float).ravel()
        ]
    )
