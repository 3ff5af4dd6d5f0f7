"""Batch command-line front end.

One subcommand per pipeline stage: spectrum, chevron, cancelzz,
crossramsey, gate, rb, optimize, readout. Parameters come from an optional
JSON config file with individual flags overriding file values; every run
writes a JSON summary containing the fully resolved parameter set so the
output directory is a reproducibility manifest. Outputs are deterministic
given the seed, byte-for-byte.

Exit codes: 0 success, 2 validation failure, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

TWO_PI = 2.0 * math.pi

OUTPUT_DIR_ENV = "PARACOUPLER_OUTPUT_DIR"

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


class ValidationFailure(Exception):
    pass


def _load_device(path):
    from .device import Device, default_device

    if path is None:
        return default_device()
    if not os.path.exists(path):
        raise ValidationFailure(f"device file not found: {path}")
    return Device.from_json(path)


def _load_config(path) -> dict:
    if path is None:
        return {}
    if not os.path.exists(path):
        raise ValidationFailure(f"config file not found: {path}")
    with open(path) as f:
        try:
            cfg = json.load(f)
        except json.JSONDecodeError as exc:
            raise ValidationFailure(f"config is not valid JSON: {exc}")
    if not isinstance(cfg, dict):
        raise ValidationFailure("config must be a JSON object")
    return cfg


class _RunWriter:
    """Tracks files written during a run so failures leave no partial
    output behind."""

    def __init__(self, outdir):
        self.outdir = outdir
        self.paths = []
        os.makedirs(outdir, exist_ok=True)

    def path(self, name):
        p = os.path.join(self.outdir, name)
        self.paths.append(p)
        return p

    def csv(self, name, header, rows):
        with open(self.path(name), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(header)
            for row in rows:
                w.writerow(
                    [repr(float(x)) if isinstance(x, float) else x for x in row]
                )

    def json(self, name, payload):
        with open(self.path(name), "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")

    def cleanup(self):
        for p in self.paths:
            if os.path.exists(p):
                os.remove(p)


def _resolve(args, config, spec):
    """Merge defaults <- config file <- explicit flags.

    ``spec`` maps name -> (type, default); default None means required.
    """
    out = {}
    for name, (cast, default) in spec.items():
        value = config.get(name, default)
        flag = getattr(args, name, None)
        if flag is not None:
            value = flag
        if value is None:
            raise ValidationFailure(f"missing required parameter: {name}")
        try:
            if cast is not None:
                value = cast(value)
        except (TypeError, ValueError) as exc:
            raise ValidationFailure(f"bad value for {name}: {exc}")
        out[name] = value
    return out


def _int_list(x):
    if isinstance(x, str):
        return [int(v) for v in x.split(",") if v]
    return [int(v) for v in x]


def _float_list(x):
    if isinstance(x, str):
        return [float(v) for v in x.split(",") if v]
    return [float(v) for v in x]


# ---------------------------------------------------------------- commands


def cmd_spectrum(args, config, writer):
    from .circuit import derived_spectrum

    device = _load_device(args.device)
    p = _resolve(args, config, {
        "phi_start": (float, 0.0),
        "phi_stop": (float, 0.45),
        "points": (int, 46),
    })
    if p["points"] < 2:
        raise ValidationFailure("points must be >= 2")
    phis = np.linspace(p["phi_start"], p["phi_stop"], p["points"])
    rows = []
    for phi in phis:
        s = derived_spectrum(device.params, float(phi))
        rows.append([float(phi), s.omega[0], s.omega[1],
                     s.anharmonicity[0], s.anharmonicity[1],
                     s.g_static, s.zeta_static])
    writer.csv("spectrum.csv",
               ["phi", "omega_L", "omega_R", "alpha_L", "alpha_R",
                "g_s", "zeta_s"], rows)
    phi_c = device.cancellation_flux()
    writer.json("spectrum_summary.json", {
        "command": "spectrum", "parameters": p,
        "results": {"cancellation_flux": phi_c},
    })


def cmd_chevron(args, config, writer):
    from .experiments import SweepGrid, chevron_scan

    device = _load_device(args.device)
    p = _resolve(args, config, {
        "pump_center": (float, None),
        "detuning_span": (float, TWO_PI * 40e6),
        "time_span": (float, 200e-9),
        "points_detuning": (int, 21),
        "points_time": (int, 21),
        "amplitude": (float, 0.01),
        "initial": (str, "eg"),
        "target": (str, "ge"),
    })
    grid = SweepGrid(
        axis1=("detuning", -0.5 * p["detuning_span"],
               0.5 * p["detuning_span"], p["points_detuning"]),
        axis2=("time", 0.0, p["time_span"], p["points_time"]),
    )
    cmap = chevron_scan(device, p["pump_center"], p["detuning_span"],
                        p["time_span"], grid, p["amplitude"],
                        initial=p["initial"], target=p["target"])
    cmap.to_csv(writer.path("chevron.csv"))
    writer.json("chevron_summary.json", {
        "command": "chevron", "parameters": p,
        "results": {
            "max_population": float(cmap.populations.max()),
            "pump_center": cmap.pump_center,
        },
    })


def cmd_cancelzz(args, config, writer):
    from .experiments import zz_cancellation_search

    device = _load_device(args.device)
    p = _resolve(args, config, {
        "omega_p": (float, None),
        "amp_min": (float, 0.0),
        "amp_max": (float, 0.03),
        "coarse_points": (int, 7),
    })
    res = zz_cancellation_search(
        device, p["omega_p"], (p["amp_min"], p["amp_max"]),
        coarse_points=p["coarse_points"],
    )
    writer.csv("cancelzz.csv", ["amplitude", "zeta_total"],
               [[a, z] for a, z in res.zeta_total_curve])
    writer.json("cancelzz_summary.json", {
        "command": "cancelzz", "parameters": p,
        "results": {
            "pump_amplitude_star": res.pump_amplitude_star,
            "zeta_refined": res.zeta_refined,
            "uncertainty": res.uncertainty,
        },
    })


def cmd_crossramsey(args, config, writer):
    from .experiments import cross_ramsey, cross_ramsey_zz

    device = _load_device(args.device)
    p = _resolve(args, config, {
        "target": (str, "L"),
        "delay": (float, 200e-9),
        "phase_points": (int, 24),
    })
    zeta = cross_ramsey_zz(device, p["delay"], target=p["target"],
                           phase_points=p["phase_points"])
    with_c = cross_ramsey(device, p["target"], True, p["delay"],
                          p["phase_points"])
    without = cross_ramsey(device, p["target"], False, p["delay"],
                           p["phase_points"])
    writer.json("crossramsey_summary.json", {
        "command": "crossramsey", "parameters": p,
        "results": {
            "zeta_total": zeta,
            "phase_control_prepared": with_c.phase,
            "phase_control_absent": without.phase,
            "contrast": min(with_c.contrast, without.contrast),
        },
    })


def cmd_gate(args, config, writer):
    from .gates import (compile_iswap, compile_pswap_cz, compile_swapfree_cz,
                        gate_report)
    from .pulses import Envelope

    device = _load_device(args.device)
    p = _resolve(args, config, {
        "kind": (str, None),
        "t_g": (float, None),
        "rise": (float, -1.0),  # <= 0 means a quarter of the gate time
    })
    kind = p["kind"]
    if kind not in ("iswap", "pswap_cz", "swapfree_cz"):
        raise ValidationFailure(f"unknown gate kind {kind!r}")
    rise = p["rise"] if p["rise"] > 0 else p["t_g"] / 4.0
    if kind == "iswap":
        env = Envelope.hann_edges(rise, p["t_g"] - 2 * rise, rise)
        gate = compile_iswap(device, env)
    elif kind == "pswap_cz":
        env = Envelope.hann_edges(rise, p["t_g"] - 2 * rise, rise)
        gate = compile_pswap_cz(device, p["t_g"], env)
    else:
        gate = compile_swapfree_cz(device, p["t_g"])
    report = gate_report(device, gate)
    gate.to_json(writer.path("gate.json"))
    writer.json("gate_summary.json", {
        "command": "gate", "parameters": p,
        "results": report.to_dict(),
    })


def cmd_rb(args, config, writer):
    from .benchmarking import (RBConfig, fit_decay, interleaved_fidelity,
                               run_rb)
    from .gates import GateSpec

    device = _load_device(args.device)
    p = _resolve(args, config, {
        "lengths": (_int_list, [2, 8, 20, 40, 70, 110]),
        "sequences_per_length": (int, 10),
        "seed": (int, None),
        "single_qubit_duration": (float, 25e-9),
    })
    interleaved = None
    if args.interleaved_gate or config.get("interleaved_gate"):
        path = args.interleaved_gate or config["interleaved_gate"]
        if not os.path.exists(path):
            raise ValidationFailure(f"gate file not found: {path}")
        interleaved = GateSpec.from_json(path)
    rbc = RBConfig(lengths=tuple(p["lengths"]),
                   sequences_per_length=p["sequences_per_length"],
                   seed=p["seed"], interleaved_gate=interleaved,
                   single_qubit_duration=p["single_qubit_duration"])
    res = run_rb(device, rbc)
    res.to_csv(writer.path("rb.csv"))
    fit = fit_decay(res)
    results = {"A": fit.a, "P": fit.p, "C": fit.c,
               "residual_rms": fit.residual_rms}
    if interleaved is not None:
        ref = run_rb(device, RBConfig(
            lengths=rbc.lengths,
            sequences_per_length=rbc.sequences_per_length,
            seed=rbc.seed,
            single_qubit_duration=rbc.single_qubit_duration,
        ))
        ref_fit = fit_decay(ref)
        ref.to_csv(writer.path("rb_reference.csv"))
        fidelity = interleaved_fidelity(ref_fit.p, fit.p)
        results.update({"P_ref": ref_fit.p, "fidelity": fidelity,
                        "error_per_gate": 1.0 - fidelity})
    writer.json("rb_summary.json", {
        "command": "rb", "parameters": p, "results": results,
    })


def cmd_optimize(args, config, writer):
    from .gates import GateSpec
    from .optimizer import EsConfig, ObjectiveSpec, optimize_gate

    device = _load_device(args.device)
    p = _resolve(args, config, {
        "gate_file": (str, None),
        "seed": (int, None),
        "population_m": (int, 50),
        "survival_rate_s": (float, 0.2),
        "scattering_p": (float, 1.0),
        "max_iterations": (int, 15),
        "interleaved_count_m": (int, 15),
        "repeats": (int, 2),
        "initial_steps": (_float_list, [TWO_PI * 5e6, 0.005, 0.1, 0.1]),
        "parameter_names": (
            lambda x: [str(v) for v in (x.split(",") if isinstance(x, str) else x)],
            ["pump_frequency", "pump_amplitude", "virtual_z_l", "virtual_z_r"],
        ),
    })
    if not os.path.exists(p["gate_file"]):
        raise ValidationFailure(f"gate file not found: {p['gate_file']}")
    gate = GateSpec.from_json(p["gate_file"])
    try:
        es = EsConfig(population_m=p["population_m"],
                      survival_rate_s=p["survival_rate_s"],
                      scattering_p=p["scattering_p"],
                      initial_steps=tuple(p["initial_steps"]),
                      max_iterations=p["max_iterations"], seed=p["seed"])
        obj = ObjectiveSpec(interleaved_count_m=p["interleaved_count_m"],
                            repeats=p["repeats"], direction="maximize",
                            parameter_names=tuple(p["parameter_names"]))
    except ValueError as exc:
        raise ValidationFailure(str(exc))
    tuned, history = optimize_gate(device, gate, es, obj)
    tuned.to_json(writer.path("tuned_gate.json"))
    history.to_csv(writer.path("history.csv"),
                   parameter_names=p["parameter_names"])
    writer.json("optimize_summary.json", {
        "command": "optimize", "parameters": p,
        "results": {
            "best_signal": history.best_value,
            "iterations": len(history.best),
        },
    })


def cmd_readout(args, config, writer):
    from .readout import (BallModel, classify_shots, separation_fidelity,
                          shuffle_recover, simulate_shots, triangle_metrics)

    _ = _load_device(args.device)  # device file validated for consistency
    p = _resolve(args, config, {
        "seed": (int, None),
        "shots": (int, 10000),
        "populations": (_float_list, [1.0, 0.0, 0.0, 0.0]),
        "centroids": (None, [[0.0, 0.0], [1.0, 0.0], [0.5, 0.9]]),
        "sigma": (_float_list, [0.12, 0.12, 0.12]),
    })
    try:
        model = BallModel(
            centroids=tuple(tuple(c) for c in p["centroids"]),
            sigma=tuple(p["sigma"]),
        )
    except ValueError as exc:
        raise ValidationFailure(str(exc))
    pops = np.asarray(p["populations"], dtype=float)
    if abs(pops.sum() - 1.0) > 1e-9:
        raise ValidationFailure("populations must sum to 1")
    rng = np.random.default_rng(p["seed"])
    shots = simulate_shots(pops, model, p["shots"], rng)
    writer.csv("shots.csv", ["I", "Q"],
               [[float(i), float(q)] for i, q in shots])
    counts = classify_shots(shots, model)
    fidelity, pair_errors = separation_fidelity(model)
    tri = triangle_metrics(model)
    writer.json("readout_summary.json", {
        "command": "readout", "parameters": p,
        "results": {
            "separation_fidelity": fidelity,
            "pair_errors": {f"{a}-{b}": v for (a, b), v in
                            pair_errors.items()},
            "triangle_angles": list(tri.angles),
            "triangle_lengths": list(tri.lengths),
            "classified_counts": counts,
        },
    })


COMMANDS = {
    "spectrum": cmd_spectrum,
    "chevron": cmd_chevron,
    "cancelzz": cmd_cancelzz,
    "crossramsey": cmd_crossramsey,
    "gate": cmd_gate,
    "rb": cmd_rb,
    "optimize": cmd_optimize,
    "readout": cmd_readout,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paracoupler",
        description="Parametric-coupler simulation and calibration runs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, flags):
        sp = sub.add_parser(name)
        sp.add_argument("--device", help="device JSON file")
        sp.add_argument("--config", help="run config JSON file")
        sp.add_argument("--output-dir", dest="output_dir")
        for flag, kwargs in flags.items():
            sp.add_argument(flag, **kwargs)
        return sp

    add("spectrum", {
        "--phi-start": dict(type=float, dest="phi_start"),
        "--phi-stop": dict(type=float, dest="phi_stop"),
        "--points": dict(type=int),
    })
    add("chevron", {
        "--pump-center": dict(type=float, dest="pump_center"),
        "--detuning-span": dict(type=float, dest="detuning_span"),
        "--time-span": dict(type=float, dest="time_span"),
        "--points-detuning": dict(type=int, dest="points_detuning"),
        "--points-time": dict(type=int, dest="points_time"),
        "--amplitude": dict(type=float),
        "--initial": dict(),
        "--target": dict(),
    })
    add("cancelzz", {
        "--omega-p": dict(type=float, dest="omega_p"),
        "--amp-min": dict(type=float, dest="amp_min"),
        "--amp-max": dict(type=float, dest="amp_max"),
        "--coarse-points": dict(type=int, dest="coarse_points"),
    })
    add("crossramsey", {
        "--target": dict(),
        "--delay": dict(type=float),
        "--phase-points": dict(type=int, dest="phase_points"),
    })
    add("gate", {
        "--kind": dict(),
        "--t-g": dict(type=float, dest="t_g"),
        "--rise": dict(type=float),
    })
    add("rb", {
        "--lengths": dict(),
        "--sequences-per-length": dict(type=int, dest="sequences_per_length"),
        "--seed": dict(type=int),
        "--single-qubit-duration": dict(type=float,
                                        dest="single_qubit_duration"),
        "--interleaved-gate": dict(dest="interleaved_gate"),
    })
    add("optimize", {
        "--gate-file": dict(dest="gate_file"),
        "--seed": dict(type=int),
        "--population-m": dict(type=int, dest="population_m"),
        "--survival-rate-s": dict(type=float, dest="survival_rate_s"),
        "--scattering-p": dict(type=float, dest="scattering_p"),
        "--max-iterations": dict(type=int, dest="max_iterations"),
        "--interleaved-count-m": dict(type=int, dest="interleaved_count_m"),
        "--repeats": dict(type=int),
        "--initial-steps": dict(dest="initial_steps"),
        "--parameter-names": dict(dest="parameter_names"),
    })
    add("readout", {
        "--seed": dict(type=int),
        "--shots": dict(type=int),
        "--populations": dict(),
    })
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    outdir = args.output_dir or os.environ.get(OUTPUT_DIR_ENV) or os.getcwd()
    writer = None
    try:
        config = _load_config(args.config)
        writer = _RunWriter(outdir)
        COMMANDS[args.command](args, config, writer)
        return 0
    except ValidationFailure as exc:
        if writer is not None:
            writer.cleanup()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:
        if writer is not None:
            writer.cleanup()
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
