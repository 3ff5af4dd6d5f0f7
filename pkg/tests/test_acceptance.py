"""End-to-end acceptance checks.

Each test prints a single PASS/FAIL line with the measured value and the
tolerance it was held to. The suite exercises the full stack: closed-form
physics against simulation, calibration routines, gate compilation,
benchmarking, optimization and readout.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.special import erfc

from paracoupler.device import default_device

TWO_PI = 2.0 * math.pi

DEC_T1 = 16.3e-6
DEC_T2 = 22.7e-6


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"{name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def dec():
    from paracoupler.dynamics import DecoherenceParams

    return DecoherenceParams(t1=(DEC_T1, DEC_T1), t2=(DEC_T2, DEC_T2))


def test_c1_rwa_matches_closed_form(device_phic):
    """Two-level RWA propagation vs the analytic Rabi chevron."""
    from paracoupler.circuit import parametric_strength
    from paracoupler.dynamics import (DensityState, HilbertConfig, SimOptions,
                                      evolve, rwa_rabi)
    from paracoupler.pulses import Envelope, PulseSchedule, PumpTone

    dev = device_phic
    amp = 0.01
    g_p = parametric_strength(dev.params, dev.phi_s, amp).g_p
    omega0 = dev.dressed().transition("ge", "eg")
    cfg = HilbertConfig(levels_per_transmon=2, frame="rwa_two_level")
    worst = 0.0
    for detuning in (0.0, TWO_PI * 4e6, -TWO_PI * 9e6):
        tone = PumpTone(omega0 + detuning, amp, Envelope.rectangular(400e-9))
        times = np.linspace(0.0, 400e-9, 41)
        traj = evolve(
            DensityState.from_label("eg", 2), dev.params,
            PulseSchedule(dev.phi_s, (tone,)), None, cfg,
            SimOptions(step=2e-12), 400e-9, record_times=times,
        )
        sim = np.array([st.population("ge") for st in traj.states])
        worst = max(worst, float(np.max(np.abs(sim - rwa_rabi(g_p, detuning,
                                                              traj.times)))))
    _report("criterion 1 (RWA chevron)", worst < 1e-6,
            f"max |sim - analytic| = {worst:.2e}, tolerance 1e-6")


def test_c2_perturbative_zz(device):
    """Perturbative static ZZ vs exact diagonalization, 20 parameter sets."""
    from paracoupler.circuit import derived_spectrum

    rng = np.random.default_rng(2)
    p0 = device.params
    worst = 0.0
    checked = 0
    tries = 0
    while checked < 20 and tries < 600:
        tries += 1
        scale = lambda: 1.0 + rng.uniform(-0.15, 0.15)
        params = replace(
            p0,
            qubit_junction_inductance=(
                p0.qubit_junction_inductance[0] * scale(),
                p0.qubit_junction_inductance[1] * scale(),
            ),
            shunt_capacitance=(
                p0.shunt_capacitance[0] * scale(),
                p0.shunt_capacitance[1] * scale(),
            ),
        )
        phi = rng.uniform(0.0, 0.42)
        s = derived_spectrum(params, phi)
        # stay in the dispersive regime, away from the straddling poles
        if abs(s.g_static / s.delta) > 0.1 or abs(s.delta) < TWO_PI * 0.3e9:
            continue
        if min(abs(s.delta - s.anharmonicity[0]),
               abs(s.delta + s.anharmonicity[1])) < TWO_PI * 150e6:
            continue
        dev = replace(device, params=params, phi_s=phi)
        exact = dev.dressed().zeta
        worst = max(worst, abs(s.zeta_static - exact) / abs(exact))
        checked += 1
    ok = checked == 20 and worst < 0.15
    _report("criterion 2 (perturbative ZZ)", ok,
            f"{checked} sets, worst relative error {worst:.3f}, tolerance 0.15")


def test_c3_rectification(device):
    """Rectified frequency shift vs the curvature formula, three amplitudes."""
    from paracoupler.dynamics import (DensityState, diagonalize_static,
                                      evolve, label_index)
    from paracoupler.pulses import (Envelope, PulseSchedule, PumpTone,
                                    rectified_shift)

    levels = device.levels
    # flux curvature of the dressed left-qubit frequency at the sweet spot
    h = 1e-3
    w0 = diagonalize_static(device.params, 0.0, device.hilbert).omega[0]
    wh = diagonalize_static(device.params, h, device.hilbert).omega[0]
    w2 = 2.0 * (wh - w0) / h**2

    psi = np.zeros(levels**2, dtype=complex)
    psi[label_index("gg", levels)] = 1.0 / math.sqrt(2.0)
    psi[label_index("eg", levels)] = 1.0 / math.sqrt(2.0)
    init = DensityState.from_statevector(psi, levels)
    i_gg = label_index("gg", levels)
    i_eg = label_index("eg", levels)

    def phase_rate(tones, duration):
        times = np.linspace(0.0, duration, 201)
        traj = evolve(init, device.params, PulseSchedule(0.0, tones), None,
                      device.hilbert, device.sim, duration,
                      record_times=times)
        phases = np.unwrap(
            [np.angle(st.matrix[i_gg, i_eg]) for st in traj.states]
        )
        return np.polyfit(traj.times, phases, 1)[0]

    worst = 0.0
    for amp, duration in ((0.002, 2e-6), (0.005, 1e-6), (0.01, 0.5e-6)):
        tone = PumpTone(TWO_PI * 0.9e9, amp, Envelope.rectangular(duration))
        measured = phase_rate((tone,), duration) - phase_rate((), duration)
        predicted = rectified_shift(w2, amp)
        worst = max(worst, abs(measured - predicted) / abs(predicted))
    _report("criterion 3 (flux rectification)", worst < 0.10,
            f"worst relative error {worst:.4f}, tolerance 0.10")


def test_c4_zz_cancellation(device_386):
    """Calibrated cancellation pump nulls the total ZZ below 10 kHz."""
    from paracoupler.experiments import zz_cancellation_search

    ss = device_386.dressed()
    omega_p = 0.5 * (ss.transition("ge", "eg") + ss.transition("ee", "fg"))
    res = zz_cancellation_search(device_386, omega_p, (0.0, 0.03))
    resid = abs(res.zeta_refined) / TWO_PI
    _report("criterion 4 (ZZ cancellation)", resid < 10e3,
            f"|zeta| = {resid / 1e3:.2f} kHz at amplitude "
            f"{res.pump_amplitude_star:.4f}, tolerance 10 kHz")


def test_c5_pswap_cz(device_phic, pswap_gate):
    from paracoupler.gates import gate_report

    rep = gate_report(device_phic, pswap_gate)
    dphi = abs(abs(rep.conditional_phase) - math.pi)
    sq = max(abs(p) for p in rep.single_qubit_phases)
    ok = dphi < 0.01 and rep.leakage < 1e-3 and sq < 1e-3
    _report("criterion 5a (p-SWAP cZ)", ok,
            f"|phase - pi| = {dphi:.1e} (tol 0.01), leakage = "
            f"{rep.leakage:.1e} (tol 1e-3), sq phases = {sq:.1e} (tol 1e-3)")


def test_c5_swapfree_cz(device_phic):
    from paracoupler.gates import compile_swapfree_cz, gate_report

    gate = compile_swapfree_cz(device_phic, 70e-9)
    rep = gate_report(device_phic, gate)
    dphi = abs(abs(rep.conditional_phase) - math.pi)
    sq = max(abs(p) for p in rep.single_qubit_phases)
    ok = dphi < 0.01 and rep.leakage < 1e-3 and sq < 1e-3
    _report("criterion 5b (SWAP-free cZ)", ok,
            f"|phase - pi| = {dphi:.1e} (tol 0.01), leakage = "
            f"{rep.leakage:.1e} (tol 1e-3), sq phases = {sq:.1e} (tol 1e-3)")


def _synthetic_cz_channel(dev, t_g, dec):
    """Ideal CZ followed by a frame-corrected decoherence idle of t_g."""
    from paracoupler.cliffords import CZ
    from paracoupler.dynamics import static_channel, unitary_channel
    from paracoupler.gates import _frame_diagonal, embed_computational

    u = np.diag(_frame_diagonal(dev, t_g)) @ embed_computational(CZ, dev.levels)
    return unitary_channel(u) @ static_channel(
        dev.params, dev.phi_s, dec, dev.hilbert, dev.sim, t_g
    )


def test_c6_interleaved_rb_vs_decoherence_limit(device_phic, dec):
    from paracoupler.benchmarking import (RBConfig, fit_decay,
                                          interleaved_fidelity, run_rb)
    from paracoupler.experiments import decoherence_limit

    dev = device_phic.with_decoherence(dec)
    cfg = RBConfig(lengths=(2, 8, 20, 40, 70, 110), sequences_per_length=12,
                   seed=11)
    ref_fit = fit_decay(run_rb(dev, cfg))

    t_g = 70e-9
    ch = _synthetic_cz_channel(dev, t_g, dec)
    int_fit = fit_decay(run_rb(dev, cfg, interleaved_channel=ch))
    eps = 1.0 - interleaved_fidelity(ref_fit.p, int_fit.p)
    limit = decoherence_limit(t_g, DEC_T1, DEC_T2).error
    rel = abs(eps - limit) / limit

    # error must grow with gate duration
    eps_trend = []
    for tg in (150e-9, 300e-9, 500e-9):
        fit = fit_decay(run_rb(dev, cfg,
                               interleaved_channel=_synthetic_cz_channel(
                                   dev, tg, dec)))
        eps_trend.append(1.0 - interleaved_fidelity(ref_fit.p, fit.p))
    monotone = all(a < b for a, b in zip(eps_trend, eps_trend[1:]))

    ok = rel < 0.25 and monotone
    _report("criterion 6 (RB vs decoherence limit)", ok,
            f"eps = {eps:.3e} vs limit {limit:.3e} (rel {rel:.2f}, tol 0.25), "
            f"trend {['%.2e' % e for e in eps_trend]} monotone={monotone}")


def test_c7_rb_analysis_math():
    from paracoupler.benchmarking import (DecayFit, fit_decay,
                                          interleaved_fidelity, signal_to_p)
    from paracoupler.cliffords import two_qubit_clifford_group

    group = two_qubit_clifford_group()
    ok_group = group.order == 11520 and group.class_sizes == (
        576, 5184, 5184, 576)

    lengths = np.array([1, 5, 15, 40, 100, 200])
    a, p, c = 0.73, 0.991, 0.26
    fit = fit_decay((lengths, a * p**lengths + c))
    ok_fit = (abs(fit.p - p) < 1e-9 and abs(fit.a - a) < 1e-9
              and abs(fit.c - c) < 1e-9)

    f = interleaved_fidelity(0.97, 0.94413)
    ok_f = abs(f - 0.98) < 1e-4

    fit2 = DecayFit(a=0.7, p=0.98, c=0.27, covariance=np.eye(3),
                    residual_rms=0.0)
    ok_inv = abs(signal_to_p(0.7 * 0.98**30 + 0.27, fit2, 30) - 0.98) < 1e-12

    ok = ok_group and ok_fit and ok_f and ok_inv
    _report("criterion 7 (RB analysis math)", ok,
            f"group={ok_group}, fit={ok_fit}, fidelity={ok_f}, invert={ok_inv}")


def test_c8_es_recovers_detuned_gate(device_phic, pswap_gate, dec):
    from paracoupler.benchmarking import (RBConfig, fit_decay,
                                          interleaved_fidelity, run_rb)
    from paracoupler.optimizer import EsConfig, ObjectiveSpec, optimize_gate
    from paracoupler.pulses import PumpTone

    dev = device_phic.with_decoherence(dec)
    cfg = RBConfig(lengths=(2, 8, 20, 40, 70, 110), sequences_per_length=10,
                   seed=11)
    ref_fit = fit_decay(run_rb(dev, cfg))

    def gate_error(gate):
        fit = fit_decay(run_rb(dev, replace_cfg(gate)))
        return 1.0 - interleaved_fidelity(ref_fit.p, fit.p)

    def replace_cfg(gate):
        return RBConfig(lengths=cfg.lengths,
                        sequences_per_length=cfg.sequences_per_length,
                        seed=cfg.seed, interleaved_gate=gate)

    eps0 = gate_error(pswap_gate)

    tone = pswap_gate.gate_tone
    detuned = replace(
        pswap_gate,
        gate_tone=PumpTone(tone.omega_p + TWO_PI * 2e6, tone.amplitude,
                           tone.envelope, phase=tone.phase,
                           start=tone.start),
    )
    eps_detuned = gate_error(detuned)

    es = EsConfig(population_m=50, survival_rate_s=0.2, scattering_p=1.0,
                  initial_steps=(TWO_PI * 5e6, 0.005, 0.1, 0.1),
                  max_iterations=30, seed=21)
    obj = ObjectiveSpec(interleaved_count_m=15, repeats=2,
                        direction="maximize",
                        parameter_names=("pump_frequency", "pump_amplitude",
                                         "virtual_z_l", "virtual_z_r"))
    t0 = time.time()
    tuned, _ = optimize_gate(device_phic, detuned, es, obj)
    es_seconds = time.time() - t0
    eps_tuned = gate_error(tuned)

    ratio = eps_tuned / eps0
    ok = eps_detuned > 1.5 * eps0 and ratio < 1.10
    _report("criterion 8 (ES recalibration)", ok,
            f"eps unperturbed {eps0:.3e}, detuned {eps_detuned:.3e}, tuned "
            f"{eps_tuned:.3e} (ratio {ratio:.3f}, tol 1.10), "
            f"ES took {es_seconds:.0f} s")


def test_c9_readout(rng):
    from scipy.special import erfcinv

    from paracoupler.readout import (BallModel, classify_shots,
                                     separation_fidelity, shuffle_recover,
                                     simulate_shots)
    from paracoupler.readout import _SETTING_PERMUTATION

    # three balls placed so the pairwise errors are 3.0, 2.2 and 2.7
    # percent; the fidelity must come out at exactly 92.1 percent
    def dist(eps):
        return 2.0 * math.sqrt(2.0) * erfcinv(2.0 * eps)

    d01, d02, d12 = dist(0.030), dist(0.022), dist(0.027)
    x = (d01**2 + d02**2 - d12**2) / (2.0 * d01)
    y = math.sqrt(d02**2 - x**2)
    model = BallModel(((0.0, 0.0), (d01, 0.0), (x, y)), (1.0, 1.0, 1.0))
    fid, _ = separation_fidelity(model)
    ok_fid = abs(fid - 0.921) < 1e-9

    # Monte Carlo misassignment vs the erfc formula at S/sigma = 4
    m2 = BallModel(((0.0, 0.0), (4.0, 0.0), (2.0, 500.0)), (1.0, 1.0, 1.0))
    n = 1_000_000
    pts = simulate_shots((1.0, 0.0, 0.0, 0.0), m2, n, rng)
    mc = classify_shots(pts, m2)["middle"] / n
    analytic = 0.5 * erfc(4.0 / (2.0 * math.sqrt(2.0)))
    rel_mc = abs(mc - analytic) / analytic

    # shuffle recovery at 1e4 shots within 3 sigma statistics
    m3 = BallModel(((0.0, 0.0), (1.0, 0.0), (0.5, 0.9)), (0.05, 0.05, 0.05))
    pops = np.array([0.5, 0.25, 0.15, 0.1])
    states = ("gg", "ge", "eg", "ee")
    shots = 10_000
    meas = {}
    for setting in ("bare", "pi_l", "pi_r"):
        perm = _SETTING_PERMUTATION[setting]
        permuted = np.zeros(4)
        for si, state in enumerate(states):
            permuted[states.index(perm[state])] = pops[si]
        meas[setting] = classify_shots(
            simulate_shots(tuple(permuted), m3, shots, rng), m3)
    rec, _ = shuffle_recover(meas)
    sigma = np.sqrt(pops * (1.0 - pops) / shots)
    ok_shuffle = bool(np.all(np.abs(rec - pops) < 3.0 * sigma + 1e-3))

    ok = ok_fid and rel_mc < 0.05 and ok_shuffle
    _report("criterion 9 (joint readout)", ok,
            f"fidelity {fid:.4f} (0.921 exact), MC vs erfc rel {rel_mc:.3f} "
            f"(tol 0.05), shuffle within 3 sigma: {ok_shuffle}")


def test_c10_subharmonic(device_386):
    from paracoupler.dynamics import DensityState, SimOptions, evolve
    from paracoupler.experiments import subharmonic_scan
    from paracoupler.pulses import Envelope, PulseSchedule, PumpTone

    dev = replace(
        device_386,
        sim=replace(device_386.sim,
                    direct_drive_coupling=(TWO_PI * 1e9, 0.0)),
    )
    duration = 1e-6
    amp = 0.04
    res = subharmonic_scan(dev, (2,), amp, scan_halfwidth=TWO_PI * 16e6,
                           scan_points=17, duration=duration)
    _, best_omega, peak = res[0]

    # the same drive 50 MHz off the subharmonic must transfer nothing
    rise = min(duration / 4.0, 100e-9)
    env = Envelope.hann_edges(rise, duration - 2.0 * rise, rise)
    half = dev.dressed().omega[0] / 2.0
    tone = PumpTone(half + TWO_PI * 50e6, amp, env)
    traj = evolve(DensityState.from_label("gg", dev.levels), dev.params,
                  PulseSchedule(dev.phi_s, (tone,)), None, dev.hilbert,
                  dev.sim, duration)
    pops = np.diag(traj.final.matrix).real.reshape(dev.levels, dev.levels)
    off = float(pops[1, :].sum())

    ok = peak > 0.5 and off < 1e-3
    _report("criterion 10 (subharmonic drive)", ok,
            f"peak P = {peak:.3f} at {(best_omega - half) / TWO_PI / 1e6:+.1f}"
            f" MHz from omega_L/2 (threshold 0.5), off-resonant P = {off:.1e}"
            f" (tol 1e-3)")
