import math

import numpy as np
import pytest

from paracoupler.benchmarking import (
    DecayFit,
    NonConvergenceError,
    RBConfig,
    SignalDomainError,
    depolarizing_channel,
    fit_decay,
    interleaved_fidelity,
    run_rb,
    run_single_qubit_rb,
    signal_to_p,
)
from paracoupler.dynamics import DecoherenceParams

DEC = DecoherenceParams(t1=(16.3e-6, 16.3e-6), t2=(22.7e-6, 22.7e-6))


def test_rb_config_validation():
    with pytest.raises(ValueError):
        RBConfig(lengths=(4, 2, 8), sequences_per_length=3, seed=0)
    with pytest.raises(ValueError):
        RBConfig(lengths=(0, 2), sequences_per_length=3, seed=0)
    cfg = RBConfig(lengths=(2, 4, 8), sequences_per_length=3, seed=0)
    assert cfg.lengths == (2, 4, 8)


def test_ideal_rb_survival_is_one(device_phic):
    cfg = RBConfig(lengths=(1, 3, 6), sequences_per_length=2, seed=5,
                   single_qubit_duration=0.0)
    res = run_rb(device_phic, cfg)
    assert np.all(np.abs(res.mean_survival - 1.0) < 1e-6)


def test_rb_is_deterministic(device_phic):
    cfg = RBConfig(lengths=(2, 5), sequences_per_length=3, seed=9)
    dev = device_phic.with_decoherence(DEC)
    r1 = run_rb(dev, cfg)
    r2 = run_rb(dev, cfg)
    assert np.array_equal(r1.mean_survival, r2.mean_survival)


def test_depolarizing_stub_recovers_p(device_phic):
    p_step = 0.02
    ch = depolarizing_channel(p_step, 9)
    cfg = RBConfig(lengths=(2, 6, 12, 20, 32), sequences_per_length=4,
                   seed=1, single_qubit_duration=0.0)
    res = run_rb(device_phic, cfg, extra_channel_per_clifford=ch)
    fit = fit_decay(res)
    # per-Clifford depolarization on the full 9-level space leaves the
    # 4-dim computational survival decaying at exactly (1 - p)
    assert fit.p == pytest.approx(1.0 - p_step, abs=1e-6)


def test_fit_decay_round_trip():
    lengths = np.array([1, 4, 10, 30, 80, 160])
    a, p, c = 0.72, 0.985, 0.26
    means = a * p**lengths + c
    fit = fit_decay((lengths, means))
    assert fit.p == pytest.approx(p, abs=1e-9)
    assert fit.a == pytest.approx(a, abs=1e-9)
    assert fit.c == pytest.approx(c, abs=1e-9)
    assert fit.residual_rms < 1e-12


def test_fit_decay_with_noise():
    rng = np.random.default_rng(42)
    lengths = np.array([1, 4, 10, 30, 80, 160, 300])
    errs = []
    for _ in range(50):
        means = 0.75 * 0.99**lengths + 0.25 + rng.normal(0, 0.003, len(lengths))
        errs.append(abs(fit_decay((lengths, means)).p - 0.99))
    assert np.median(errs) < 2e-3


def test_fit_decay_needs_four_lengths():
    with pytest.raises(ValueError):
        fit_decay((np.array([1, 2, 3]), np.array([0.9, 0.8, 0.7])))


def test_fit_decay_constant_data():
    lengths = np.array([1, 5, 10, 20, 40])
    with pytest.raises(NonConvergenceError):
        fit_decay((lengths, np.full(len(lengths), 0.5)))


def test_interleaved_fidelity_oracle():
    assert interleaved_fidelity(0.97, 0.94413) == pytest.approx(0.98, abs=1e-4)
    assert interleaved_fidelity(0.9, 0.9) == pytest.approx(1.0)
    # single qubit uses the d=2 dimensional factor
    assert interleaved_fidelity(0.98, 0.96, n_qubits=1) == pytest.approx(
        1.0 - 0.5 * (1.0 - 0.96 / 0.98)
    )


def test_interleaved_fidelity_warns_when_inverted():
    with pytest.warns(UserWarning):
        interleaved_fidelity(0.9, 0.95)


def test_signal_to_p_round_trip():
    fit = DecayFit(a=0.7, p=0.98, c=0.27, covariance=np.eye(3),
                   residual_rms=0.0)
    s = 0.7 * 0.98**25 + 0.27
    assert signal_to_p(s, fit, 25) == pytest.approx(0.98, rel=1e-12)
    assert signal_to_p(0.7 * 0.9 + 0.27, fit, 1) == pytest.approx(0.9)
    with pytest.raises(SignalDomainError):
        signal_to_p(0.2, fit, 10)


def test_depolarizing_channel_action():
    ch = depolarizing_channel(0.3, 3)
    rho = np.diag([1.0, 0.0, 0.0]).astype(complex)
    out = (ch @ rho.reshape(-1)).reshape(3, 3)
    assert np.allclose(out, 0.7 * rho + 0.3 * np.eye(3) / 3)
    assert np.trace(out).real == pytest.approx(1.0)


def test_single_qubit_rb_consistency(device_phic):
    dev = device_phic.with_decoherence(DEC)
    # long sequences so the fit can separate the amplitude from the
    # asymptote
    cfg = RBConfig(lengths=(5, 40, 120, 300, 600), sequences_per_length=8,
                   seed=4)
    eps = {}
    for q in ("L", "R", "both"):
        fit = fit_decay(run_single_qubit_rb(dev, cfg, qubits=q))
        d_factor = 0.75 if q == "both" else 0.5
        eps[q] = (1.0 - fit.p) * d_factor
    # simultaneous error per layer close to the sum of the individual ones
    indiv = eps["L"] + eps["R"]
    assert eps["both"] == pytest.approx(indiv, rel=0.25)
