import math

import numpy as np
import pytest

from paracoupler.circuit import zz_static
from paracoupler.experiments import (
    SweepGrid,
    chevron_scan,
    cross_ramsey,
    cross_ramsey_zz,
    decoherence_limit,
    subharmonic_scan,
    zeta_parametric,
)

TWO_PI = 2.0 * math.pi


def test_sweep_grid_validation():
    with pytest.raises(ValueError):
        SweepGrid(("x", 0.0, 1.0, 1))
    with pytest.raises(ValueError):
        SweepGrid(("x", 1.0, 0.0, 5))
    g = SweepGrid(("x", 0.0, 1.0, 5))
    assert np.allclose(g.values1(), np.linspace(0.0, 1.0, 5))
    with pytest.raises(ValueError):
        g.values2()


def test_zeta_parametric_is_zz_formula():
    args = (TWO_PI * 5e6, TWO_PI * 0.6e9, -TWO_PI * 0.21e9, -TWO_PI * 0.22e9)
    assert zeta_parametric(*args) == zz_static(*args)


def test_zeta_parametric_sign():
    # red-detuned pump (delta_p < |alpha|) flips the sign relative to
    # the far-detuned limit
    a_l = -TWO_PI * 0.21e9
    a_r = -TWO_PI * 0.22e9
    far = zeta_parametric(TWO_PI * 5e6, TWO_PI * 2e9, a_l, a_r)
    near = zeta_parametric(TWO_PI * 5e6, TWO_PI * 0.1e9, a_l, a_r)
    assert far * near < 0


def test_cross_ramsey_zz_matches_dressed_zeta(device_386):
    zeta = cross_ramsey_zz(device_386, 20e-9)
    assert zeta == pytest.approx(device_386.dressed().zeta, rel=0.05)


def test_cross_ramsey_contrast(device_386):
    res = cross_ramsey(device_386, "L", False, 20e-9)
    assert res.contrast > 0.9
    assert res.residual_rms < 0.05


def test_cross_ramsey_rejects_bad_delay(device_386):
    with pytest.raises(ValueError):
        cross_ramsey(device_386, "L", False, 0.0)


def test_chevron_peak_on_resonance(device_phic):
    dev = device_phic
    center = dev.dressed().transition("ge", "eg")
    grid = SweepGrid(("detuning", 0.0, 1.0, 5), ("time", 0.0, 1.0, 5))
    cm = chevron_scan(dev, center, TWO_PI * 20e6, 50e-9, grid, 0.01)
    assert cm.populations.shape == (5, 5)
    row, _ = np.unravel_index(int(cm.populations.argmax()),
                              cm.populations.shape)
    assert row == 2  # zero detuning transfers best
    assert cm.populations.max() > 0.9


def test_chevron_csv(tmp_path, device_phic):
    dev = device_phic
    center = dev.dressed().transition("ge", "eg")
    grid = SweepGrid(("detuning", 0.0, 1.0, 2), ("time", 0.0, 1.0, 2))
    cm = chevron_scan(dev, center, TWO_PI * 10e6, 10e-9, grid, 0.005)
    path = tmp_path / "chevron.csv"
    cm.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "detuning_rad_s,t,population"
    assert len(lines) == 1 + 4


def test_subharmonic_requires_drive_coupling(device_386):
    with pytest.raises(ValueError):
        subharmonic_scan(device_386, (2,), 0.01)


def test_decoherence_limit_values():
    lim = decoherence_limit(70e-9, 16.3e-6, 22.7e-6)
    assert lim.error == pytest.approx(4.185e-3, rel=1e-3)
    assert lim.best_case == pytest.approx(0.8 * 70e-9 / 16.3e-6, rel=1e-12)
    lim2 = decoherence_limit(30e-9, 36e-6, 36e-6)
    assert lim2.t2_equals_t1 == pytest.approx(1.0e-3, rel=1e-9)


def test_decoherence_limit_limiting_cases():
    # the general formula reduces to the named special cases
    t1 = 20e-6
    lim = decoherence_limit(100e-9, t1, 2.0 * t1)
    assert lim.error == pytest.approx(lim.best_case, rel=1e-12)
    lim = decoherence_limit(100e-9, t1, t1)
    assert lim.error == pytest.approx(lim.t2_equals_t1, rel=1e-12)
    assert lim.best_case < lim.t2_equals_t1


def test_decoherence_limit_validation():
    with pytest.raises(ValueError):
        decoherence_limit(100e-9, 0.0, 1e-6)
