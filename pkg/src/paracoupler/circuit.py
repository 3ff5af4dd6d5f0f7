"""Closed-form flux-dependent device model.

Two fixed-frequency transmons share a flux-tunable SQUID inductance. All
flux arguments are dimensionless (units of the flux quantum), all rates and
frequencies are angular (rad/s). Every quantity here is a pure function of
the lumped-element parameters and the flux bias, so the module doubles as
the coefficient source for time-dependent simulations: the functions accept
numpy arrays of flux values transparently.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from typing import NamedTuple

import numpy as np
from scipy.constants import e as ELEMENTARY_CHARGE, hbar as HBAR

TWO_PI = 2.0 * math.pi

# central finite-difference step for flux derivatives
FD_STEP = 1e-5

# |denominator factor| below this raises DivergenceError in zz_static
ZZ_DIVERGENCE_TOL = TWO_PI * 1e6

_QUBIT_INDEX = {"L": 0, "R": 1, 0: 0, 1: 1}


class DivergenceError(ValueError):
    """A perturbative denominator sits too close to a resonance."""


class NoSignChangeError(ValueError):
    """g_s does not cross zero on the searched flux interval."""


@dataclass(frozen=True)
class CircuitParams:
    """Fitted lumped-element values defining the device.

    Inductances in henries, capacitances in farads. ``squid_asymmetry`` is
    the effective-inductance modulation parameter of the asymmetric SQUID
    (0 would be a symmetric SQUID, diverging at half flux).
    """

    qubit_junction_inductance: tuple[float, float]
    geometric_inductance: tuple[float, float]
    shunt_capacitance: tuple[float, float]
    mutual_capacitance: float
    squid_inductance_zero_flux: float
    squid_asymmetry: float
    anharmonicity_exponent: float = 2.0

    def __post_init__(self):
        values = (
            *self.qubit_junction_inductance,
            *self.geometric_inductance,
            *self.shunt_capacitance,
            self.mutual_capacitance,
            self.squid_inductance_zero_flux,
        )
        if not all(v > 0 for v in values):
            raise ValueError("inductances and capacitances must be positive")
        if not 0.0 <= self.squid_asymmetry < 1.0:
            raise ValueError("squid_asymmetry must lie in [0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["qubit_junction_inductance"] = list(self.qubit_junction_inductance)
        d["geometric_inductance"] = list(self.geometric_inductance)
        d["shunt_capacitance"] = list(self.shunt_capacitance)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CircuitParams":
        return cls(
            qubit_junction_inductance=tuple(d["qubit_junction_inductance"]),
            geometric_inductance=tuple(d["geometric_inductance"]),
            shunt_capacitance=tuple(d["shunt_capacitance"]),
            mutual_capacitance=d["mutual_capacitance"],
            squid_inductance_zero_flux=d["squid_inductance_zero_flux"],
            squid_asymmetry=d["squid_asymmetry"],
            anharmonicity_exponent=d.get("anharmonicity_exponent", 2.0),
        )

    @classmethod
    def from_json(cls, path) -> "CircuitParams":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass(frozen=True)
class FluxBias:
    """External flux in units of the flux quantum."""

    phi: float

    def __post_init__(self):
        if not math.isfinite(self.phi):
            raise ValueError("flux bias must be finite")


@dataclass(frozen=True)
class DerivedSpectrum:
    """Static spectrum quantities at one flux bias (all rad/s)."""

    omega: tuple[float, float]
    anharmonicity: tuple[float, float]
    g_inductive: float
    g_capacitive: float
    g_static: float
    zeta_static: float

    @property
    def delta(self) -> float:
        return self.omega[1] - self.omega[0]


class ParametricStrength(NamedTuple):
    g_p: float
    slope_estimate: float


def _phi(bias) -> float:
    return bias.phi if isinstance(bias, FluxBias) else bias


def squid_inductance(params: CircuitParams, bias):
    """Effective SQUID inductance L_s(phi), normalized to the zero-flux value.

    Periodic with period 1 and even in phi; the asymmetry keeps it finite
    at half flux.
    """
    phi = _phi(bias)
    c = np.cos(np.pi * phi)
    s = np.sin(np.pi * phi)
    g = params.squid_asymmetry
    return params.squid_inductance_zero_flux / np.sqrt(c * c + g * g * s * s)


def charging_energy(params: CircuitParams, k) -> float:
    """E_c = e^2 / 2C in joules for qubit k."""
    i = _QUBIT_INDEX[k]
    return ELEMENTARY_CHARGE**2 / (2.0 * params.shunt_capacitance[i])


def transmon_frequency(params: CircuitParams, k, bias):
    """omega_k(phi) = 1/sqrt((L_k + L_geo,k + L_s(phi)) C_k) - E_ck/hbar."""
    i = _QUBIT_INDEX[k]
    l_tot = (
        params.qubit_junction_inductance[i]
        + params.geometric_inductance[i]
        + squid_inductance(params, bias)
    )
    return 1.0 / np.sqrt(l_tot * params.shunt_capacitance[i]) - charging_energy(
        params, k
    ) / HBAR


def anharmonicity(params: CircuitParams, k, bias):
    """alpha_k(phi) = -(E_ck/hbar) p^n, junction participation p < 1.

    The series linear inductance dilutes the junction nonlinearity, so
    |alpha| shrinks as L_s grows toward half flux.
    """
    i = _QUBIT_INDEX[k]
    lj = params.qubit_junction_inductance[i]
    p = lj / (lj + params.geometric_inductance[i] + squid_inductance(params, bias))
    return -(charging_energy(params, k) / HBAR) * p**params.anharmonicity_exponent


def static_couplings(params: CircuitParams, bias):
    """Return (g_L, g_C, g_s) at the given flux, g_s = g_L - g_C."""
    ls = squid_inductance(params, bias)
    w_l = transmon_frequency(params, "L", bias)
    w_r = transmon_frequency(params, "R", bias)
    wgeo = np.sqrt(w_l * w_r)
    l_l, l_r = params.qubit_junction_inductance
    gl = 0.5 * ls / np.sqrt((l_l + ls) * (l_r + ls)) * wgeo
    c_l, c_r = params.shunt_capacitance
    c_m = params.mutual_capacitance
    gc = 0.5 * c_m / math.sqrt((c_l + c_m) * (c_r + c_m)) * wgeo
    return gl, gc, gl - gc


def zz_static(g_s, delta, alpha_L, alpha_R, divergence_tol: float = ZZ_DIVERGENCE_TOL):
    """Second-order static ZZ: zeta = 2 g_s^2 (a_L + a_R) / ((D - a_L)(D + a_R))."""
    d1 = delta - alpha_L
    d2 = delta + alpha_R
    if np.any(np.abs(d1) < divergence_tol) or np.any(np.abs(d2) < divergence_tol):
        raise DivergenceError("ZZ denominator straddles a two-photon resonance")
    return 2.0 * g_s**2 * (alpha_L + alpha_R) / (d1 * d2)


def coupling_slope(params: CircuitParams, bias, step: float = FD_STEP) -> float:
    """d g_s / d phi by central finite difference."""
    phi = _phi(bias)
    gp = static_couplings(params, phi + step)[2]
    gm = static_couplings(params, phi - step)[2]
    return (gp - gm) / (2.0 * step)


def parametric_strength(
    params: CircuitParams, bias, pump_amplitude: float
) -> ParametricStrength:
    """Parametric coupling g_p = |dg_s/dphi| * delta_phi_p / 2.

    Also returns the slope-product estimate
    sqrt(|omega_L'| |omega_R'|) * delta_phi_p / 2 as a cross-check.
    """
    if pump_amplitude < 0:
        raise ValueError("pump amplitude must be nonnegative")
    phi = _phi(bias)
    g_p = 0.5 * abs(coupling_slope(params, phi)) * pump_amplitude

    def slope(k):
        wp = transmon_frequency(params, k, phi + FD_STEP)
        wm = transmon_frequency(params, k, phi - FD_STEP)
        return (wp - wm) / (2.0 * FD_STEP)

    estimate = 0.5 * math.sqrt(abs(slope("L")) * abs(slope("R"))) * pump_amplitude
    return ParametricStrength(g_p, estimate)


def flux_dephasing_rate(
    params: CircuitParams, k, bias, sqrt_a_flux: float, ir_cutoff: float, tau: float
) -> float:
    """1/f flux-noise dephasing Gamma_phi = dphi * |domega_k/dphi|.

    ``sqrt_a_flux`` is the noise amplitude in units of the flux quantum,
    ``ir_cutoff`` the infrared cutoff (rad/s), ``tau`` the experiment time.
    """
    if tau <= 0 or ir_cutoff <= 0:
        raise ValueError("tau and ir_cutoff must be positive")
    phi = _phi(bias)
    wp = transmon_frequency(params, k, phi + FD_STEP)
    wm = transmon_frequency(params, k, phi - FD_STEP)
    slope = (wp - wm) / (2.0 * FD_STEP)
    dphi = sqrt_a_flux * math.sqrt(abs(math.log(ir_cutoff * tau)))
    return dphi * abs(slope)


def cancellation_flux(params: CircuitParams) -> FluxBias:
    """Flux where g_s(phi) = 0, found by bisection on (0, 0.5).

    Raises NoSignChangeError when the inductive coupling never overtakes
    the capacitive one.
    """
    lo, hi = 1e-6, 0.5
    f = lambda p: static_couplings(params, p)[2]
    flo, fhi = f(lo), f(hi)
    if flo * fhi > 0:
        raise NoSignChangeError("g_s does not change sign on (0, 0.5)")
    while True:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) < TWO_PI * 1e3:
            return FluxBias(mid)
        if flo * fm <= 0:
            hi = mid
        else:
            lo, flo = mid, fm


def derived_spectrum(params: CircuitParams, bias) -> DerivedSpectrum:
    """Bundle the closed-form spectrum quantities at one flux bias."""
    w = (transmon_frequency(params, "L", bias), transmon_frequency(params, "R", bias))
    a = (anharmonicity(params, "L", bias), anharmonicity(params, "R", bias))
    gl, gc, gs = static_couplings(params, bias)
    delta = w[1] - w[0]
    try:
        zeta = zz_static(gs, delta, a[0], a[1])
    except DivergenceError:
        zeta = math.nan
    return DerivedSpectrum(
        omega=w,
        anharmonicity=a,
        g_inductive=gl,
        g_capacitive=gc,
        g_static=gs,
        zeta_static=zeta,
    )
