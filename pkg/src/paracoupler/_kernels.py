"""Fixed-step RK4 inner loops, compiled with numba.

All kernels share one convention: the Hamiltonian is a fixed stack of
operators A_j with scalar coefficients c_j(t) sampled on the half-step
grid t_0 + k*dt/2 (array C of shape (2*nsteps+1, m)); step k uses rows
2k, 2k+1, 2k+2 for the three RK4 stage times. Collapse operators enter
pre-scaled: B = sqrt(rate) * L.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _assemble(h, ops, coeffs):
    d = h.shape[0]
    m = ops.shape[0]
    for a in range(d):
        for b in range(d):
            acc = 0.0 + 0.0j
            for j in range(m):
                acc += coeffs[j] * ops[j, a, b]
            h[a, b] = acc


@njit(cache=True)
def rk4_state(psi, ops, coeffs, dt):
    """Schrodinger propagation of a state vector. Mutates and returns psi."""
    d = psi.shape[0]
    nsteps = (coeffs.shape[0] - 1) // 2
    h = np.empty((d, d), dtype=np.complex128)
    for k in range(nsteps):
        _assemble(h, ops, coeffs[2 * k])
        k1 = -1j * np.dot(h, psi)
        _assemble(h, ops, coeffs[2 * k + 1])
        k2 = -1j * np.dot(h, psi + (0.5 * dt) * k1)
        k3 = -1j * np.dot(h, psi + (0.5 * dt) * k2)
        _assemble(h, ops, coeffs[2 * k + 2])
        k4 = -1j * np.dot(h, psi + dt * k3)
        psi += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return psi


@njit(cache=True)
def rk4_unitary(u, ops, coeffs, dt):
    """Propagator accumulation dU/dt = -i H(t) U. Mutates and returns u."""
    d = u.shape[0]
    nsteps = (coeffs.shape[0] - 1) // 2
    h = np.empty((d, d), dtype=np.complex128)
    for k in range(nsteps):
        _assemble(h, ops, coeffs[2 * k])
        k1 = -1j * np.dot(h, u)
        _assemble(h, ops, coeffs[2 * k + 1])
        k2 = -1j * np.dot(h, u + (0.5 * dt) * k1)
        k3 = -1j * np.dot(h, u + (0.5 * dt) * k2)
        _assemble(h, ops, coeffs[2 * k + 2])
        k4 = -1j * np.dot(h, u + dt * k3)
        u += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return u


@njit(cache=True)
def _lindblad_deriv(rho, h, cops, cdag, cdc_half):
    out = -1j * (np.dot(h, rho) - np.dot(rho, h))
    for c in range(cops.shape[0]):
        out += np.dot(np.dot(cops[c], rho), cdag[c])
        out -= np.dot(cdc_half[c], rho) + np.dot(rho, cdc_half[c])
    return out


@njit(cache=True)
def rk4_density(rho, ops, coeffs, cops, cdag, cdc_half, dt):
    """Lindblad master-equation propagation of one density matrix."""
    d = rho.shape[0]
    nsteps = (coeffs.shape[0] - 1) // 2
    h = np.empty((d, d), dtype=np.complex128)
    for k in range(nsteps):
        _assemble(h, ops, coeffs[2 * k])
        k1 = _lindblad_deriv(rho, h, cops, cdag, cdc_half)
        _assemble(h, ops, coeffs[2 * k + 1])
        k2 = _lindblad_deriv(rho + (0.5 * dt) * k1, h, cops, cdag, cdc_half)
        k3 = _lindblad_deriv(rho + (0.5 * dt) * k2, h, cops, cdag, cdc_half)
        _assemble(h, ops, coeffs[2 * k + 2])
        k4 = _lindblad_deriv(rho + dt * k3, h, cops, cdag, cdc_half)
        rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return rho


@njit(cache=True)
def rk4_superprop(phi_mat, sops, coeffs, m_const, dt):
    """Channel propagator dPhi/dt = M(t) Phi on vectorized density matrices.

    M(t) = m_const + sum_j c_j(t) sops_j; m_const carries the dissipator.
    """
    dd = phi_mat.shape[0]
    nsteps = (coeffs.shape[0] - 1) // 2
    m = np.empty((dd, dd), dtype=np.complex128)
    msops = sops.shape[0]
    for k in range(nsteps):
        for a in range(dd):
            for b in range(dd):
                acc = m_const[a, b]
                for j in range(msops):
                    acc += coeffs[2 * k, j] * sops[j, a, b]
                m[a, b] = acc
        k1 = np.dot(m, phi_mat)
        for a in range(dd):
            for b in range(dd):
                acc = m_const[a, b]
                for j in range(msops):
                    acc += coeffs[2 * k + 1, j] * sops[j, a, b]
                m[a, b] = acc
        k2 = np.dot(m, phi_mat + (0.5 * dt) * k1)
        k3 = np.dot(m, phi_mat + (0.5 * dt) * k2)
        for a in range(dd):
            for b in range(dd):
                acc = m_const[a, b]
                for j in range(msops):
                    acc += coeffs[2 * k + 2, j] * sops[j, a, b]
                m[a, b] = acc
        k4 = np.dot(m, phi_mat + dt * k3)
        phi_mat += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return phi_mat
