"""Compiled inner loops.

Each kernel consumes Hamiltonian entries tabulated in advance along the path,
so the loops only do 2x2 complex arithmetic.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def cayley_apply(a, d, b, tau, p0, p1):
    # (I + i tau H)^-1 (I - i tau H) psi for H = [[a, b], [conj(b), d]]
    itb = 1j * tau * b
    itbc = 1j * tau * np.conj(b)
    q0 = (1.0 - 1j * tau * a) * p0 - itb * p1
    q1 = -itbc * p0 + (1.0 - 1j * tau * d) * p1
    det = (1.0 + 1j * tau * a) * (1.0 + 1j * tau * d) + tau * tau * (b.real * b.real + b.imag * b.imag)
    r0 = ((1.0 + 1j * tau * d) * q0 - itb * q1) / det
    r1 = (-itbc * q0 + (1.0 + 1j * tau * a) * q1) / det
    return r0, r1


@njit(cache=True, nogil=True)
def cn_propagate(h00, h11, h01, dts, psi0, sample_idx):
    """Crank-Nicolson over tabulated midpoint entries; returns states at ``sample_idx``."""
    n = h00.shape[0]
    out = np.empty((sample_idx.shape[0], 2), dtype=np.complex128)
    p0 = psi0[0]
    p1 = psi0[1]
    j = 0
    if sample_idx[0] == 0:
        out[0, 0] = p0
        out[0, 1] = p1
        j = 1
    for k in range(n):
        p0, p1 = cayley_apply(h00[k], h11[k], h01[k], 0.5 * dts[k], p0, p1)
        if j < sample_idx.shape[0] and sample_idx[j] == k + 1:
            out[j, 0] = p0
            out[j, 1] = p1
            j += 1
    return out


@njit(cache=True, nogil=True)
def _hpsi(a, d, b, p0, p1):
    # -i H psi
    return -1j * (a * p0 + b * p1), -1j * (np.conj(b) * p0 + d * p1)


@njit(cache=True, nogil=True)
def rk4_propagate(n00, n11, n01, m00, m11, m01, dts, psi0, sample_idx):
    """Classical RK4 for i dpsi/dt = H psi; ``n*`` at nodes, ``m*`` at step midpoints."""
    n = m00.shape[0]
    out = np.empty((sample_idx.shape[0], 2), dtype=np.complex128)
    p0 = psi0[0]
    p1 = psi0[1]
    j = 0
    if sample_idx[0] == 0:
        out[0, 0] = p0
        out[0, 1] = p1
        j = 1
    for k in range(n):
        h = dts[k]
        k10, k11 = _hpsi(n00[k], n11[k], n01[k], p0, p1)
        k20, k21 = _hpsi(m00[k], m11[k], m01[k], p0 + 0.5 * h * k10, p1 + 0.5 * h * k11)
        k30, k31 = _hpsi(m00[k], m11[k], m01[k], p0 + 0.5 * h * k20, p1 + 0.5 * h * k21)
        k40, k41 = _hpsi(n00[k + 1], n11[k + 1], n01[k + 1], p0 + h * k30, p1 + h * k31)
        p0 = p0 + h / 6.0 * (k10 + 2.0 * k20 + 2.0 * k30 + k40)
        p1 = p1 + h / 6.0 * (k11 + 2.0 * k21 + 2.0 * k31 + k41)
        if j < sample_idx.shape[0] and sample_idx[j] == k + 1:
            out[j, 0] = p0
            out[j, 1] = p1
            j += 1
    return out


@njit(cache=True, nogil=True)
def rk4_coupled_pair(f01_nodes, f10_nodes, f01_mids, f10_mids, dts, c0, c1):
    """RK4 for dc0/dt = f01(t) c1, dc1/dt = f10(t) c0; returns the final pair."""
    n = dts.shape[0]
    for k in range(n):
        h = dts[k]
        a0 = f01_nodes[k] * c1
        a1 = f10_nodes[k] * c0
        b0 = f01_mids[k] * (c1 + 0.5 * h * a1)
        b1 = f10_mids[k] * (c0 + 0.5 * h * a0)
        d0 = f01_mids[k] * (c1 + 0.5 * h * b1)
        d1 = f10_mids[k] * (c0 + 0.5 * h * b0)
        e0 = f01_nodes[k + 1] * (c1 + h * d1)
        e1 = f10_nodes[k + 1] * (c0 + h * d0)
        c0 = c0 + h / 6.0 * (a0 + 2.0 * b0 + 2.0 * d0 + e0)
        c1 = c1 + h / 6.0 * (a1 + 2.0 * b1 + 2.0 * d1 + e1)
    return c0, c1
