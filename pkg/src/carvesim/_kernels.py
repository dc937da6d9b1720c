"""Fixed-step RK4 cores for the Lindblad and no-jump propagators.

All jump operators point at one absorbing index, so the dissipator reduces
to a diagonal damping (gdiag) plus a scalar feed into the lost population.
Multi-tone driving enters as a single time-dependent scalar
f(t) = sum_j Omega_j exp(i delta_j t) applied on the fixed set of
(e_m, down_m) coupling pairs; a static single-tone Hamiltonian passes
empty tone arrays.  Compiled with numba so million-step runs stay cheap.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _tone_phase(omegas, deltas, t):
    f = 0.0 + 0.0j
    for j in range(omegas.shape[0]):
        f += omegas[j] * np.exp(1j * deltas[j] * t)
    return f


@njit(cache=True, nogil=True)
def _density_rhs(h0, e_idx, d_idx, omegas, deltas, gdiag, lost, t, rho, out):
    dim = rho.shape[0]
    g = np.dot(h0, rho)
    if omegas.shape[0] > 0:
        f = _tone_phase(omegas, deltas, t)
        fc = np.conj(f)
        for p in range(e_idx.shape[0]):
            ei = e_idx[p]
            di = d_idx[p]
            for j in range(dim):
                g[ei, j] += f * rho[di, j]
                g[di, j] += fc * rho[ei, j]
    # -i[H, rho] = -i (G - G^dag) for Hermitian rho, plus diagonal damping
    for i in range(dim):
        for j in range(dim):
            out[i, j] = (-1j * (g[i, j] - np.conj(g[j, i]))
                         - 0.5 * (gdiag[i] + gdiag[j]) * rho[i, j])
    feed = 0.0
    for i in range(dim):
        feed += gdiag[i] * rho[i, i].real
    out[lost, lost] += feed


@njit(cache=True, nogil=True)
def rk4_density(h0, e_idx, d_idx, omegas, deltas, gdiag, lost, rho0,
                dt, n_steps, sample_every, echo_step, perm):
    """Propagate a density matrix; samples every ``sample_every`` steps.

    ``echo_step`` >= 0 applies the basis permutation ``perm`` (as
    rho <- rho[perm][:, perm]) before that step executes.  Returns
    (times, samples) with n_steps // sample_every + 1 snapshots;
    n_steps must be a multiple of sample_every.
    """
    dim = rho0.shape[0]
    n_samp = n_steps // sample_every + 1
    times = np.empty(n_samp)
    samples = np.empty((n_samp, dim, dim), dtype=np.complex128)
    rho = rho0.copy()
    k1 = np.empty((dim, dim), dtype=np.complex128)
    k2 = np.empty((dim, dim), dtype=np.complex128)
    k3 = np.empty((dim, dim), dtype=np.complex128)
    k4 = np.empty((dim, dim), dtype=np.complex128)
    stage = np.empty((dim, dim), dtype=np.complex128)
    buf = np.empty((dim, dim), dtype=np.complex128)

    times[0] = 0.0
    samples[0] = rho
    s = 1
    for step in range(n_steps):
        if step == echo_step:
            for i in range(dim):
                for j in range(dim):
                    buf[i, j] = rho[perm[i], perm[j]]
            rho[:, :] = buf
        t = step * dt
        _density_rhs(h0, e_idx, d_idx, omegas, deltas, gdiag, lost, t, rho, k1)
        for i in range(dim):
            for j in range(dim):
                stage[i, j] = rho[i, j] + 0.5 * dt * k1[i, j]
        _density_rhs(h0, e_idx, d_idx, omegas, deltas, gdiag, lost,
                     t + 0.5 * dt, stage, k2)
        for i in range(dim):
            for j in range(dim):
                stage[i, j] = rho[i, j] + 0.5 * dt * k2[i, j]
        _density_rhs(h0, e_idx, d_idx, omegas, deltas, gdiag, lost,
                     t + 0.5 * dt, stage, k3)
        for i in range(dim):
            for j in range(dim):
                stage[i, j] = rho[i, j] + dt * k3[i, j]
        _density_rhs(h0, e_idx, d_idx, omegas, deltas, gdiag, lost,
                     t + dt, stage, k4)
        sixth = dt / 6.0
        for i in range(dim):
            for j in range(dim):
                rho[i, j] += sixth * (k1[i, j] + 2.0 * (k2[i, j] + k3[i, j])
                                      + k4[i, j])
        # re-Hermitize each step
        for i in range(dim):
            rho[i, i] = complex(rho[i, i].real, 0.0)
            for j in range(i + 1, dim):
                avg = 0.5 * (rho[i, j] + np.conj(rho[j, i]))
                rho[i, j] = avg
                rho[j, i] = np.conj(avg)
        if (step + 1) % sample_every == 0:
            times[s] = (step + 1) * dt
            samples[s] = rho
            s += 1
    return times, samples


@njit(cache=True, nogil=True)
def _vector_rhs(h0, e_idx, d_idx, omegas, deltas, gdiag, t, psi, out):
    dim = psi.shape[0]
    g = np.dot(h0, psi)
    if omegas.shape[0] > 0:
        f = _tone_phase(omegas, deltas, t)
        fc = np.conj(f)
        for p in range(e_idx.shape[0]):
            g[e_idx[p]] += f * psi[d_idx[p]]
            g[d_idx[p]] += fc * psi[e_idx[p]]
    for i in range(dim):
        out[i] = -1j * g[i] - 0.5 * gdiag[i] * psi[i]


@njit(cache=True, nogil=True)
def rk4_no_jump(h0, e_idx, d_idx, omegas, deltas, gdiag, psi0,
                dt, n_steps, sample_every, echo_step, perm):
    """Propagate an unnormalized pure state under H - (i/2) sum L^dag L."""
    dim = psi0.shape[0]
    n_samp = n_steps // sample_every + 1
    times = np.empty(n_samp)
    samples = np.empty((n_samp, dim), dtype=np.complex128)
    psi = psi0.copy()
    k1 = np.empty(dim, dtype=np.complex128)
    k2 = np.empty(dim, dtype=np.complex128)
    k3 = np.empty(dim, dtype=np.complex128)
    k4 = np.empty(dim, dtype=np.complex128)
    stage = np.empty(dim, dtype=np.complex128)
    buf = np.empty(dim, dtype=np.complex128)

    times[0] = 0.0
    samples[0] = psi
    s = 1
    for step in range(n_steps):
        if step == echo_step:
            for i in range(dim):
                buf[i] = psi[perm[i]]
            psi[:] = buf
        t = step * dt
        _vector_rhs(h0, e_idx, d_idx, omegas, deltas, gdiag, t, psi, k1)
        for i in range(dim):
            stage[i] = psi[i] + 0.5 * dt * k1[i]
        _vector_rhs(h0, e_idx, d_idx, omegas, deltas, gdiag,
                    t + 0.5 * dt, stage, k2)
        for i in range(dim):
            stage[i] = psi[i] + 0.5 * dt * k2[i]
        _vector_rhs(h0, e_idx, d_idx, omegas, deltas, gdiag,
                    t + 0.5 * dt, stage, k3)
        for i in range(dim):
            stage[i] = psi[i] + dt * k3[i]
        _vector_rhs(h0, e_idx, d_idx, omegas, deltas, gdiag,
                    t + dt, stage, k4)
        sixth = dt / 6.0
        for i in range(dim):
            psi[i] += sixth * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i])
        if (step + 1) % sample_every == 0:
            times[s] = (step + 1) * dt
            samples[s] = psi
            s += 1
    return times, samples
