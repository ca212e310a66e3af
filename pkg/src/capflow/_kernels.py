"""Compiled inner loop for axisymmetric runs.

The time stepper spends essentially all of its work in tiny O(N) sweeps
repeated millions of times, which is exactly the regime where the
vectorization overhead of numpy dominates.  This module holds a numba
translation of the axisym right-hand side, the Heun update, and the
per-step monitor sweep.  The numpy implementation in ``flow``/``geometry``
remains the reference; an equivalence test keeps the two in lockstep.

Everything here is deliberately scalar-looped and allocation-free inside
the step loop, with fastmath disabled so results are reproducible.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# Return flags of axisym_advance.
FLAG_TICK = 0
FLAG_CONVERGED = 1
FLAG_TMAX = 2
FLAG_NONFINITE = 3


@njit(cache=True, fastmath=False)
def _rhs(phi, F, p, v, rho, dphi, n, dbeta, cos_t, cot_theta, sinb, cosb, sin_if, mass, w, conserve):
    """Flux-form right-hand side; fills F, p, v, rho in place, returns max|F|."""
    N = phi.shape[0]
    h = dbeta
    for j in range(N):
        rho[j] = np.exp(phi[j])
    p[0] = (phi[1] - phi[0]) / (2 * h)
    for j in range(1, N - 1):
        p[j] = (phi[j + 1] - phi[j - 1]) / (2 * h)
    p[N - 1] = cot_theta
    for j in range(N):
        v[j] = np.sqrt(1.0 + p[j] * p[j])
    for k in range(N - 1):
        d = (phi[k + 1] - phi[k]) / h
        dphi[k] = sin_if[k] * d / np.sqrt(1.0 + d * d)
    F[0] = dphi[0] / mass[0]
    for j in range(1, N - 1):
        F[j] = (dphi[j] - dphi[j - 1]) / mass[j]
    q_b = (
        -16.0 / 3.0 * phi[N - 1] + 7.0 * phi[N - 2] - 2.0 * phi[N - 3] + phi[N - 4] / 3.0 + 4.0 * h * cot_theta
    ) / (h * h)
    F[N - 1] = q_b / (v[N - 1] ** 3)
    for j in range(N):
        vj = v[j]
        alg = n * vj / rho[j] * (1.0 - (cos_t / vj) * (cosb[j] + sinb[j] * p[j]) - 1.0 / (vj * vj))
        F[j] = F[j] / rho[j] + alg
    if conserve:
        num = 0.0
        den = 0.0
        for j in range(N):
            wv = w[j] * rho[j] ** (n + 1)
            num += wv * F[j]
            den += wv
        lam = num / den
        for j in range(N):
            F[j] -= lam
    m = 0.0
    for j in range(N):
        a = abs(F[j])
        if a > m:
            m = a
    return m


@njit(cache=True, fastmath=False)
def axisym_advance(
    phi,
    t,
    until_t,
    t_max,
    n,
    dbeta,
    theta,
    sinb,
    cosb,
    cotb,
    sin_if,
    mass,
    w,
    dt_safety,
    stop_tol,
    conserve,
    comb_nm1,
    comb_n,
    ball_n,
    omega,
    mono_tol,
    vk_prev,
    events,
    extrema,
    max_steps,
):
    """Advance the axisym flow in place until a tick, convergence, or t_max.

    ``vk_prev`` (length n) carries V_1 .. V_n of the last accepted step,
    ``events`` (int64, length n) the per-k monotonicity violation counts,
    ``extrema`` = [run_min_u, run_min_kappa, run_max_H] running over every
    accepted step.  Returns (t, steps_done, dt_last, max_F, flag).
    """
    N = phi.shape[0]
    cos_t = np.cos(theta)
    sin_t = np.sin(theta)
    cot_theta = cos_t / sin_t
    h = dbeta

    F = np.empty(N)
    F2 = np.empty(N)
    p = np.empty(N)
    v = np.empty(N)
    rho = np.empty(N)
    dphi = np.empty(N - 1)
    phi_star = np.empty(N)
    q = np.empty(N)
    Hk_node = np.empty(N)

    steps = 0
    dt_last = 0.0
    while True:
        max_F = _rhs(phi, F, p, v, rho, dphi, n, h, cos_t, cot_theta, sinb, cosb, sin_if, mass, w, conserve)
        if not np.isfinite(max_F):
            return t, steps, dt_last, max_F, FLAG_NONFINITE
        if max_F < stop_tol:
            return t, steps, dt_last, max_F, FLAG_CONVERGED
        if t >= t_max:
            return t, steps, dt_last, max_F, FLAG_TMAX
        if t >= until_t or steps >= max_steps:
            return t, steps, dt_last, max_F, FLAG_TICK

        # Parabolic bound: dt <= h^2 / (2 n D) with D = 1 / (rho v).
        m = rho[0] * v[0]
        for j in range(1, N):
            rv = rho[j] * v[j]
            if rv < m:
                m = rv
        dt = dt_safety * h * h * m / (2.0 * n)

        for j in range(N):
            phi_star[j] = phi[j] + dt * F[j]
        _rhs(phi_star, F2, p, v, rho, dphi, n, h, cos_t, cot_theta, sinb, cosb, sin_if, mass, w, conserve)
        ok = True
        for j in range(N):
            phi[j] += 0.5 * dt * (F[j] + F2[j])
            if not np.isfinite(phi[j]):
                ok = False
        t += dt
        steps += 1
        dt_last = dt
        if not ok:
            return t, steps, dt_last, max_F, FLAG_NONFINITE

        # Monitor sweep on the accepted state.
        for j in range(N):
            rho[j] = np.exp(phi[j])
        p[0] = (phi[1] - phi[0]) / (2 * h)
        q[0] = (phi[1] - phi[0]) / (h * h)
        for j in range(1, N - 1):
            p[j] = (phi[j + 1] - phi[j - 1]) / (2 * h)
            q[j] = (phi[j + 1] - 2.0 * phi[j] + phi[j - 1]) / (h * h)
        p[N - 1] = cot_theta
        q[N - 1] = (
            -16.0 / 3.0 * phi[N - 1] + 7.0 * phi[N - 2] - 2.0 * phi[N - 3] + phi[N - 4] / 3.0 + 4.0 * h * cot_theta
        ) / (h * h)

        area = 0.0
        min_u = np.inf
        min_k = np.inf
        max_H = -np.inf
        for j in range(N):
            vj = np.sqrt(1.0 + p[j] * p[j])
            v[j] = vj
            k_m = (vj * vj - q[j]) / (rho[j] * vj ** 3)
            k_p = (1.0 - cotb[j] * p[j]) / (rho[j] * vj)
            F2[j] = k_m  # reuse scratch: meridian curvature
            F[j] = k_p  # reuse scratch: parallel curvature
            u = rho[j] / vj
            if u < min_u:
                min_u = u
            if k_m < min_k:
                min_k = k_m
            if k_p < min_k:
                min_k = k_p
            Hj = k_m + (n - 1) * k_p
            if Hj > max_H:
                max_H = Hj
            area += w[j] * rho[j] ** n * vj
        if min_u < extrema[0]:
            extrema[0] = min_u
        if min_k < extrema[1]:
            extrema[1] = min_k
        if max_H > extrema[2]:
            extrema[2] = max_H

        Rb = rho[N - 1]
        V1 = (area - cos_t * ball_n * Rb**n) / (n + 1.0)
        if V1 > vk_prev[0] + mono_tol[0]:
            events[0] += 1
        vk_prev[0] = V1
        for k in range(2, n + 1):
            # H_{k-1} per node from the two distinct curvatures.
            for j in range(N):
                k_m = F2[j]
                k_p = F[j]
                sigma = comb_nm1[k - 1] * k_p ** (k - 1) + comb_nm1[k - 2] * k_p ** (k - 2) * k_m
                Hk_node[j] = sigma / comb_n[k - 1]
            interior = 0.0
            for j in range(N):
                interior += w[j] * rho[j] ** n * v[j] * Hk_node[j]
            ring = omega * Rb ** (n + 1 - k)
            Vk = (interior - (cos_t * sin_t ** (k - 1) / n) * ring) / (n + 1.0)
            if Vk > vk_prev[k - 1] + mono_tol[k - 1]:
                events[k - 1] += 1
            vk_prev[k - 1] = Vk
