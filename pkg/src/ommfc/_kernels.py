"""Compiled inner loops: RK4 rollout and the reverse-mode sweep of the LMO cost.

Dynamics codes: 0 = single integrator, 1 = Keplerian two-body with thrust.
Terminal codes: 0 = coef*|p - target|^2, 1 = coef*(|p| - radius)^2.
"""
import math

import numpy as np
from numba import njit

SINGLE_INTEGRATOR = 0
KEPLERIAN = 1


@njit(cache=True, nogil=True, error_model="numpy")
def drift_into(kind, mu, x, u, out):
    if kind == SINGLE_INTEGRATOR:
        for i in range(u.shape[0]):
            out[i] = u[i]
        return
    r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
    r = math.sqrt(r2)
    s = -mu / (r2 * r)
    for i in range(3):
        out[i] = x[3 + i]
        out[3 + i] = s * x[i] + u[i]


@njit(cache=True, nogil=True, error_model="numpy")
def _vjp_into(kind, mu, x, lam, gx, gu):
    """gx = (df/dx)^T lam, gu = (df/du)^T lam."""
    if kind == SINGLE_INTEGRATOR:
        for i in range(lam.shape[0]):
            gx[i] = 0.0
            gu[i] = lam[i]
        return
    r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
    r = math.sqrt(r2)
    inv3 = 1.0 / (r2 * r)
    inv5 = inv3 / r2
    rl = x[0] * lam[3] + x[1] * lam[4] + x[2] * lam[5]
    for i in range(3):
        gx[i] = -mu * (lam[3 + i] * inv3 - 3.0 * x[i] * rl * inv5)
        gx[3 + i] = lam[i]
        gu[i] = lam[3 + i]


@njit(cache=True, nogil=True, error_model="numpy")
def _rk4_stages(kind, mu, x, u, h, y2, y3, y4, k1, k2, k3, k4):
    n = x.shape[0]
    drift_into(kind, mu, x, u, k1)
    for i in range(n):
        y2[i] = x[i] + 0.5 * h * k1[i]
    drift_into(kind, mu, y2, u, k2)
    for i in range(n):
        y3[i] = x[i] + 0.5 * h * k2[i]
    drift_into(kind, mu, y3, u, k3)
    for i in range(n):
        y4[i] = x[i] + h * k3[i]
    drift_into(kind, mu, y4, u, k4)


@njit(cache=True, nogil=True, error_model="numpy")
def rollout_into(kind, mu, x0, U, dt, X):
    """Fill X (N+1, nx) with the RK4 trajectory. Returns -1, or the first step
    index whose result is non-finite."""
    n_steps = U.shape[0]
    nx = x0.shape[0]
    y2 = np.empty(nx)
    y3 = np.empty(nx)
    y4 = np.empty(nx)
    k1 = np.empty(nx)
    k2 = np.empty(nx)
    k3 = np.empty(nx)
    k4 = np.empty(nx)
    for i in range(nx):
        X[0, i] = x0[i]
    if kind == 0:
        # RK4 reduces to x + dt*u here; summing controls first keeps
        # constant-control trajectories exact
        for i in range(nx):
            acc = 0.0
            for n in range(n_steps):
                acc += U[n, i]
                v = x0[i] + dt * acc
                if not math.isfinite(v):
                    return n
                X[n + 1, i] = v
        return -1
    for n in range(n_steps):
        _rk4_stages(kind, mu, X[n], U[n], dt, y2, y3, y4, k1, k2, k3, k4)
        for i in range(nx):
            v = X[n, i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not math.isfinite(v):
                return n
            X[n + 1, i] = v
    return -1


@njit(cache=True, nogil=True, error_model="numpy")
def _running_pos_terms(p, n, obs_c, obs_r, obs_g, lam2, inv2s2, Y, w, grad):
    """Obstacle + frozen-interaction running cost at position p, time index n.
    Writes the gradient w.r.t. p into grad."""
    d = p.shape[0]
    val = 0.0
    for i in range(d):
        grad[i] = 0.0
    for k in range(obs_c.shape[0]):
        dist2 = 0.0
        for i in range(d):
            diff = p[i] - obs_c[k, i]
            dist2 += diff * diff
        dist = math.sqrt(dist2)
        pen = obs_r[k] - dist
        if pen > 0.0:
            val += obs_g[k] * pen * pen
            if dist > 0.0:
                s = -2.0 * obs_g[k] * pen / dist
                for i in range(d):
                    grad[i] += s * (p[i] - obs_c[k, i])
    if lam2 != 0.0:
        acc = 0.0
        for q in range(w.shape[0]):
            dist2 = 0.0
            for i in range(d):
                diff = p[i] - Y[n, q, i]
                dist2 += diff * diff
            e = w[q] * math.exp(-dist2 * inv2s2)
            acc += e
            s = -2.0 * inv2s2 * lam2 * e
            for i in range(d):
                grad[i] += s * (p[i] - Y[n, q, i])
        val += lam2 * acc
    return val


@njit(cache=True, nogil=True, error_model="numpy")
def _terminal(p, term_kind, term_coef, target, radius, grad):
    d = p.shape[0]
    if term_kind == 0:
        val = 0.0
        for i in range(d):
            diff = p[i] - target[i]
            val += diff * diff
            grad[i] = 2.0 * term_coef * diff
        return term_coef * val
    r2 = 0.0
    for i in range(d):
        r2 += p[i] * p[i]
    r = math.sqrt(r2)
    e = r - radius
    for i in range(d):
        grad[i] = 2.0 * term_coef * e * p[i] / r if r > 0.0 else 0.0
    return term_coef * e * e


@njit(cache=True, nogil=True, error_model="numpy")
def lmo_value_grad(kind, mu, x0, U, dt, pos_dim, ctrl_coef,
                   obs_c, obs_r, obs_g, term_kind, term_coef, target, radius,
                   lam2, inv2s2, Y, w, X, G, want_grad):
    """Discrete LMO cost  dt*sum_n g(t_n, x_n, u_n) + Psi(x_N)  and its exact
    gradient w.r.t. every control (written into G when want_grad).

    X receives the rollout. Returns nan if the rollout leaves the finite range.
    """
    n_steps, nu = U.shape
    nx = x0.shape[0]
    if rollout_into(kind, mu, x0, U, dt, X) >= 0:
        return np.nan

    gpos = np.zeros((n_steps, pos_dim))
    tmp = np.empty(pos_dim)
    total = 0.0
    for n in range(n_steps):
        uu = 0.0
        for j in range(nu):
            uu += U[n, j] * U[n, j]
        run = ctrl_coef * uu + _running_pos_terms(X[n, :pos_dim], n, obs_c, obs_r, obs_g,
                                                   lam2, inv2s2, Y, w, tmp)
        for i in range(pos_dim):
            gpos[n, i] = tmp[i]
        total += run
    total *= dt
    total += _terminal(X[n_steps, :pos_dim], term_kind, term_coef, target, radius, tmp)
    if not want_grad:
        return total

    lam = np.zeros(nx)
    for i in range(pos_dim):
        lam[i] = tmp[i]
    y2 = np.empty(nx)
    y3 = np.empty(nx)
    y4 = np.empty(nx)
    k1 = np.empty(nx)
    k2 = np.empty(nx)
    k3 = np.empty(nx)
    k4 = np.empty(nx)
    g1 = np.empty(nx)
    g2 = np.empty(nx)
    g3 = np.empty(nx)
    g4 = np.empty(nx)
    gx = np.empty(nx)
    gu = np.zeros(nu)
    a = np.empty(nx)
    b = np.empty(nu)
    h = dt
    for n in range(n_steps - 1, -1, -1):
        xn = X[n]
        un = U[n]
        _rk4_stages(kind, mu, xn, un, h, y2, y3, y4, k1, k2, k3, k4)
        for i in range(nx):
            g1[i] = h / 6.0 * lam[i]
            g2[i] = h / 3.0 * lam[i]
            g3[i] = h / 3.0 * lam[i]
            g4[i] = h / 6.0 * lam[i]
            gx[i] = lam[i]
        for j in range(nu):
            gu[j] = 0.0
        # k4 = f(x + h k3)
        _vjp_into(kind, mu, y4, g4, a, b)
        for i in range(nx):
            gx[i] += a[i]
            g3[i] += h * a[i]
        for j in range(nu):
            gu[j] += b[j]
        # k3 = f(x + h/2 k2)
        _vjp_into(kind, mu, y3, g3, a, b)
        for i in range(nx):
            gx[i] += a[i]
            g2[i] += 0.5 * h * a[i]
        for j in range(nu):
            gu[j] += b[j]
        # k2 = f(x + h/2 k1)
        _vjp_into(kind, mu, y2, g2, a, b)
        for i in range(nx):
            gx[i] += a[i]
            g1[i] += 0.5 * h * a[i]
        for j in range(nu):
            gu[j] += b[j]
        # k1 = f(x)
        _vjp_into(kind, mu, xn, g1, a, b)
        for i in range(nx):
            gx[i] += a[i]
        for j in range(nu):
            gu[j] += b[j]

        for j in range(nu):
            G[n, j] = gu[j] + dt * 2.0 * ctrl_coef * un[j]
        for i in range(nx):
            lam[i] = gx[i]
        for i in range(pos_dim):
            lam[i] += dt * gpos[n, i]
    return total
