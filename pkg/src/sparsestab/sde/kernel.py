"""Euler-Maruyama path kernel.

One kernel serves both the linear closed loop and the nonlinear swing model;
only the drift and the frequency read-out differ.  Paths are independent and
write into their own rows, so the result does not depend on scheduling.
"""

from __future__ import annotations

import os

import numba as nb
import numpy as np

from .philox import normal_pair

OVERFLOW = 1e150

if "NUMBA_THREADING_LAYER" not in os.environ:
    # the bundled TBB is often too old and numba warns before falling back
    nb.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@nb.njit(cache=True, inline="always")
def _swing_rates(x, Pbus, gen_idx, ang_idx, R, Dbus, is_load, li, lj, lK, lth, Pe, rate):
    ng = gen_idx.size
    nbus = Pbus.size
    delta = np.zeros(nbus)
    for a in range(ang_idx.size):
        delta[ang_idx[a]] = x[ng + a]
    for b in range(nbus):
        Pe[b] = 0.0
    for k in range(li.size):
        Pe[li[k]] += lK[k] * np.cos(delta[li[k]] - delta[lj[k]] - lth[k])
    for b in range(nbus):
        if is_load[b]:
            rate[b] = (Pbus[b] - Pe[b]) / Dbus[b]
        else:
            rate[b] = 0.0
    for g in range(ng):
        rate[gen_idx[g]] = x[g]


@nb.njit(cache=True, parallel=True)
def run_paths(path0, N, dt, k0, k1, z0,
              A, Bm, Cm, sig, Fd, Ba,
              seg_step, seg_drift, seg_foff, Ff,
              nonlinear, x_e, P0, inj, gen_idx, ang_idx, R, Mg, Dg, Dbus, is_load,
              li, lj, lK, lth,
              rec_steps, stat_from, sample_idx,
              out_sq, out_traj, out_freq, fsum, fsq, fmin, fmax, umax, fsamp,
              terminal, trunc_step):
    npaths = out_sq.shape[0]
    n = A.shape[0]
    m = Bm.shape[1]
    q = Ba.shape[1]
    nf = fsum.shape[1]
    nrec = rec_steps.size
    sdt = np.sqrt(dt)
    keep_traj = out_traj.shape[0] > 0
    ng = gen_idx.size
    nbus = P0.size
    mult_on = np.zeros(m, dtype=np.bool_)
    for i in range(m):
        if sig[i] != 0.0:
            mult_on[i] = True
        for r in range(n):
            if Fd[r, i] != 0.0:
                mult_on[i] = True
    for pp in nb.prange(npaths):
        path = path0 + pp
        z = z0.copy()
        dz = np.empty(n)
        u = np.empty(m)
        dW = np.zeros(m)
        dZ = np.zeros(q)
        f = np.empty(nf)
        Pbus = np.empty(nbus)
        Pe = np.empty(nbus)
        rate = np.empty(nbus)
        x = np.empty(n)
        seg = 0
        r = 0
        for i in range(nf):
            fmin[pp, i] = np.inf
            fmax[pp, i] = -np.inf
            fsum[pp, i] = 0.0
            fsq[pp, i] = 0.0
        for i in range(m):
            umax[pp, i] = 0.0
        trunc_step[pp] = -1
        for k in range(N + 1):
            while seg + 1 < seg_step.size and seg_step[seg + 1] <= k:
                seg += 1
            # u = K C z (control is -u); for the nonlinear model z = x - x_e
            for i in range(m):
                acc = 0.0
                for c in range(n):
                    acc += Cm[i, c] * z[c]
                u[i] = acc
                if abs(acc) > umax[pp, i]:
                    umax[pp, i] = abs(acc)
            if nonlinear:
                for c in range(n):
                    x[c] = x_e[c] + z[c]
                for b in range(nbus):
                    Pbus[b] = P0[b] + seg_drift[seg, b]
                for i in range(m):
                    Pbus[inj[i]] -= u[i]
                _swing_rates(x, Pbus, gen_idx, ang_idx, R, Dbus, is_load,
                             li, lj, lK, lth, Pe, rate)
                for b in range(nf):
                    f[b] = rate[b]
            else:
                for b in range(nf):
                    acc = seg_foff[seg, b]
                    for c in range(n):
                        acc += Ff[b, c] * z[c]
                    f[b] = acc
            for b in range(nf):
                if f[b] < fmin[pp, b]:
                    fmin[pp, b] = f[b]
                if f[b] > fmax[pp, b]:
                    fmax[pp, b] = f[b]
            if r < nrec and rec_steps[r] == k:
                s2 = 0.0
                for c in range(n):
                    s2 += z[c] * z[c]
                out_sq[pp, r] = s2
                if keep_traj:
                    for c in range(n):
                        out_traj[pp, r, c] = z[c]
                    for b in range(nf):
                        out_freq[pp, r, b] = f[b]
                if r >= stat_from:
                    for b in range(nf):
                        fsum[pp, b] += f[b]
                        fsq[pp, b] += f[b] * f[b]
                    for j in range(sample_idx.size):
                        fsamp[pp, r - stat_from, j] = f[sample_idx[j]]
                r += 1
            if k == N:
                break
            # drift
            if nonlinear:
                for g in range(ng):
                    gb = gen_idx[g]
                    dz[g] = (Pbus[gb] - Pe[gb] - Dg[g] * x[g]) / Mg[g]
                for a in range(ang_idx.size):
                    dz[ng + a] = rate[ang_idx[a]] - rate[R]
            else:
                for c in range(n):
                    acc = 0.0
                    for d in range(n):
                        acc += A[c, d] * z[d]
                    dz[c] = acc + seg_drift[seg, c]
            for c in range(n):
                dz[c] *= dt
            # multiplicative channels: the realized control is -(1 + sigma xi) u
            for pr in range((m + 1) // 2):
                if not (mult_on[2 * pr] or (2 * pr + 1 < m and mult_on[2 * pr + 1])):
                    continue
                a0, a1 = normal_pair(k, pr, path, 0, k0, k1)
                dW[2 * pr] = sdt * a0
                if 2 * pr + 1 < m:
                    dW[2 * pr + 1] = sdt * a1
            for i in range(m):
                if not mult_on[i]:
                    continue
                coef = -sig[i] * u[i] * dW[i]
                for c in range(n):
                    dz[c] += Bm[c, i] * coef + Fd[c, i] * dW[i]
            for pr in range((q + 1) // 2):
                a0, a1 = normal_pair(k, pr, path, 1, k0, k1)
                dZ[2 * pr] = sdt * a0
                if 2 * pr + 1 < q:
                    dZ[2 * pr + 1] = sdt * a1
            for j in range(q):
                for c in range(n):
                    dz[c] += Ba[c, j] * dZ[j]
            bad = False
            for c in range(n):
                z[c] += dz[c]
                if not (abs(z[c]) < OVERFLOW):
                    bad = True
            if bad:
                trunc_step[pp] = k + 1
                while r < nrec:
                    out_sq[pp, r] = np.inf
                    if keep_traj:
                        for c in range(n):
                            out_traj[pp, r, c] = np.nan
                        for b in range(nf):
                            out_freq[pp, r, b] = np.nan
                    if r >= stat_from:
                        for j in range(sample_idx.size):
                            fsamp[pp, r - stat_from, j] = np.nan
                    r += 1
                break
        for c in range(n):
            terminal[pp, c] = z[c]
