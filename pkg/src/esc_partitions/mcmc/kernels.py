"""Compiled partition-move kernels.

Partition state is held in flat arrays so the inner loops run without Python
overhead:

    z[i]          cluster slot of record i (slots are 0..n-1, not canonical)
    sizes[c]      size of slot c (0 when free)
    active[:K]    occupied slots; pos[c] is the index of c in ``active``
    free[:nfree]  stack of unused slots
    meta          [K, nfree]
    counts[c,l,d] number of records of slot c with code d in field l
    logf[c,l]     log f term of slot c in field l (0 for empty slots)

Prior reallocation weights arrive as ``log_w_exist[s]`` (joining a cluster that
has s members once the moving record is removed) and the new-cluster weight
``(slope * K + intercept) * exp(log_scale)``.

Randomness comes from numba's per-thread generator, reseeded at every call
from a seed the caller draws from its own ``numpy.random.Generator``.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _logaddexp(a, b):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    if a > b:
        return a + np.log1p(np.exp(b - a))
    return b + np.log1p(np.exp(a - b))


@njit(cache=True)
def logf_row(counts, c, l, theta, log_theta, log_rho):
    D = counts.shape[2]
    m = -np.inf
    covered = 0.0
    for d in range(D):
        q = counts[c, l, d]
        if q > 0:
            covered += theta[l, d]
            t = log_theta[l, d] + q * log_rho[l, d]
            if t > m:
                m = t
    rest = 1.0 - covered
    if rest > 0.0:
        lr = np.log(rest)
        if lr > m:
            m = lr
    else:
        rest = 0.0
    if m == -np.inf:
        return 0.0
    s = rest * np.exp(-m)
    for d in range(D):
        q = counts[c, l, d]
        if q > 0:
            s += np.exp(log_theta[l, d] + q * log_rho[l, d] - m)
    return m + np.log(s)


@njit(cache=True)
def _delta_add(i, c, codes, counts, logf, log_theta, log_rho, log_rho_m1):
    L = codes.shape[1]
    out = 0.0
    for l in range(L):
        x = codes[i, l]
        t = log_theta[l, x] + counts[c, l, x] * log_rho[l, x] + log_rho_m1[l, x]
        out += np.log1p(np.exp(t - logf[c, l]))
    return out


@njit(cache=True)
def _remove(i, z, sizes, active, pos, free, meta, codes, counts, logf, theta, log_theta, log_rho):
    c = z[i]
    L = codes.shape[1]
    sizes[c] -= 1
    for l in range(L):
        counts[c, l, codes[i, l]] -= 1
    if sizes[c] == 0:
        K = meta[0]
        last = active[K - 1]
        p = pos[c]
        active[p] = last
        pos[last] = p
        meta[0] = K - 1
        free[meta[1]] = c
        meta[1] += 1
        for l in range(L):
            logf[c, l] = 0.0
    else:
        for l in range(L):
            logf[c, l] = logf_row(counts, c, l, theta, log_theta, log_rho)
    z[i] = -1


@njit(cache=True)
def _new_slot(active, pos, free, meta):
    meta[1] -= 1
    c = free[meta[1]]
    K = meta[0]
    active[K] = c
    pos[c] = K
    meta[0] = K + 1
    return c


@njit(cache=True)
def _add(i, c, z, sizes, codes, counts, logf, log_theta, log_rho, log_rho_m1):
    L = codes.shape[1]
    for l in range(L):
        x = codes[i, l]
        t = log_theta[l, x] + counts[c, l, x] * log_rho[l, x] + log_rho_m1[l, x]
        logf[c, l] = _logaddexp(logf[c, l], t)
        counts[c, l, x] += 1
    sizes[c] += 1
    z[i] = c


@njit(cache=True)
def _gibbs_scan(z, sizes, active, pos, free, meta, codes, counts, logf,
                theta, log_theta, log_rho, log_rho_m1,
                log_w_exist, new_slope, new_intercept, new_log_scale, lw):
    n = z.shape[0]
    for i in range(n):
        _remove(i, z, sizes, active, pos, free, meta, codes, counts, logf, theta, log_theta, log_rho)
        K = meta[0]
        m = -np.inf
        for a in range(K):
            c = active[a]
            v = log_w_exist[sizes[c]] + _delta_add(i, c, codes, counts, logf, log_theta, log_rho, log_rho_m1)
            lw[a] = v
            if v > m:
                m = v
        wnew = new_slope * K + new_intercept
        if wnew > 0.0:
            # a fresh slot has empty counts, so its logf row is 0
            v = np.log(wnew) + new_log_scale
            for l in range(codes.shape[1]):
                x = codes[i, l]
                v += np.log1p(np.exp(log_theta[l, x] + log_rho_m1[l, x]))
        else:
            v = -np.inf
        lw[K] = v
        if v > m:
            m = v
        total = 0.0
        for a in range(K + 1):
            lw[a] = np.exp(lw[a] - m)
            total += lw[a]
        u = np.random.random() * total
        choice = K
        acc = 0.0
        for a in range(K + 1):
            acc += lw[a]
            if u < acc and lw[a] > 0.0:
                choice = a
                break
        if choice == K:
            c = _new_slot(active, pos, free, meta)
        else:
            c = active[choice]
        _add(i, c, z, sizes, codes, counts, logf, log_theta, log_rho, log_rho_m1)


@njit(cache=True)
def _chaperones(pair_i, pair_j, z, sizes, active, pos, free, meta, codes, counts, logf,
                theta, log_theta, log_rho, log_rho_m1, log_w_exist, members):
    ci = z[pair_i]
    cj = z[pair_j]
    if ci == cj:
        return
    n = z.shape[0]
    cnt = 0
    for k in range(n):
        if k != pair_i and k != pair_j and (z[k] == ci or z[k] == cj):
            members[cnt] = k
            cnt += 1
    # random visiting order
    for a in range(cnt - 1, 0, -1):
        b = np.random.randint(0, a + 1)
        tmp = members[a]
        members[a] = members[b]
        members[b] = tmp
    for a in range(cnt):
        k = members[a]
        _remove(k, z, sizes, active, pos, free, meta, codes, counts, logf, theta, log_theta, log_rho)
        vi = log_w_exist[sizes[ci]] + _delta_add(k, ci, codes, counts, logf, log_theta, log_rho, log_rho_m1)
        vj = log_w_exist[sizes[cj]] + _delta_add(k, cj, codes, counts, logf, log_theta, log_rho, log_rho_m1)
        if vi == -np.inf and vj == -np.inf:
            prob_i = 0.5
        elif vi >= vj:
            prob_i = 1.0 / (1.0 + np.exp(vj - vi))
        else:
            e = np.exp(vi - vj)
            prob_i = e / (1.0 + e)
        target = ci if np.random.random() < prob_i else cj
        _add(k, target, z, sizes, codes, counts, logf, log_theta, log_rho, log_rho_m1)


@njit(cache=True)
def encode_state(z, relabel):
    """Integer code of the canonical partition (first-appearance labels as base-n digits)."""
    n = z.shape[0]
    for k in range(n):
        relabel[k] = -1
    nxt = 0
    code = 0
    mult = 1
    for i in range(n):
        c = z[i]
        if relabel[c] < 0:
            relabel[c] = nxt
            nxt += 1
        code += relabel[c] * mult
        mult *= n
    return code


@njit(cache=True, nogil=True)
def partition_sweep(seed, pairs, scan_every, scan_offset,
                    z, sizes, active, pos, free, meta, codes, counts, logf,
                    theta, log_theta, log_rho, log_rho_m1,
                    log_w_exist, new_slope, new_intercept, new_log_scale, record):
    """Apply ``len(pairs)`` chaperones moves with a full Gibbs scan after every
    ``scan_every``-th move (counting from ``scan_offset``). Returns the updated offset.

    When ``record`` has one slot per move, the encoded state after each move
    (and any scan that follows it) is written there.
    """
    np.random.seed(seed)
    n = z.shape[0]
    members = np.empty(n, dtype=np.int64)
    lw = np.empty(n + 1)
    keep = record.shape[0] == pairs.shape[0]
    done = scan_offset
    for t in range(pairs.shape[0]):
        _chaperones(pairs[t, 0], pairs[t, 1], z, sizes, active, pos, free, meta, codes, counts, logf,
                    theta, log_theta, log_rho, log_rho_m1, log_w_exist, members)
        done += 1
        if scan_every > 0 and done % scan_every == 0:
            _gibbs_scan(z, sizes, active, pos, free, meta, codes, counts, logf,
                        theta, log_theta, log_rho, log_rho_m1,
                        log_w_exist, new_slope, new_intercept, new_log_scale, lw)
            done = 0
        if keep:
            record[t] = encode_state(z, members)
    return done


@njit(cache=True, nogil=True)
def gibbs_scan_kernel(seed, z, sizes, active, pos, free, meta, codes, counts, logf,
                      theta, log_theta, log_rho, log_rho_m1,
                      log_w_exist, new_slope, new_intercept, new_log_scale):
    np.random.seed(seed)
    lw = np.empty(z.shape[0] + 1)
    _gibbs_scan(z, sizes, active, pos, free, meta, codes, counts, logf,
                theta, log_theta, log_rho, log_rho_m1,
                log_w_exist, new_slope, new_intercept, new_log_scale, lw)
