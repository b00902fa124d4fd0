"""Per-column sparse coding kernels on the Gram form.

Every kernel takes ``G = A.T @ A`` and correlations ``C = A.T @ X`` so the
per-column work never touches the P-dimensional signals.
"""

from __future__ import annotations

import numpy as np
from numba import njit

PIVOT_TOL = 1e-10

OK = 0
MAX_ITER = 1


@njit(cache=True)
def _chol_solve(M, b):
    """Solve ``M x = b`` for small SPD ``M``; returns (x, ok)."""
    n = M.shape[0]
    L = np.zeros((n, n))
    x = np.zeros(n)
    for i in range(n):
        for j in range(i + 1):
            acc = M[i, j]
            for p in range(j):
                acc -= L[i, p] * L[j, p]
            if i == j:
                if acc <= PIVOT_TOL * max(M[i, i], 1.0):
                    return x, False
                L[i, i] = np.sqrt(acc)
            else:
                L[i, j] = acc / L[j, j]
    y = np.zeros(n)
    for i in range(n):
        acc = b[i]
        for p in range(i):
            acc -= L[i, p] * y[p]
        y[i] = acc / L[i, i]
    for i in range(n - 1, -1, -1):
        acc = y[i]
        for p in range(i + 1, n):
            acc -= L[p, i] * x[p]
        x[i] = acc / L[i, i]
    return x, True


@njit(cache=True)
def _sub(G, idx, n):
    M = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            M[a, b] = G[idx[a], idx[b]]
    return M


@njit(cache=True)
def nn_lasso_column(G, c, tau, max_iter, s):
    """Homotopy path for min 1/2 s'Gs - c's + tau*sum(s), s >= 0.

    Follows the piecewise-linear solution path from the smallest penalty
    with an all-zero solution down to ``tau``. ``s`` is written in place.
    Returns the number of path segments, or -1 if ``max_iter`` was hit.
    """
    K = c.shape[0]
    s[:] = 0.0
    corr = c.copy()
    active = np.zeros(K, dtype=np.bool_)
    banned = np.zeros(K, dtype=np.bool_)
    act = np.empty(K, dtype=np.int64)
    n = 0

    j = np.argmax(corr)
    lam = corr[j]
    if lam <= tau:
        return 0
    act[0] = j
    active[j] = True
    n = 1
    last_dropped = -1
    it = 0
    while True:
        if it >= max_iter:
            return -1
        it += 1
        M = _sub(G, act, n)
        d, ok = _chol_solve(M, np.ones(n))
        if not ok:
            # newest atom is (numerically) in the span of the others
            j = act[n - 1]
            active[j] = False
            banned[j] = True
            n -= 1
            if n == 0:
                return it
            continue
        u = np.zeros(K)
        for a in range(n):
            col = act[a]
            for r in range(K):
                u[r] += G[r, col] * d[a]

        gamma = lam - tau
        event = 0
        who = -1
        for r in range(K):
            if active[r] or banned[r]:
                continue
            den = 1.0 - u[r]
            if den <= 1e-12:
                continue
            g = (lam - corr[r]) / den
            if g < 0.0:
                g = 0.0
            if r == last_dropped and g <= 1e-14:
                continue
            if g < gamma:
                gamma = g
                event = 1
                who = r
        for a in range(n):
            if d[a] < 0.0:
                g = -s[act[a]] / d[a]
                if g < gamma:
                    gamma = g
                    event = 2
                    who = a

        for a in range(n):
            s[act[a]] += gamma * d[a]
        for r in range(K):
            corr[r] -= gamma * u[r]
        lam -= gamma

        if event == 0:
            break
        if event == 1:
            act[n] = who
            active[who] = True
            n += 1
            last_dropped = -1
        else:
            j = act[who]
            s[j] = 0.0
            active[j] = False
            for a in range(who, n - 1):
                act[a] = act[a + 1]
            n -= 1
            last_dropped = j
            if n == 0:
                j = -1
                best = -np.inf
                for r in range(K):
                    if not banned[r] and corr[r] > best:
                        best = corr[r]
                        j = r
                if j < 0 or best <= tau:
                    break
                act[0] = j
                active[j] = True
                n = 1

    # re-solve the final active set directly to shed accumulated drift
    if n > 0:
        M = _sub(G, act, n)
        rhs = np.empty(n)
        for a in range(n):
            rhs[a] = c[act[a]] - tau
        x, ok = _chol_solve(M, rhs)
        if ok:
            positive = True
            for a in range(n):
                if x[a] <= 0.0:
                    positive = False
            if positive:
                for a in range(n):
                    s[act[a]] = x[a]
    return it


@njit(cache=True)
def nn_lasso_batch(G, C, tau, max_iter):
    K, N = C.shape
    S = np.zeros((K, N))
    steps = np.zeros(N, dtype=np.int64)
    s = np.zeros(K)
    for i in range(N):
        steps[i] = nn_lasso_column(G, C[:, i].copy(), tau, max_iter, s)
        S[:, i] = s
    return S, steps


@njit(cache=True)
def _nnls_gram(H, b, z):
    """Lawson-Hanson NNLS for min 1/2 z'Hz - b'z, z >= 0, warm-started at z."""
    n = b.shape[0]
    passive = np.zeros(n, dtype=np.bool_)
    for a in range(n):
        passive[a] = z[a] > 0.0
    scale = 1.0
    for a in range(n):
        scale = max(scale, abs(b[a]))
    tol = 1e-12 * scale
    for _outer in range(3 * n + 10):
        w = b - H @ z
        # inner loop: solve on the passive set, step back if infeasible
        for _inner in range(3 * n + 10):
            m = 0
            for a in range(n):
                if passive[a]:
                    m += 1
            if m == 0:
                break
            idx = np.empty(m, dtype=np.int64)
            q = 0
            for a in range(n):
                if passive[a]:
                    idx[q] = a
                    q += 1
            rhs = np.empty(m)
            for q in range(m):
                rhs[q] = b[idx[q]]
            y, ok = _chol_solve(_sub(H, idx, m), rhs)
            if not ok:
                # drop the last passive index and retry
                passive[idx[m - 1]] = False
                z[idx[m - 1]] = 0.0
                continue
            if np.all(y > 0.0):
                for a in range(n):
                    z[a] = 0.0
                for q in range(m):
                    z[idx[q]] = y[q]
                break
            alpha = 1.0
            for q in range(m):
                if y[q] <= 0.0:
                    zz = z[idx[q]]
                    step = zz / (zz - y[q]) if zz - y[q] > 0.0 else 0.0
                    if step < alpha:
                        alpha = step
            for q in range(m):
                a = idx[q]
                z[a] = z[a] + alpha * (y[q] - z[a])
                if z[a] <= tol * 1e-3:
                    z[a] = 0.0
                    passive[a] = False
        w = b - H @ z
        best = -1
        bw = tol
        for a in range(n):
            if not passive[a] and w[a] > bw:
                bw = w[a]
                best = a
        if best < 0:
            return z
        passive[best] = True
    return z


@njit(cache=True)
def nn_omp_column(G, c, k, eps, s):
    """Greedy nonnegative OMP; ``s`` is written in place. Returns steps taken."""
    K = c.shape[0]
    s[:] = 0.0
    chosen = np.zeros(K, dtype=np.bool_)
    act = np.empty(k, dtype=np.int64)
    coef = np.zeros(k)
    n = 0
    for step in range(k):
        corr = c - G @ s
        j = -1
        best = eps
        for r in range(K):
            if not chosen[r] and corr[r] > best:
                best = corr[r]
                j = r
        if j < 0:
            return step
        act[n] = j
        chosen[j] = True
        n += 1
        idx = act[:n]
        H = _sub(G, idx, n)
        b = np.empty(n)
        for a in range(n):
            b[a] = c[idx[a]]
        z = coef[:n].copy()
        z = _nnls_gram(H, b, z)
        for a in range(n):
            coef[a] = z[a]
            s[idx[a]] = z[a]
    return k


@njit(cache=True)
def nn_omp_batch(G, C, k, eps):
    K, N = C.shape
    S = np.zeros((K, N))
    s = np.zeros(K)
    for i in range(N):
        nn_omp_column(G, C[:, i].copy(), k, eps[i], s)
        S[:, i] = s
    return S
