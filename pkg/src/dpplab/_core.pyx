# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_fallback``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp, log, cos, sin, floor, ceil, INFINITY
from scipy.linalg.cython_blas cimport zgemm, zgemv, zgerc

from ._fallback import EnvelopeFailure

cnp.import_array()

NAME = "cython"

ctypedef double complex zc


def ginibre_eval(idx, lognorm, r, th):
    """Disk eigenfunctions by two-sided recurrence from the mode nearest r^2."""
    cdef cnp.int64_t[::1] I = np.ascontiguousarray(idx, dtype=np.int64)
    cdef double[::1] L = np.ascontiguousarray(lognorm, dtype=float)
    cdef double[::1] Rr = np.ascontiguousarray(r, dtype=float)
    cdef double[::1] Th = np.ascontiguousarray(th, dtype=float)
    cdef Py_ssize_t N = I.shape[0], b = Rr.shape[0], a, j, lo, hi, mid, a0, d
    out = np.zeros((N, b), dtype=complex, order="F")
    if N == 0 or b == 0:
        return out
    cdef zc[::1, :] O = out
    g_arr = np.empty(max(N - 1, 1))
    cdef double[::1] g = g_arr
    for a in range(N - 1):
        g[a] = exp(L[a] - L[a + 1])
    cdef double rr, c, s, r2, k0, mag
    cdef zc w, winv, v, val
    for j in range(b):
        rr = Rr[j]
        if rr <= 0.0:
            if I[0] == 0:
                O[0, j] = exp(-L[0])
            continue
        c = cos(Th[j])
        s = sin(Th[j])
        w = rr * (c + 1j * s)
        winv = (c - 1j * s) / rr
        r2 = rr * rr
        # first selected mode with k >= r^2 (or the last one)
        lo = 0
        hi = N - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if I[mid] < r2:
                lo = mid + 1
            else:
                hi = mid
        a0 = lo
        k0 = <double>I[a0]
        mag = exp(k0 * log(rr) - 0.5 * r2 - L[a0])
        val = mag * (cos(k0 * Th[j]) + 1j * sin(k0 * Th[j]))
        O[a0, j] = val
        v = val
        for a in range(a0 + 1, N):
            v = v * g[a - 1]
            for d in range(I[a] - I[a - 1]):
                v = v * w
            O[a, j] = v
        v = val
        for a in range(a0 - 1, -1, -1):
            v = v / g[a]
            for d in range(I[a + 1] - I[a]):
                v = v * winv
            O[a, j] = v
    return out


def projection_chain(Py_ssize_t N, propose, long max_rejections=100000,
                     double implicit_frac=0.2, int tmax=32):
    """Same algorithm and random-number use as ``_fallback.projection_chain``."""
    pts = np.empty(N, dtype=complex)
    if N == 0:
        return pts, 0
    cdef zc[::1] P = pts
    cdef int n = <int>N
    cdef int tcap = max(tmax, <int>(implicit_frac * N) + 2)
    cdef int bmax = 256
    Y_arr = np.zeros((N, tcap), dtype=complex, order="F")
    T_arr = np.zeros((tcap, tcap), dtype=complex, order="F")
    C_arr = np.zeros((N, bmax), dtype=complex, order="F")
    X_arr = np.zeros((tcap, bmax), dtype=complex, order="F")
    X2_arr = np.zeros((tcap, bmax), dtype=complex, order="F")
    Xc_arr = np.zeros((tcap, N), dtype=complex, order="F")
    u_arr = np.zeros(N, dtype=complex)
    s_arr = np.zeros(bmax, dtype=complex)
    w_arr = np.zeros(tcap, dtype=complex)
    cdef zc[::1, :] Y = Y_arr
    cdef zc[::1, :] T = T_arr
    cdef zc[::1, :] C = C_arr
    cdef zc[::1, :] X = X_arr
    cdef zc[::1, :] X2 = X2_arr
    cdef zc[::1, :] Xc = Xc_arr
    cdef zc[::1] u = u_arr
    cdef zc[::1] sv = s_arr
    cdef zc[::1] wv = w_arr
    cdef zc[::1, :] W0
    cdef zc[::1, :] V
    cdef zc[::1, :] Wn
    cdef zc[::1, :] WY
    cdef double[::1] thr
    cdef zc[::1] zs
    cdef int have_W0 = 0, have_pool = 0
    cdef int m0 = n, t = 0, m, b = 0, h = 0, n_acc = 0, i, j, nrest, ldt = tcap
    cdef long props = 0, streak = 0
    cdef double f, nw, au, nu
    cdef zc alpha, one = 1.0, zero = 0.0, mone = -1.0, mtwo = -2.0, ph
    cdef int inc1 = 1
    cdef char cN = b'N', cC = b'C'
    while n_acc < n:
        m = m0 - t
        if not have_pool or h >= b:
            b = <int>min(256.0, max(16.0, ceil(2.0 * n / m)))
            Vp, thp, zp = propose(b)
            V = np.asfortranarray(Vp, dtype=complex)
            thr = np.ascontiguousarray(thp, dtype=float)
            zs = np.ascontiguousarray(zp, dtype=complex)
            if have_W0:
                zgemm(&cC, &cN, &m0, &b, &n, &one, &W0[0, 0], &n, &V[0, 0], &n,
                      &zero, &C[0, 0], &n)
            else:
                for j in range(b):
                    for i in range(n):
                        C[i, j] = V[i, j]
            if t:
                zgemm(&cC, &cN, &t, &b, &m0, &one, &Y[0, 0], &n, &C[0, 0], &n,
                      &zero, &X[0, 0], &ldt)
                zgemm(&cC, &cN, &t, &b, &t, &one, &T[0, 0], &ldt, &X[0, 0], &ldt,
                      &zero, &X2[0, 0], &ldt)
                zgemm(&cN, &cN, &m0, &b, &t, &mone, &Y[0, 0], &n, &X2[0, 0], &ldt,
                      &one, &C[0, 0], &n)
            h = 0
            props += b
            have_pool = 1
        f = 0.0
        for i in range(m):
            f += C[i, h].real * C[i, h].real + C[i, h].imag * C[i, h].imag
        if not thr[h] < f:
            h += 1
            streak += 1
            if streak > max_rejections:
                raise EnvelopeFailure(
                    "rejection cap hit after %d proposals with %d/%d points accepted"
                    % (props, n_acc, n))
            continue
        streak = 0
        P[n_acc] = zs[h]
        n_acc += 1
        if m == 1:
            break
        for i in range(m):
            u[i] = C[i, h]
        nw = sqrt(f)
        au = abs(u[m - 1])
        if au != 0.0:
            ph = u[m - 1] / au
            alpha = -nw * ph
        else:
            alpha = -nw
        u[m - 1] = u[m - 1] - alpha
        nu = 0.0
        for i in range(m):
            nu += u[i].real * u[i].real + u[i].imag * u[i].imag
        nu = sqrt(nu)
        for i in range(m):
            u[i] = u[i] / nu
        nrest = b - h - 1
        if nrest > 0:
            # rest -= 2 u (rest^* u)^*
            zgemv(&cC, &m, &nrest, &one, &C[0, h + 1], &n, &u[0], &inc1,
                  &zero, &sv[0], &inc1)
            zgerc(&m, &nrest, &mtwo, &u[0], &inc1, &sv[0], &inc1, &C[0, h + 1], &n)
        h += 1
        for i in range(m):
            Y[i, t] = u[i]
        for i in range(m, m0):
            Y[i, t] = 0.0
        if t:
            zgemv(&cC, &m0, &t, &one, &Y[0, 0], &n, &Y[0, t], &inc1, &zero, &wv[0], &inc1)
            zgemv(&cN, &t, &t, &mtwo, &T[0, 0], &ldt, &wv[0], &inc1, &zero, &T[0, t], &inc1)
        T[t, t] = 2.0
        t += 1
        m = m0 - t
        if (not have_W0 and t >= implicit_frac * n) or (have_W0 and t >= tmax):
            # Xc = T Y[:m, :t]^*  (t x m)
            zgemm(&cN, &cC, &t, &m, &t, &one, &T[0, 0], &ldt, &Y[0, 0], &n,
                  &zero, &Xc[0, 0], &ldt)
            if not have_W0:
                Wn_arr = np.zeros((N, m), dtype=complex, order="F")
                Wn = Wn_arr
                for i in range(m):
                    Wn[i, i] = 1.0
                zgemm(&cN, &cN, &m0, &m, &t, &mone, &Y[0, 0], &n, &Xc[0, 0], &ldt,
                      &one, &Wn[0, 0], &n)
            else:
                WY_arr = np.empty((N, t), dtype=complex, order="F")
                WY = WY_arr
                zgemm(&cN, &cN, &n, &t, &m0, &one, &W0[0, 0], &n, &Y[0, 0], &n,
                      &zero, &WY[0, 0], &n)
                Wn_arr = np.array(W0[:, :m], dtype=complex, order="F")
                Wn = Wn_arr
                zgemm(&cN, &cN, &n, &m, &t, &mone, &WY[0, 0], &n, &Xc[0, 0], &ldt,
                      &one, &Wn[0, 0], &n)
            W0 = Wn
            have_W0 = 1
            m0 = m
            t = 0
    return pts, props


def nn_dist2(z, query=None):
    """Nearest-neighbour squared distances through a uniform grid hash."""
    za = np.ascontiguousarray(z, dtype=complex)
    cdef Py_ssize_t n = za.shape[0]
    q_arr = np.arange(n, dtype=np.int64) if query is None else np.ascontiguousarray(query, dtype=np.int64)
    cdef cnp.int64_t[::1] Q = q_arr
    cdef Py_ssize_t nq = Q.shape[0]
    res = np.full(nq, np.inf)
    if n < 2 or nq == 0:
        return res
    cdef double[::1] out = res
    cdef double[::1] xs = np.ascontiguousarray(za.real)
    cdef double[::1] ys = np.ascontiguousarray(za.imag)
    cdef double x0 = np.min(za.real), x1 = np.max(za.real)
    cdef double y0 = np.min(za.imag), y1 = np.max(za.imag)
    cdef double span = max(x1 - x0, y1 - y0, 1e-12)
    cdef int g = max(1, <int>sqrt(<double>n))
    cdef double hc = span / g * 1.000001
    cdef int gx = <int>((x1 - x0) / hc) + 1, gy = <int>((y1 - y0) / hc) + 1
    cell_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] cell = cell_arr
    cdef Py_ssize_t i, k, p, jj
    for i in range(n):
        cell[i] = (<int>((ys[i] - y0) / hc)) * gx + <int>((xs[i] - x0) / hc)
    order_arr = np.argsort(cell_arr, kind="stable")
    cdef cnp.int64_t[::1] order = order_arr
    start_arr = np.searchsorted(cell_arr[order_arr], np.arange(gx * gy + 1)).astype(np.int64)
    cdef cnp.int64_t[::1] start = start_arr
    cdef int cx, cy, ring, ix, iy, rmax = max(gx, gy)
    cdef double best, dx, dy, d2, lim
    for k in range(nq):
        i = Q[k]
        cx = <int>((xs[i] - x0) / hc)
        cy = <int>((ys[i] - y0) / hc)
        best = INFINITY
        ring = 0
        while ring <= rmax:
            for iy in range(cy - ring, cy + ring + 1):
                if iy < 0 or iy >= gy:
                    continue
                for ix in range(cx - ring, cx + ring + 1):
                    if ix < 0 or ix >= gx:
                        continue
                    if iy != cy - ring and iy != cy + ring and ix != cx - ring and ix != cx + ring:
                        continue
                    p = iy * gx + ix
                    for jj in range(start[p], start[p + 1]):
                        if order[jj] == i:
                            continue
                        dx = xs[order[jj]] - xs[i]
                        dy = ys[order[jj]] - ys[i]
                        d2 = dx * dx + dy * dy
                        if d2 < best:
                            best = d2
            lim = ring * hc
            if best <= lim * lim:
                break
            ring += 1
        out[k] = best
    return res
