"""Pure numpy/scipy versions of the hot kernels.

The compiled module ``_core`` exposes the same three functions; ``backend``
picks one at import.
"""
import numpy as np
from scipy.linalg.blas import zgemm, zgemv
from scipy.spatial import cKDTree

NAME = "python"


class EnvelopeFailure(RuntimeError):
    pass


def ginibre_eval(idx, lognorm, r, th):
    """``phi_k(r e^{i th})`` for k in ``idx`` (sorted), as an N x b array."""
    idx = np.asarray(idx, dtype=np.int64)
    b = r.size
    if idx.size == 0 or b == 0:
        return np.zeros((idx.size, b), complex, order="F")
    with np.errstate(divide="ignore"):
        lr = np.log(r)
    e = np.multiply.outer(idx.astype(float), lr) - (0.5 * r * r)[None, :] - lognorm[:, None]
    e[:, r == 0] = np.where(idx == 0, -lognorm, -np.inf)[:, None]
    mag = np.exp(e)
    kmax = int(idx[-1]) + 1
    ph = np.empty((kmax, b), complex)
    ph[0] = 1.0
    if kmax > 1:
        ph[1:] = np.exp(1j * th)
        np.cumprod(ph, axis=0, out=ph)
    return np.asfortranarray(mag * ph[idx])


def projection_chain(N, propose, max_rejections=100000, implicit_frac=0.2, tmax=32):
    """Sequential sampler of a rank-N projection DPP.

    ``propose(b)`` returns ``(V, thr, z)``: coefficient vectors ``V`` (N x b,
    Fortran), acceptance thresholds and candidate points.  A candidate is
    accepted when ``thr < ||Q^* v||^2`` where ``Q`` spans the orthogonal
    complement of the coefficient vectors accepted so far.  ``Q`` is kept as
    an explicit block ``W0`` times pending Householder reflectors stored in
    compact WY form ``I - Y T Y^*``.
    """
    pts = np.empty(N, complex)
    if N == 0:
        return pts, 0
    W0 = None
    m0 = N
    tcap = max(tmax, int(implicit_frac * N) + 2)
    Y = np.zeros((N, tcap), complex, order="F")
    T = np.zeros((tcap, tcap), complex, order="F")
    t = 0
    n_acc = 0
    props = 0
    streak = 0
    C = None
    h = b = 0
    thr = z = None
    while n_acc < N:
        m = m0 - t
        if C is None or h >= b:
            b = int(min(256, max(16, np.ceil(2.0 * N / m))))
            V, thr, z = propose(b)
            C0 = V if W0 is None else zgemm(1.0, W0, V, trans_a=2)
            if t:
                Yt = Y[:m0, :t]
                X = zgemm(1.0, Yt, C0, trans_a=2)
                X = zgemm(1.0, T[:t, :t], X, trans_a=2)
                C0 = zgemm(-1.0, Yt, X, c=np.array(C0, order="F"), beta=1.0, overwrite_c=1)
            C = C0[:m]
            h = 0
            props += b
        c = C[:, h]
        f = float((c.real ** 2 + c.imag ** 2).sum())
        if not thr[h] < f:
            h += 1
            streak += 1
            if streak > max_rejections:
                raise EnvelopeFailure(
                    "rejection cap hit after %d proposals with %d/%d points accepted"
                    % (props, n_acc, N))
            continue
        streak = 0
        pts[n_acc] = z[h]
        n_acc += 1
        if m == 1:
            break
        # reflector sending c to a multiple of the last coordinate
        u = c.copy()
        nw = np.sqrt(f)
        alpha = -nw * (u[-1] / abs(u[-1])) if u[-1] != 0 else -nw
        u[-1] -= alpha
        u /= np.linalg.norm(u)
        rest = C[:, h + 1:]
        if rest.shape[1]:
            rest -= np.outer(2.0 * u, zgemv(1.0, rest, u, trans=2).conj())
        C = rest[:m - 1]
        thr = thr[h + 1:]
        z = z[h + 1:]
        b -= h + 1
        h = 0
        Y[:m, t] = u
        Y[m:m0, t] = 0
        if t:
            w = zgemv(1.0, Y[:m0, :t], Y[:m0, t], trans=2)
            T[:t, t] = -2.0 * (T[:t, :t] @ w)
        T[t, t] = 2.0
        t += 1
        m = m0 - t
        if (W0 is None and t >= implicit_frac * N) or (W0 is not None and t >= tmax):
            Yt = Y[:m0, :t]
            X = zgemm(1.0, T[:t, :t], Y[:m, :t], trans_b=2)
            if W0 is None:
                Wn = zgemm(-1.0, Yt, X)
                Wn[np.arange(m), np.arange(m)] += 1.0
            else:
                Wn = zgemm(-1.0, zgemm(1.0, W0, Yt), X,
                           c=np.asfortranarray(W0[:, :m]), beta=1.0, overwrite_c=1)
            W0 = Wn
            m0 = m
            t = 0
    return pts, props


def nn_dist2(z, query=None):
    """Squared distance from each queried point to its nearest other point."""
    z = np.asarray(z, dtype=complex)
    q = np.arange(z.size) if query is None else np.asarray(query, dtype=np.int64)
    if z.size < 2:
        return np.full(q.size, np.inf)
    xy = np.column_stack([z.real, z.imag])
    tree = cKDTree(xy)
    _, j = tree.query(xy[q], k=2)
    # the first hit is normally the point itself; take whichever is not
    nb = np.where(j[:, 0] == q, j[:, 1], j[:, 0])
    d = z[nb] - z[q]
    return d.real * d.real + d.imag * d.imag
