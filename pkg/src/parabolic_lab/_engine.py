"""Space-time product quadrature shared by the solvers, the truncated singular
integrals and the Poisson operators.

Grid data f is replaced by its tensor cubic Lagrange interpolant f_I (four
nodes per axis, zero outside the grid or periodic), and integrals

    int g(tau) int K(tau, x, y) f_I(t - tau, y) dy dtau

are computed exactly in y for each tau node: every 1-D kernel factor is a
Gaussian in y times a quadratic, so its integral against a cubic cell
polynomial is a combination of truncated Gaussian moments.  The tau integral
uses Gauss-Legendre pieces aligned with the time grid, geometric pieces near
tau = 0 and a sqrt(tau) substitution on the first piece.

The excluded parabolic ball {tau < eps^2, |y - x| < eps} is integrated
separately with polar Gauss-Legendre nodes and subtracted.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import special

from .grid import GridSpec
from .kernels import gauss_weierstrass, heat_kernel_derivative, log_sinh, log_cosh, coth
from .kernels import mehler, mehler_x_derivative, _hermite_tau_derivative

GL_NODES = 8
BALL_RADIAL = 24
TAIL_PERIODS = 64

_LEG_X, _LEG_W = np.polynomial.legendre.leggauss(GL_NODES)
_LEG_X = 0.5 * (_LEG_X + 1.0)
_LEG_W = 0.5 * _LEG_W
_LEG4_X, _LEG4_W = np.polynomial.legendre.leggauss(4)
_LEG4_X = 0.5 * (_LEG4_X + 1.0)
_LEG4_W = 0.5 * _LEG4_W
FAR_PIECES = 16


def cardinal(s):
    """Cardinal function of 4-point cubic Lagrange interpolation (support [-2, 2])."""
    a = np.abs(np.asarray(s, dtype=float))
    out = np.zeros_like(a)
    m1 = a <= 1
    m2 = (a > 1) & (a < 2)
    out[m1] = 0.5 * (a[m1] - 1) * (a[m1] - 2) * (a[m1] + 1)
    out[m2] = -(a[m2] - 1) * (a[m2] - 2) * (a[m2] - 3) / 6.0
    return out


def _lagrange_table():
    """LAG[r + 1, p]: coefficient of s^p in the basis polynomial of node r on [0, 1]."""
    nodes = [-1, 0, 1, 2]
    tab = np.zeros((4, 4))
    for ri, r in enumerate(nodes):
        poly = np.poly1d([1.0])
        for q in nodes:
            if q != r:
                poly = poly * np.poly1d([1.0, -q]) / (r - q)
        coeffs = poly.coeffs[::-1]
        tab[ri, :len(coeffs)] = coeffs
    return tab


LAG = _lagrange_table()


# ---------------------------------------------------------------------------
# 1-D kernel factors for a batch of tau values:
#   K1(tau_q, x_b, y) = amp[q, b] (p0 + p1 z + p2 z^2) exp(-z^2),
#   z = (y - mu[q, b]) / sigma[q]


def _heat_factor(kind, tau, x):
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    x = np.asarray(x, dtype=float)
    sig = 2.0 * np.sqrt(tau)
    shape = (tau.size, x.size)
    mu = np.broadcast_to(x[None, :], shape)
    amp = np.broadcast_to(((4.0 * math.pi * tau) ** -0.5)[:, None], shape)
    zero = np.zeros(shape)
    one = np.ones(shape)
    col = lambda v: np.broadcast_to(v[:, None], shape)
    if kind == "0":
        p = (one, zero, zero)
    elif kind == "1":
        p = (zero, col(1.0 / np.sqrt(tau)), zero)
    elif kind in ("2", "t"):
        p = (col(-0.5 / tau), zero, col(1.0 / tau))
    else:
        raise ValueError(kind)
    return mu, sig, amp, p


def _hermite_factor(kind, tau, x):
    tau = np.atleast_1d(np.asarray(tau, dtype=float))[:, None]
    x = np.asarray(x, dtype=float)[None, :]
    two = 2.0 * tau
    th = np.tanh(two)
    sig = np.sqrt(2.0 * th)
    mu = x * np.exp(-log_cosh(two))
    amp = np.exp(-0.5 * (math.log(2 * math.pi) + log_sinh(two)) - 0.5 * x * x * th)
    shape = amp.shape
    a = -x * th
    b = np.broadcast_to(sig * np.exp(-log_sinh(two)), shape)
    c = coth(two)
    zero = np.zeros(shape)
    if kind == "0":
        p = (np.ones(shape), zero, zero)
    elif kind == "1":
        p = (a, b, zero)
    elif kind == "2":
        p = (a * a - c, 2 * a * b, b * b)
    elif kind == "t":
        p = (a * a - c - x * x, 2 * a * b, b * b)
    else:
        raise ValueError(kind)
    return mu, sig[:, 0], amp, p


def _gauss_moments(za, zb, kmax):
    """J_k = int_za^zb z^k exp(-z^2) dz, k = 0..kmax (arrays broadcast)."""
    za = np.clip(za, -40.0, 40.0)
    zb = np.clip(zb, -40.0, 40.0)
    hi = za > 3.0
    lo = zb < -3.0
    d = np.where(hi, special.erfc(za) - special.erfc(zb),
                 np.where(lo, special.erfc(-zb) - special.erfc(-za), special.erf(zb) - special.erf(za)))
    J = [0.5 * math.sqrt(math.pi) * d]
    ea, eb = np.exp(-za * za), np.exp(-zb * zb)
    J.append(-0.5 * (eb - ea))
    for k in range(2, kmax + 1):
        J.append(0.5 * (k - 1) * J[k - 2] - 0.5 * (zb ** (k - 1) * eb - za ** (k - 1) * ea))
    return J


def _moments_gl(mu, sig, amp, p, y_left, h):
    s = _LEG_X
    y = y_left[None, None, :, None] + h * s
    z = (y - mu[..., None, None]) / sig[:, None, None, None]
    k = amp[..., None, None] * (p[0][..., None, None] + z * (p[1][..., None, None]
                                                            + z * p[2][..., None, None])) * np.exp(-z * z)
    kw = h * k * _LEG_W
    return np.stack([kw @ s ** q for q in range(4)])


def _moments_exact(mu, sig, amp, p, y_left, h):
    sg = sig[:, None, None]
    yl = y_left[None, None, :]
    mu3 = mu[..., None]
    za = (yl - mu3) / sg
    zb = za + h / sg
    J = _gauss_moments(za, zb, 5)
    alpha = (mu3 - yl) / h
    beta = sg / h
    p0, p1, p2 = (c[..., None] for c in p)
    out = []
    for q in range(4):
        # (alpha + beta z)^q (p0 + p1 z + p2 z^2), integrated against exp(-z^2)
        acc = 0.0
        for r in range(q + 1):
            cq = math.comb(q, r) * alpha ** (q - r) * beta ** r
            acc = acc + cq * (p0 * J[r] + p1 * J[r + 1] + p2 * J[r + 2])
        out.append(amp[..., None] * sg * acc)
    return np.stack(out)


def _cell_moments(factor, y_left, h):
    """m[p, q, b, j] = int_{cell j} K1(tau_q, x_b, y) s^p dy, s = (y - y_left_j)/h.

    Wide kernels (sigma >= h) use Gauss-Legendre in each cell, narrow ones
    the closed-form truncated Gaussian moments."""
    mu, sig, amp, p = factor
    out = np.empty((4,) + mu.shape + (y_left.size,))
    wide = sig >= h
    for sel, fn in ((wide, _moments_gl), (~wide, _moments_exact)):
        if np.any(sel):
            out[:, sel] = fn(mu[sel], sig[sel], amp[sel], tuple(c[sel] for c in p), y_left, h)
    return out


def _assemble(m, ncells_first, N, periodic):
    """Scatter cell moments into M[q, b, c] with c = j + r (r = -1..2)."""
    coef = np.einsum("rp,pqbj->rqbj", LAG, m)
    B, rows, nj = coef.shape[1:]
    M = np.zeros((B, rows, N))
    for ri, r in enumerate((-1, 0, 1, 2)):
        c = ncells_first + np.arange(nj) + r
        if periodic:
            np.add.at(M, (slice(None), slice(None), c % N), coef[ri])
        else:
            ok = (c >= 0) & (c < N)
            M[:, :, c[ok]] += coef[ri][:, :, ok]
    return M


def _toeplitz_from_row(g, offsets, N, periodic):
    """M[q, b, c] = sum over d with d = c - b (mod N if periodic) of g[q, d]."""
    b = np.arange(N)[:, None]
    c = np.arange(N)[None, :]
    if periodic:
        folded = np.zeros((g.shape[0], N))
        np.add.at(folded, (slice(None), offsets % N), g)
        return folded[:, (c - b) % N]
    idx = (c - b) - offsets[0]
    ok = (idx >= 0) & (idx < g.shape[1])
    M = np.zeros((g.shape[0], N, N))
    M[:, ok] = g[:, idx[ok]]
    return M


# ---------------------------------------------------------------------------
# ball quadrature


@lru_cache(maxsize=None)
def _unit_ball_rule(n, nr=BALL_RADIAL, na=6):
    """Nodes/weights on the unit ball, split along coordinate hyperplanes."""
    xr, wr = np.polynomial.legendre.leggauss(nr)
    r = 0.5 * (xr + 1.0)
    wr = 0.5 * wr
    if n == 1:
        z = np.concatenate([r, -r])[:, None]
        w = np.concatenate([wr, wr])
        return z, w
    xa, wa = np.polynomial.legendre.leggauss(na)
    if n == 2:
        th = []
        wt = []
        for q in range(4):
            th.append(0.5 * np.pi * (q + 0.5 * (xa + 1.0)))
            wt.append(0.25 * np.pi * wa)
        th = np.concatenate(th)
        wt = np.concatenate(wt)
        z = np.stack([np.outer(r, np.cos(th)), np.outer(r, np.sin(th))], axis=-1).reshape(-1, 2)
        w = np.outer(wr * r, wt).ravel()
        return z, w
    # n == 3: polar angle split at pi/2, azimuth split into quadrants
    th, wt, ph, wp = [], [], [], []
    for q in range(2):
        th.append(0.5 * np.pi * (q + 0.5 * (xa + 1.0)))
        wt.append(0.25 * np.pi * wa)
    for q in range(4):
        ph.append(0.5 * np.pi * (q + 0.5 * (xa + 1.0)))
        wp.append(0.25 * np.pi * wa)
    th, wt = np.concatenate(th), np.concatenate(wt)
    ph, wp = np.concatenate(ph), np.concatenate(wp)
    T, P = np.meshgrid(th, ph, indexing="ij")
    WA = np.outer(wt * np.sin(th), wp)
    dirs = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1).reshape(-1, 3)
    z = (r[:, None, None] * dirs[None]).reshape(-1, 3)
    w = np.outer(wr * r * r, WA.ravel()).ravel()
    return z, w


# ---------------------------------------------------------------------------


def _op_axes(op, n, i, j):
    """List of per-axis factor-kind tuples whose contributions are summed."""
    if op == "value":
        return [("0",) * n]
    if op == "ij":
        kinds = ["0"] * n
        if i == j:
            kinds[i] = "2"
        else:
            kinds[i] = "1"
            kinds[j] = "1"
        return [tuple(kinds)]
    if op == "t":
        out = []
        for l in range(n):
            kinds = ["0"] * n
            kinds[l] = "t"
            out.append(tuple(kinds))
        return out
    raise ValueError(f"unknown operator kind {op!r}")


def _apply_axis_batch(M, G, axis):
    """G[q, ..., c (at axis), ...] -> sum_c M[q, b, c] G[q, ..., c, ...]."""
    Gm = np.moveaxis(G, axis, -1)
    out = np.einsum("qbc,q...c->q...b", M, Gm)
    return np.moveaxis(out, -1, axis)


class Engine:
    """Quadrature engine on one grid.

    ``operator`` is ``heat`` (Gauss-Weierstrass) or ``hermite`` (Mehler).
    ``periodic`` treats the data as one period in time, and also in space for
    the heat operator; otherwise data vanish outside the grid.
    """

    def __init__(self, spec: GridSpec, operator: str = "heat", periodic: bool = False):
        if operator not in ("heat", "hermite"):
            raise ValueError("operator must be 'heat' or 'hermite'")
        self.spec = spec
        self.operator = operator
        self.periodic = periodic
        self.x = spec.x_nodes()
        self.t_extent = spec.t_max - spec.t_min
        self.period_t = spec.N_t * spec.h_t
        self.period_x = spec.N_x * spec.h_x

    # -- tau layout ---------------------------------------------------------

    @property
    def tau_max(self) -> float:
        s = self.spec
        if self.operator == "hermite":
            decay = 40.0 / s.n
            return decay if self.periodic else min(decay, self.t_extent + 2 * s.h_t)
        if self.periodic:
            xi_min = 2 * math.pi / self.period_x
            return 40.0 / xi_min ** 2
        return self.t_extent + 2 * s.h_t

    def tau_lo(self, extra=()):
        s = self.spec
        scales = [s.h_x ** 2, s.h_t] + [e for e in extra if e > 0]
        return min(scales) * 2.0 ** -24

    def tau_rule(self, a: float, b: float, extra_breaks=(), scales=()):
        """Quadrature nodes/weights for int_a^b dtau."""
        s = self.spec
        if b <= a:
            return np.zeros(0), np.zeros(0)
        lo = self.tau_lo(scales)
        br = {a, b}
        v = lo
        while v < s.h_t:
            br.add(v)
            v *= 2.0
        k = np.arange(1, int(math.ceil(b / s.h_t)) + 1)
        br.update((k * s.h_t).tolist())
        br.update(extra_breaks)
        pts = np.array(sorted(p for p in br if a <= p <= b))
        keep = np.concatenate([[True], np.diff(pts) > 1e-15 * max(b, 1e-300)])
        pts = pts[keep]
        nodes, weights = [], []
        for lo_, hi_ in zip(pts[:-1], pts[1:]):
            if lo_ == 0.0:
                # tau = sigma^2 on [0, hi]
                sh = math.sqrt(hi_)
                sg = sh * _LEG_X
                nodes.append(sg * sg)
                weights.append(2 * sg * sh * _LEG_W)
            elif lo_ >= FAR_PIECES * s.h_t:
                # kernel varies on scale >> piece length: 4 nodes suffice
                nodes.append(lo_ + (hi_ - lo_) * _LEG4_X)
                weights.append((hi_ - lo_) * _LEG4_W)
            else:
                nodes.append(lo_ + (hi_ - lo_) * _LEG_X)
                weights.append((hi_ - lo_) * _LEG_W)
        return np.concatenate(nodes), np.concatenate(weights)

    # -- time interpolation -------------------------------------------------

    def time_shift_batch(self, F, taus):
        """f_I(t_a - tau_q) for all q, a; shape (Q,) + F.shape."""
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        N = F.shape[0]
        q = taus / self.spec.h_t
        k0 = np.floor(q).astype(int)
        a = np.arange(N)
        out = np.zeros((taus.size,) + F.shape, dtype=F.dtype)
        for r in range(-1, 3):
            k = k0 + r
            w = cardinal(q - k)
            idx = a[None, :] - k[:, None]
            if self.periodic:
                vals = F[idx % N]
            else:
                ok = (idx >= 0) & (idx < N)
                vals = F[np.clip(idx, 0, N - 1)] * ok.reshape(ok.shape + (1,) * (F.ndim - 1))
            out += w.reshape((-1,) + (1,) * F.ndim) * vals
        return out

    def time_shift(self, F, tau):
        """f_I(t_a - tau) for all a (first axis of F)."""
        return self.time_shift_batch(F, [tau])[0]

    # -- spatial matrices ---------------------------------------------------

    def _factor(self, kind, tau, x):
        if self.operator == "heat":
            return _heat_factor(kind, tau, x)
        return _hermite_factor(kind, tau, x)

    def matrices(self, kind, taus):
        """M[q, b, c] = int K1(tau_q, x_b, y) phi((y - y_c)/h) dy."""
        s = self.spec
        N, h = s.N_x, s.h_x
        taus = np.atleast_1d(np.asarray(taus, dtype=float))
        if self.operator == "heat":
            if self.periodic:
                D = int(math.ceil(28 * math.sqrt(float(taus.max())) / h)) + N + 3
            else:
                D = N + 2
            offsets = np.arange(-D, D + 1)
            fac = self._factor(kind, taus, np.zeros(1))
            cells = np.arange(-D - 2, D + 2)
            m = _cell_moments(fac, cells * h, h)
            # translation invariance: one row over the virtual nodes ``offsets``
            coef = np.einsum("rp,pqj->rqj", LAG, m[:, :, 0, :])
            g = np.zeros((taus.size, offsets.size))
            for ri, r in enumerate((-1, 0, 1, 2)):
                c = cells + r + D
                ok = (c >= 0) & (c < offsets.size)
                g[:, c[ok]] += coef[ri][:, ok]
            return _toeplitz_from_row(g, offsets, N, self.periodic)
        fac = self._factor(kind, taus, self.x)
        cells = np.arange(-2, N + 1)
        m = _cell_moments(fac, self.x[0] + cells * h, h)
        return _assemble(m, -2, N, False)

    def matrix(self, kind, tau):
        return self.matrices(kind, [tau])[0]

    def _spatial_batch(self, G0, op, i, j, taus):
        n = self.spec.n
        cache = {}
        total = None
        for kinds in _op_axes(op, n, i, j):
            G = G0
            for a, kd in enumerate(kinds):
                if kd not in cache:
                    cache[kd] = self.matrices(kd, taus)
                G = _apply_axis_batch(cache[kd], G, a + 2)
            total = G if total is None else total + G
        return total

    def _batch_size(self, F):
        return int(max(1, min(64, 4_000_000 // max(F.size, 1))))

    # -- public integrals ---------------------------------------------------

    def full(self, F, op, i=0, j=0, a=0.0, b=None, density=None, extra_breaks=(), scales=()):
        """int_a^b g(tau) [K-op(tau) f_I](t - tau) dtau over all of space."""
        b = min(self.tau_max, np.inf if b is None else b)
        taus, ws = self.tau_rule(a, b, extra_breaks, scales)
        if density is not None:
            ws = ws * density(taus)
        keep = ws != 0.0
        taus, ws = taus[keep], ws[keep]
        out = np.zeros(F.shape, dtype=np.result_type(F, float))
        B = self._batch_size(F)
        for lo in range(0, taus.size, B):
            tb, wb = taus[lo:lo + B], ws[lo:lo + B]
            G = self._spatial_batch(self.time_shift_batch(F, tb), op, i, j, tb)
            out += np.tensordot(wb, G, axes=1)
        return out

    def _ball_kernel(self, op, i, j, tau, xb, z):
        n = self.spec.n
        if self.operator == "heat":
            if op == "value":
                return gauss_weierstrass(n, tau, z)[None, :]
            if op == "ij":
                al = [0] * n
                al[i] += 1
                al[j] += 1
                return heat_kernel_derivative(n, al, tau, z)[None, :]
            return heat_kernel_derivative(n, [0] * n, tau, z, 1)[None, :]
        X = np.broadcast_to(xb[:, None, :], (xb.shape[0],) + z.shape)
        Z = np.broadcast_to(z[None, :, :], X.shape)
        if op == "value":
            return mehler(n, tau, X, None, z=Z)
        if op == "ij":
            o = [0] * n
            o[i] += 1
            o[j] += 1
            return mehler_x_derivative(n, o, tau, X, None, z=Z)
        return _hermite_tau_derivative(n, [0] * n, tau, X, None, 1, z=Z)

    def ball(self, F, op, eps, i=0, j=0, density=None, levels=40):
        """int_0^{eps^2} g(tau) int_{|z| < eps} K(tau, x, x + z) f_I(t - tau, x + z) dz dtau."""
        s = self.spec
        n, h = s.n, s.h_x
        # sigma-pieces [eps 2^-(l+1), eps 2^-l] and a last piece down to 0
        sig_nodes, sig_w = [], []
        edges = [eps * 2.0 ** -l for l in range(levels + 1)] + [0.0]
        for hi_, lo_ in zip(edges[:-1], edges[1:]):
            sg = lo_ + (hi_ - lo_) * _LEG_X
            sig_nodes.append(sg)
            sig_w.append((hi_ - lo_) * _LEG_W)
        sig_nodes = np.concatenate(sig_nodes)
        sig_w = np.concatenate(sig_w)
        taus = sig_nodes ** 2
        ws = 2 * sig_nodes * sig_w
        if density is not None:
            ws = ws * density(taus)
        zr, wr = _unit_ball_rule(n)
        Rc = int(math.ceil(eps / h))
        offs1 = np.arange(-Rc - 2, Rc + 3)
        grids = np.meshgrid(*([offs1] * n), indexing="ij")
        offs = np.stack([g.ravel() for g in grids], axis=-1)
        pts = self._points()
        out = np.zeros(F.shape, dtype=np.result_type(F, float))
        for tau, w in zip(taus, ws):
            if w == 0.0:
                continue
            R = min(eps, 12.0 * math.sqrt(tau))
            z = R * zr
            wz = (R ** n) * wr
            phi = np.ones((z.shape[0], offs.shape[0]))
            for a in range(n):
                phi *= cardinal(z[:, a, None] / h - offs[None, :, a])
            Kv = self._ball_kernel(op, i, j, tau, pts, z) * wz
            C = Kv @ phi  # (1 or Npts, Noffs)
            Ft = self.time_shift(F, tau)
            out += w * self._gather(Ft, C, offs)
        return out

    def _points(self):
        s = self.spec
        mesh = np.meshgrid(*([self.x] * s.n), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def _gather(self, Ft, C, offs):
        """out[a, b] = sum_d C[b or 0, d] Ft[a, b + d] with zero/periodic extension."""
        s = self.spec
        n, N = s.n, s.N_x
        out = np.zeros_like(Ft)
        for di, d in enumerate(offs):
            shifted = Ft
            for a in range(n):
                dd = int(d[a])
                if dd == 0:
                    continue
                if self.periodic:
                    shifted = np.roll(shifted, -dd, axis=a + 1)
                else:
                    tmp = np.zeros_like(shifted)
                    src = [slice(None)] * (n + 1)
                    dst = [slice(None)] * (n + 1)
                    if dd > 0:
                        src[a + 1] = slice(dd, N)
                        dst[a + 1] = slice(0, N - dd)
                    else:
                        src[a + 1] = slice(0, N + dd)
                        dst[a + 1] = slice(-dd, N)
                    if N - abs(dd) > 0:
                        tmp[tuple(dst)] = shifted[tuple(src)]
                    shifted = tmp
            coef = C[:, di]
            if coef.shape[0] == 1:
                out += coef[0] * shifted
            else:
                out += coef.reshape((1,) + (N,) * n) * shifted
        return out

    # -- periodic heat tail -------------------------------------------------

    def tail(self, F, density=None, survival=None):
        """Contribution of tau > tau_max for the periodic heat value operator.

        Past tau_max the periodized heat kernel equals 1/|box| to double
        precision, so only the spatial mean signal m(t) survives.  With no
        density the integral of its mean-free part is taken in the Cesaro
        sense (one-period formula); with a density the mean contributes
        mean * survival(tau_max), the mean-free part is integrated over
        TAIL_PERIODS periods, and the remainder is approximated by its
        leading integration-by-parts term.
        """
        if not (self.periodic and self.operator == "heat"):
            return np.zeros_like(F)
        n = self.spec.n
        m = F.mean(axis=tuple(range(1, n + 1)))
        mbar = m.mean()
        mt = m - mbar
        T0 = self.tau_max
        P = self.period_t
        if density is None:
            res = self._cesaro(mt, T0)
        else:
            T1 = T0 + TAIL_PERIODS * P
            taus, ws = self.tau_rule_uniform(T0, T1)
            res = self._shifted_sum(mt, taus, ws * density(taus))
            res = res + density(np.array([T1]))[0] * self._cesaro(mt, T1)
            res = res + mbar * survival(T0)
        shape = (-1,) + (1,) * n
        return np.broadcast_to(res.reshape(shape), F.shape).astype(F.dtype, copy=True)

    def tau_rule_uniform(self, a, b):
        h = self.spec.h_t
        k = int(math.ceil((b - a) / h))
        edges = a + (b - a) * np.arange(k + 1) / k
        lo, hi = edges[:-1, None], edges[1:, None]
        nodes = (lo + (hi - lo) * _LEG_X).ravel()
        weights = ((hi - lo) * _LEG_W).ravel()
        return nodes, weights

    def _shifted_sum(self, m, taus, ws):
        """sum_q ws_q m_I(t_a - tau_q) with periodic cubic interpolation."""
        h = self.spec.h_t
        N = m.size
        q = taus / h
        k0 = np.floor(q).astype(int)
        a = np.arange(N)
        out = np.zeros(N, dtype=m.dtype)
        for r in range(-1, 3):
            k = k0 + r
            wk = cardinal(q - k) * ws
            idx = (a[None, :] - k[:, None]) % N
            out += wk @ m[idx]
        return out

    def _cesaro(self, mt, T):
        P = self.period_t
        taus, ws = self.tau_rule_uniform(T, T + P)
        return self._shifted_sum(mt, taus, ws * (T + P - taus) / P)
