"""Bivariate standard normal and Student t distribution functions.

The normal case uses the single-integral (Plackett) reduction

    Phi2(h, k; rho) = Phi(h) Phi(k)
        + 1/(2 pi) int_0^{asin rho} exp(-(h^2 + k^2 - 2 h k sin t) / (2 cos^2 t)) dt

evaluated by composite Gauss-Legendre quadrature.  The Student case uses the
Dunnett-Sobel finite recursion for integer degrees of freedom (as in Genz's
``bvtl``) and falls back to adaptive quadrature of the conditional
distribution for non-integer degrees of freedom.
"""

import numpy as np
from scipy import integrate, special

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _gl_panels(a, b, panels):
    """Nodes/weights of composite Gauss-Legendre on [a, b] (a, b arrays)."""
    edges = np.linspace(0.0, 1.0, panels + 1)
    lo, hi = edges[:-1], edges[1:]
    t = ((hi - lo)[:, None] * (_GL_NODES[None, :] + 1.0) / 2.0 + lo[:, None]).ravel()
    w = ((hi - lo)[:, None] * _GL_WEIGHTS[None, :] / 2.0).ravel()
    a = np.asarray(a)[..., None]
    b = np.asarray(b)[..., None]
    return a + (b - a) * t, (b - a) * w


def bvn_cdf(h, k, rho):
    """P(X <= h, Y <= k) for standard bivariate normal with correlation rho.

    Broadcasts over ``h`` and ``k``; ``rho`` is a scalar in [-1, 1].
    """
    h, k = np.broadcast_arrays(np.asarray(h, dtype=float), np.asarray(k, dtype=float))
    shape = h.shape
    h = h.ravel()
    k = k.ravel()
    rho = float(rho)
    out = np.empty(h.shape)

    ninf = (h == -np.inf) | (k == -np.inf)
    hinf = h == np.inf
    kinf = k == np.inf
    out[ninf] = 0.0
    m = ~ninf & hinf
    out[m] = special.ndtr(k[m])
    m = ~ninf & ~hinf & kinf
    out[m] = special.ndtr(h[m])
    fin = ~ninf & ~hinf & ~kinf
    if np.any(fin):
        out[fin] = _bvn_finite(h[fin], k[fin], rho)
    return out.reshape(shape)


def _bvn_finite(h, k, rho):
    base = special.ndtr(h) * special.ndtr(k)
    if rho == 0.0:
        return base
    if abs(rho) >= 1.0:
        if rho > 0:
            return special.ndtr(np.minimum(h, k))
        return np.maximum(special.ndtr(h) - special.ndtr(-k), 0.0)
    upper = np.arcsin(rho)
    panels = 1 if abs(rho) <= 0.925 else 12
    t, w = _gl_panels(0.0, upper, panels)
    s = np.sin(t)
    c2 = np.cos(t) ** 2
    hh = h[:, None]
    kk = k[:, None]
    expo = -(hh * hh + kk * kk - 2.0 * hh * kk * s) / (2.0 * c2)
    val = base + np.exp(expo) @ w / (2.0 * np.pi)
    return np.clip(val, 0.0, 1.0)


def _t_cdf(x, nu):
    return special.stdtr(nu, x)


def bvt_cdf(h, k, rho, nu):
    """P(X <= h, Y <= k) for the standard bivariate t with correlation rho."""
    h, k = np.broadcast_arrays(np.asarray(h, dtype=float), np.asarray(k, dtype=float))
    shape = h.shape
    h = h.ravel()
    k = k.ravel()
    rho = float(rho)
    nu = float(nu)
    out = np.empty(h.shape)

    ninf = (h == -np.inf) | (k == -np.inf)
    hinf = h == np.inf
    kinf = k == np.inf
    out[ninf] = 0.0
    m = ~ninf & hinf
    out[m] = _t_cdf(k[m], nu)
    m = ~ninf & ~hinf & kinf
    out[m] = _t_cdf(h[m], nu)
    fin = ~ninf & ~hinf & ~kinf
    if np.any(fin):
        if nu == np.floor(nu) and nu >= 1:
            out[fin] = _bvt_integer(h[fin], k[fin], rho, int(nu))
        else:
            out[fin] = _bvt_quad(h[fin], k[fin], rho, nu)
    return out.reshape(shape)


def _bvt_integer(dh, dk, r, nu):
    if 1.0 - r < 1e-15:
        return _t_cdf(np.minimum(dh, dk), nu)
    if r + 1.0 < 1e-15:
        return np.where(dh > -dk, _t_cdf(dh, nu) - _t_cdf(-dk, nu), 0.0)
    tpi = 2.0 * np.pi
    ors = 1.0 - r * r
    hrk = dh - r * dk
    krh = dk - r * dh
    denom_h = hrk**2 + ors * (nu + dk**2)
    denom_k = krh**2 + ors * (nu + dh**2)
    xnhk = np.where(denom_h > 0, hrk**2 / np.where(denom_h > 0, denom_h, 1.0), 0.0)
    xnkh = np.where(denom_k > 0, krh**2 / np.where(denom_k > 0, denom_k, 1.0), 0.0)
    hs = np.sign(hrk)
    ks = np.sign(krh)
    if nu % 2 == 0:
        bvt = np.full(dh.shape, np.arctan2(np.sqrt(ors), -r) / tpi)
        gmph = dh / np.sqrt(16.0 * (nu + dh**2))
        gmpk = dk / np.sqrt(16.0 * (nu + dk**2))
        btnckh = 2.0 * np.arctan2(np.sqrt(xnkh), np.sqrt(1.0 - xnkh)) / np.pi
        btpdkh = 2.0 * np.sqrt(xnkh * (1.0 - xnkh)) / np.pi
        btnchk = 2.0 * np.arctan2(np.sqrt(xnhk), np.sqrt(1.0 - xnhk)) / np.pi
        btpdhk = 2.0 * np.sqrt(xnhk * (1.0 - xnhk)) / np.pi
        for j in range(1, nu // 2 + 1):
            bvt = bvt + gmph * (1.0 + ks * btnckh)
            bvt = bvt + gmpk * (1.0 + hs * btnchk)
            btnckh = btnckh + btpdkh
            btpdkh = 2 * j * btpdkh * (1.0 - xnkh) / (2 * j + 1)
            btnchk = btnchk + btpdhk
            btpdhk = 2 * j * btpdhk * (1.0 - xnhk) / (2 * j + 1)
            gmph = gmph * (2 * j - 1) / (2 * j * (1.0 + dh**2 / nu))
            gmpk = gmpk * (2 * j - 1) / (2 * j * (1.0 + dk**2 / nu))
    else:
        qhrk = np.sqrt(dh**2 + dk**2 - 2.0 * r * dh * dk + nu * ors)
        hkrn = dh * dk + r * nu
        hkn = dh * dk - nu
        hpk = dh + dk
        bvt = np.arctan2(-np.sqrt(nu) * (hkn * qhrk + hpk * hkrn),
                         hkn * hkrn - nu * hpk * qhrk) / tpi
        bvt = np.where(bvt < -1e-15, bvt + 1.0, bvt)
        gmph = dh / (tpi * np.sqrt(nu) * (1.0 + dh**2 / nu))
        gmpk = dk / (tpi * np.sqrt(nu) * (1.0 + dk**2 / nu))
        btnckh = np.sqrt(xnkh)
        btpdkh = btnckh.copy()
        btnchk = np.sqrt(xnhk)
        btpdhk = btnchk.copy()
        for j in range(1, (nu - 1) // 2 + 1):
            bvt = bvt + gmph * (1.0 + ks * btnckh)
            bvt = bvt + gmpk * (1.0 + hs * btnchk)
            btpdkh = (2 * j - 1) * btpdkh * (1.0 - xnkh) / (2 * j)
            btnckh = btnckh + btpdkh
            btpdhk = (2 * j - 1) * btpdhk * (1.0 - xnhk) / (2 * j)
            btnchk = btnchk + btpdhk
            gmph = 2 * j * gmph / ((2 * j + 1) * (1.0 + dh**2 / nu))
            gmpk = 2 * j * gmpk / ((2 * j + 1) * (1.0 + dk**2 / nu))
    return np.clip(bvt, 0.0, 1.0)


def _bvt_quad(h, k, rho, nu):
    """Integrate t_nu(x) * P(Y <= k | X = x) over x <= h, one point at a time."""
    scale = np.sqrt(1.0 - rho * rho)
    out = np.empty(h.shape)

    def integrand(x, kk):
        z = (kk - rho * x) / (scale * np.sqrt((nu + x * x) / (nu + 1.0)))
        return np.exp(_t_logpdf(x, nu)) * special.stdtr(nu + 1.0, z)

    for i, (hi, ki) in enumerate(zip(h, k)):
        val, _ = integrate.quad(integrand, -np.inf, hi, args=(ki,),
                                epsabs=1e-12, epsrel=1e-10, limit=200)
        out[i] = val
    return np.clip(out, 0.0, 1.0)


def _t_logpdf(x, nu):
    return (special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2)
            - 0.5 * np.log(nu * np.pi) - (nu + 1) / 2 * np.log1p(x * x / nu))
