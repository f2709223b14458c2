"""Pure numpy implementation of the compiled kernels (fallback backend)."""
import numpy as np

FOUR_PI = 4.0 * np.pi


def _p0_terms(s, R, alpha, beta, k):
    rho = np.hypot(s, R)
    c, sn = np.cos(k * rho), np.sin(k * rho)
    num = alpha + beta * s
    return rho, c, sn, num


def bessel_j0(z):
    """J0 by the trapezoid rule on (1/pi) int_0^pi cos(z sin t) dt (spectrally accurate)."""
    z = np.asarray(z, dtype=float)
    n = max(64, int(np.max(np.abs(z), initial=0.0)) + 48)
    t = (np.arange(n) + 0.5) * (np.pi / n)
    return np.cos(z[..., None] * np.sin(t)).mean(axis=-1)


def inner_pieces(R, s_lo, s_hi, alpha, beta, k, touch_lo, touch_hi, nodes, weights, panels):
    """Split form of int_{s_lo}^{s_hi} exp(-jk rho) (alpha + beta s) / (4 pi rho) ds, rho = hypot(s, R).

    Returns (A, G_re, G_im) with integral = A ln R + G_re + j G_im. The real part uses
    two integrations by parts against ln(rho + s). At a touching end (s of order R)
    ln(rho + s) is split as ln R + asinh(s/R); when both ends touch, asinh(s/R) is the
    antiderivative throughout and there is no ln R term. A is reported as the exact
    log coefficient -+alpha J0(kR) / (4 pi), which keeps G smooth as R -> 0.
    """
    R = np.asarray(R, dtype=float)
    s_lo = np.asarray(s_lo, dtype=float)
    s_hi = np.asarray(s_hi, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    tlo = np.asarray(touch_lo, dtype=bool)
    thi = np.asarray(touch_hi, dtype=bool)
    nodes = np.asarray(nodes, dtype=float)
    weights = np.asarray(weights, dtype=float)
    Rsafe = np.where(R > 0, R, 1.0)
    both = tlo & thi & (R > 0)

    A = np.zeros_like(R)
    G = np.zeros_like(R)
    for s_e, sign, touch in ((s_hi, 1.0, thi), (s_lo, -1.0, tlo)):
        rho, c, sn, num = _p0_terms(s_e, R, alpha, beta, k)
        p0 = c * num / FOUR_PI
        dp0 = (-k * sn * (s_e / rho) * num + c * beta) / FOUR_PI
        with np.errstate(divide="ignore", invalid="ignore"):
            ash = np.where(R > 0, np.arcsinh(s_e / Rsafe), 0.0)
            L = np.where(touch, ash, np.log(rho + s_e))
        single = touch & ~both & (R > 0)
        a_ibp = sign * (p0 - dp0 * s_e)
        a_true = sign * alpha * bessel_j0(k * R) / FOUR_PI
        A += np.where(single, a_true, 0.0)
        G += sign * (p0 * L - dp0 * (s_e * L - rho))
        G += np.where(single, (a_ibp - a_true) * np.log(Rsafe), 0.0)

    # composite Gauss over each [s_lo, s_hi]
    m = nodes.size
    edges = np.linspace(0.0, 1.0, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    tt = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    ww = (half[:, None] * weights[None, :]).ravel()
    span = (s_hi - s_lo)[:, None]
    s = s_lo[:, None] + span * tt[None, :]
    Rb, ab, bb = R[:, None], alpha[:, None], beta[:, None]
    rho, c, sn, num = _p0_terms(s, Rb, ab, bb, k)
    rp = s / rho
    rpp = Rb * Rb / rho ** 3
    d2 = (-k * k * c * rp * rp * num - k * sn * rpp * num - 2.0 * k * sn * rp * bb) / FOUR_PI
    with np.errstate(divide="ignore"):
        L = np.where(both[:, None], np.arcsinh(s / Rsafe[:, None]), np.log(rho + s))
    H = s * L - rho
    G += (d2 * H) @ ww * span[:, 0]
    sinc = k * np.sinc(k * rho / np.pi)
    Gi = -(sinc * num / FOUR_PI) @ ww * span[:, 0]
    return A, G, Gi
