"""Compiled inner loops: counter-based RNG, inverse normal cdf, path simulation.

Every random draw is a pure function of ``(master_seed, stream_id, index)``:
the Philox4x64-10 block cipher is keyed by ``(master_seed, 0)`` and fed the
counter ``(index // 4, 0, stream_id, 0)``; lane ``index % 4`` of the output is
the 64-bit word for that draw.  Child streams are derived with the same cipher
under key ``(master_seed, 1)``.
"""

import math

import numba as nb
import numpy as np

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_ZERO = np.uint64(0)
_ONE = np.uint64(1)
_FOUR = np.uint64(4)
_THREE = np.uint64(3)
_TWO_M53 = 2.0**-53

_SQRT1_2 = 0.7071067811865476

STATUS_CAPPED = -1


@nb.njit(cache=True, inline="always")
def _mulhilo(a, b):
    lo = a * b
    a_lo = a & _MASK32
    a_hi = a >> _S32
    b_lo = b & _MASK32
    b_hi = b >> _S32
    p0 = a_lo * b_lo
    p1 = a_lo * b_hi
    p2 = a_hi * b_lo
    p3 = a_hi * b_hi
    mid = (p0 >> _S32) + (p1 & _MASK32) + (p2 & _MASK32)
    hi = p3 + (p1 >> _S32) + (p2 >> _S32) + (mid >> _S32)
    return hi, lo


@nb.njit(cache=True)
def philox4x64(c0, c1, c2, c3, k0, k1):
    """Philox4x64 with 10 rounds; bit-compatible with numpy's ``Philox``."""
    for r in range(10):
        if r > 0:
            k0 = k0 + _W0
            k1 = k1 + _W1
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@nb.njit(cache=True)
def derive_stream(seed, stream, index):
    out = philox4x64(np.uint64(index), stream, _ZERO, _ZERO, seed, _ONE)
    return out[0]


@nb.njit(cache=True)
def raw_word(seed, stream, index):
    block = np.uint64(index) >> np.uint64(2)
    lane = np.uint64(index) & _THREE
    c = philox4x64(block, _ZERO, stream, _ZERO, seed, _ZERO)
    if lane == 0:
        return c[0]
    if lane == 1:
        return c[1]
    if lane == 2:
        return c[2]
    return c[3]


@nb.njit(cache=True, inline="always")
def bits_to_uniform(b):
    # open interval (0, 1): never returns 0 or 1
    return (float(b >> _S11) + 0.5) * _TWO_M53


@nb.njit(cache=True)
def ndtri(p):
    """Inverse standard normal cdf, Wichura's AS241 (PPND16)."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r -= 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    val = num / den
    return -val if q < 0.0 else val


@nb.njit(cache=True, inline="always")
def upper_tail(x):
    return 0.5 * math.erfc(x * _SQRT1_2)


@nb.njit(cache=True)
def fill_words(seed, stream, start, out):
    for i in range(out.shape[0]):
        out[i] = raw_word(seed, stream, start + i)


@nb.njit(cache=True)
def fill_normals(seed, stream, start, out):
    n = out.shape[0]
    i = 0
    idx = start
    while i < n:
        block = np.uint64(idx) >> np.uint64(2)
        lane = idx & 3
        c = philox4x64(block, _ZERO, stream, _ZERO, seed, _ZERO)
        while lane < 4 and i < n:
            if lane == 0:
                b = c[0]
            elif lane == 1:
                b = c[1]
            elif lane == 2:
                b = c[2]
            else:
                b = c[3]
            out[i] = ndtri(bits_to_uniform(b))
            i += 1
            lane += 1
            idx += 1


@nb.njit(cache=True)
def ema(x, alpha, prev):
    s = math.sqrt(1.0 - alpha * alpha)
    out = np.empty_like(x)
    for t in range(x.shape[0]):
        prev = alpha * prev + s * x[t]
        out[t] = prev
    return out


@nb.njit(cache=True)
def hysteresis(xs, eta, w_prev):
    out = np.empty(xs.shape[0], dtype=np.int8)
    w = w_prev
    for t in range(xs.shape[0]):
        v = xs[t]
        if v >= eta:
            w = 1
        elif v <= -eta:
            w = -1
        out[t] = w
    return out


@nb.njit(cache=True)
def correlation_batches(seed, sx, se, sz, alpha, eta, rho, n_steps, burn_in,
                        n_batches, use_signal):
    """Stream the process without storing it; return per-batch sums/counts.

    ``use_signal`` switches the summand from w*y to rho*w*x (same mean, the
    noise term integrated out).
    """
    s = math.sqrt(1.0 - alpha * alpha)
    r = math.sqrt(1.0 - rho * rho)
    sums = np.zeros(n_batches)
    counts = np.zeros(n_batches, dtype=np.int64)
    n_avg = n_steps - burn_in
    z = ndtri(bits_to_uniform(raw_word(seed, sz, 0)))
    prev = z
    w = 0
    b = 0
    next_edge = (b + 1) * n_avg // n_batches
    t = 0
    while t < n_steps:
        block = np.uint64(t) >> np.uint64(2)
        cx = philox4x64(block, _ZERO, sx, _ZERO, seed, _ZERO)
        ce = philox4x64(block, _ZERO, se, _ZERO, seed, _ZERO)
        for lane in range(4):
            if t >= n_steps:
                break
            if lane == 0:
                bx, be = cx[0], ce[0]
            elif lane == 1:
                bx, be = cx[1], ce[1]
            elif lane == 2:
                bx, be = cx[2], ce[2]
            else:
                bx, be = cx[3], ce[3]
            x = ndtri(bits_to_uniform(bx))
            prev = alpha * prev + s * x
            if t == 0:
                w = 1 if prev >= 0.0 else -1
            if prev >= eta:
                w = 1
            elif prev <= -eta:
                w = -1
            if t >= burn_in:
                if use_signal:
                    v = rho * w * x
                else:
                    eps = ndtri(bits_to_uniform(be))
                    v = w * (rho * x + r * eps)
                k = t - burn_in
                while k >= next_edge:
                    b += 1
                    next_edge = (b + 1) * n_avg // n_batches
                sums[b] += v
                counts[b] += 1
            t += 1
    return sums, counts


@nb.njit(cache=True)
def survival_one(seed, stream, alpha, eta, tail_mass, cap):
    """One survival time on ``stream``: draw 0 places the start above eta."""
    s = math.sqrt(1.0 - alpha * alpha)
    u = bits_to_uniform(raw_word(seed, stream, 0))
    x = -ndtri(u * tail_mass)
    idx = 1
    t = 0
    while True:
        block = np.uint64(idx) >> np.uint64(2)
        lane = idx & 3
        c = philox4x64(block, _ZERO, stream, _ZERO, seed, _ZERO)
        while lane < 4:
            if lane == 0:
                b = c[0]
            elif lane == 1:
                b = c[1]
            elif lane == 2:
                b = c[2]
            else:
                b = c[3]
            t += 1
            x = alpha * x + s * ndtri(bits_to_uniform(b))
            if x <= -eta:
                return t
            if t >= cap:
                return STATUS_CAPPED
            lane += 1
            idx += 1


@nb.njit(cache=True)
def survival_many(seed, stream, first, n, alpha, eta, tail_mass, cap):
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        child = derive_stream(seed, stream, first + i)
        out[i] = survival_one(seed, child, alpha, eta, tail_mass, cap)
    return out
