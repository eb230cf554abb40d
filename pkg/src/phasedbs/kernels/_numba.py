"""Numba-compiled twins of the kernels in ``_numpy``.

Loop-level code; signatures and results match the numpy path exactly.
"""

import numpy as np
from numba import njit

_Q15_MIN = -(1 << 15)
_Q15_MAX = (1 << 15) - 1
_ACC_MIN = -(1 << 39)
_ACC_MAX = (1 << 39) - 1


@njit(cache=True)
def _rhe15(acc):
    q = acc >> 15
    rem = acc - (q << 15)
    if rem > 16384 or (rem == 16384 and (q & 1) == 1):
        q += 1
    return q


@njit(cache=True)
def _fir_q15(xpad, taps, offset, step, count):
    nb, L = taps.shape
    y = np.empty((nb, max(count, 0)), dtype=np.int64)
    sat = np.zeros((nb, max(count, 0)), dtype=np.bool_)
    for b in range(nb):
        for j in range(count):
            base = offset + j * step + L - 1
            acc = np.int64(0)
            for k in range(L):
                acc += taps[b, k] * xpad[b, base - k]
            if acc > _ACC_MAX:
                acc = _ACC_MAX
            elif acc < _ACC_MIN:
                acc = _ACC_MIN
            q = _rhe15(acc)
            if q > _Q15_MAX:
                q = _Q15_MAX
                sat[b, j] = True
            elif q < _Q15_MIN:
                q = _Q15_MIN
                sat[b, j] = True
            y[b, j] = q
    return y, sat


def fir_q15(xpad, taps, offset, step, count):
    xpad = np.asarray(xpad, dtype=np.int64)
    taps = np.asarray(taps, dtype=np.int64)
    one = xpad.ndim == 1
    y, sat = _fir_q15(np.ascontiguousarray(np.atleast_2d(xpad)),
                      np.ascontiguousarray(np.atleast_2d(taps)),
                      int(offset), int(step), int(count))
    return (y[0], sat[0]) if one else (y, sat)


@njit(cache=True)
def _bit_length(v):
    n = 0
    while v > 0:
        v >>= 1
        n += 1
    return n


@njit(cache=True)
def _lpe_one(re, im, recip, lin):
    ar = abs(re)
    ai = abs(im)
    swap = ai > ar
    if swap:
        num, den = ar, ai
    else:
        num, den = ai, ar
    if den == 0:
        return 0, True
    shift = 16 - _bit_length(den)
    den_n = den << shift
    num_n = num << shift
    d = (den_n >> 7) & 0xFF
    mant = np.int64(recip[d]) + 256
    x = (num_n * mant + 32768) >> 16
    if x >= 256:
        theta8 = 1024
    else:
        theta8 = 4 * x + np.int64(lin[x])
    c = (theta8 + 4) >> 3
    if swap:
        c = 256 - c
    if re < 0:
        c = 512 - c
    if im < 0:
        c = -c
    return ((c + 512) & 1023) - 512, False


@njit(cache=True)
def _lpe_phase(re, im, recip, lin):
    n = re.shape[0]
    out = np.empty(n, dtype=np.int64)
    flags = np.empty(n, dtype=np.bool_)
    for i in range(n):
        out[i], flags[i] = _lpe_one(re[i], im[i], recip, lin)
    return out, flags


def lpe_phase(re, im, recip, lin):
    re = np.asarray(re, dtype=np.int64)
    shape = re.shape
    c, f = _lpe_phase(re.ravel(), np.asarray(im, dtype=np.int64).ravel(),
                      np.asarray(recip, dtype=np.int64), np.asarray(lin, dtype=np.int64))
    return c.reshape(shape), f.reshape(shape)


@njit(cache=True)
def _cordic_phase(re, im, angles):
    n = re.shape[0]
    out = np.empty(n, dtype=np.int64)
    flags = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        x = abs(re[i])
        y = abs(im[i])
        mag = max(x, y)
        if mag == 0:
            out[i] = 0
            flags[i] = True
            continue
        shift = 13 - _bit_length(mag)
        if shift >= 0:
            x <<= shift
            y <<= shift
        else:
            x >>= -shift
            y >>= -shift
        z = np.int64(0)
        for k in range(angles.shape[0]):
            xs = x >> k
            ys = y >> k
            if y >= 0:
                x, y = x + ys, y - xs
                z += angles[k]
            else:
                x, y = x - ys, y + xs
                z -= angles[k]
        c = (z + 4) >> 3
        if re[i] < 0:
            c = 512 - c
        if im[i] < 0:
            c = -c
        out[i] = ((c + 512) & 1023) - 512
    return out, flags


def cordic_phase(re, im, angles):
    re = np.asarray(re, dtype=np.int64)
    shape = re.shape
    c, f = _cordic_phase(re.ravel(), np.asarray(im, dtype=np.int64).ravel(),
                         np.asarray(angles, dtype=np.int64))
    return c.reshape(shape), f.reshape(shape)


@njit(cache=True)
def _sin_q(c, quarter):
    c &= 1023
    quad = c >> 8
    j = c & 255
    idx = 256 - j if (quad & 1) == 1 else j
    val = 256 if idx == 256 else np.int64(quarter[idx])
    return -val if quad >= 2 else val


@njit(cache=True)
def _trig_lookup(codes, quarter):
    n = codes.shape[0]
    cos_v = np.empty(n, dtype=np.int64)
    sin_v = np.empty(n, dtype=np.int64)
    for i in range(n):
        cos_v[i] = _sin_q(codes[i] + 256, quarter)
        sin_v[i] = _sin_q(codes[i], quarter)
    return cos_v, sin_v


def trig_lookup(codes, quarter):
    codes = np.asarray(codes, dtype=np.int64)
    shape = codes.shape
    cv, sv = _trig_lookup(codes.ravel(), np.asarray(quarter, dtype=np.int64))
    return cv.reshape(shape), sv.reshape(shape)


@njit(cache=True)
def _weighted_trig_sums(codes, weights, quarter):
    rows, n = codes.shape
    sc = np.zeros(rows, dtype=np.int64)
    ss = np.zeros(rows, dtype=np.int64)
    for r in range(rows):
        acc_c = np.int64(0)
        acc_s = np.int64(0)
        for i in range(n):
            w = weights[r, i]
            acc_c += w * _sin_q(codes[r, i] + 256, quarter)
            acc_s += w * _sin_q(codes[r, i], quarter)
        sc[r] = acc_c
        ss[r] = acc_s
    return sc, ss


def weighted_trig_sums(codes, weights, quarter):
    codes = np.asarray(codes, dtype=np.int64)
    weights = np.broadcast_to(np.asarray(weights, dtype=np.int64), codes.shape)
    lead = codes.shape[:-1]
    n = codes.shape[-1]
    sc, ss = _weighted_trig_sums(np.ascontiguousarray(codes.reshape(-1, n)),
                                 np.ascontiguousarray(weights.reshape(-1, n)),
                                 np.asarray(quarter, dtype=np.int64))
    return sc.reshape(lead), ss.reshape(lead)
