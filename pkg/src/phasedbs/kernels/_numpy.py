"""Pure-numpy implementations of the hot kernels.

Every function here has a bit-identical twin in ``_numba``; the pair is
checked against each other in the test suite.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

_Q15_MIN = -(1 << 15)
_Q15_MAX = (1 << 15) - 1
_ACC_MIN = -(1 << 39)
_ACC_MAX = (1 << 39) - 1


def _round_half_even(acc, shift):
    q = acc >> shift
    rem = acc - (q << shift)
    half = 1 << (shift - 1)
    return q + ((rem > half) | ((rem == half) & ((q & 1) == 1)))


def fir_q15(xpad, taps, offset, step, count):
    """Fixed-point FIR evaluated at ``count`` positions spaced by ``step``.

    ``xpad`` holds ``len(taps) - 1`` history samples followed by new ones;
    output ``j`` is the filter at new-sample position ``offset + j*step``.
    Products accumulate in 40 bits and are rounded half-to-even back to Q1.15.
    A 2-D ``xpad``/``taps`` pair filters each row with its own taps.
    Returns ``(y, saturated)`` where ``saturated`` flags clipped outputs.
    """
    xpad = np.asarray(xpad, dtype=np.int64)
    taps = np.asarray(taps, dtype=np.int64)
    L = taps.shape[-1]
    shape = xpad.shape[:-1] + (max(count, 0),)
    if count <= 0:
        return np.zeros(shape, dtype=np.int64), np.zeros(shape, dtype=bool)
    win = sliding_window_view(xpad, L, axis=-1)[..., offset:offset + (count - 1) * step + 1:step, :]
    if xpad.ndim == 1:
        acc = win @ taps[::-1]
    else:
        acc = np.einsum("bml,bl->bm", win, taps[:, ::-1])
    acc = np.clip(acc, _ACC_MIN, _ACC_MAX)
    y = _round_half_even(acc, 15)
    sat = (y > _Q15_MAX) | (y < _Q15_MIN)
    return np.clip(y, _Q15_MIN, _Q15_MAX).astype(np.int64), sat


def _bit_length(v):
    # exact for |v| < 2**53
    _, e = np.frexp(v.astype(np.float64))
    return e.astype(np.int64)


def lpe_phase(re, im, recip, lin):
    """Octant-reduced reciprocal/linearisation-LUT arctangent -> 10-bit codes."""
    re = np.asarray(re, dtype=np.int64)
    im = np.asarray(im, dtype=np.int64)
    ar = np.abs(re)
    ai = np.abs(im)
    swap = ai > ar
    num = np.where(swap, ar, ai)
    den = np.where(swap, ai, ar)
    degenerate = den == 0
    den = np.where(degenerate, 1, den)

    shift = 16 - _bit_length(den)
    den_n = den << shift
    num_n = num << shift
    d = (den_n >> 7) & 0xFF
    mant = recip[d].astype(np.int64) + 256
    x = (num_n * mant + (1 << 15)) >> 16
    xc = np.minimum(x, 255)
    theta8 = np.where(x >= 256, 1024, 4 * xc + lin[xc].astype(np.int64))
    c = (theta8 + 4) >> 3

    c = np.where(swap, 256 - c, c)
    c = np.where(re < 0, 512 - c, c)
    c = np.where(im < 0, -c, c)
    c = ((c + 512) & 1023) - 512
    c = np.where(degenerate, 0, c)
    return c, degenerate


def cordic_phase(re, im, angles):
    """Vectoring-mode CORDIC on a first-quadrant reduction, 16-bit datapath."""
    re = np.asarray(re, dtype=np.int64)
    im = np.asarray(im, dtype=np.int64)
    x = np.abs(re)
    y = np.abs(im)
    mag = np.maximum(x, y)
    degenerate = mag == 0
    shift = 13 - _bit_length(np.where(degenerate, 1, mag))
    left = np.maximum(shift, 0)
    right = np.maximum(-shift, 0)
    x = (x << left) >> right
    y = (y << left) >> right
    z = np.zeros_like(x)
    for i in range(angles.shape[0]):
        pos = y >= 0
        xs = x >> i
        ys = y >> i
        x, y = np.where(pos, x + ys, x - ys), np.where(pos, y - xs, y + xs)
        z = np.where(pos, z + angles[i], z - angles[i])
    c = (z + 4) >> 3
    c = np.where(re < 0, 512 - c, c)
    c = np.where(im < 0, -c, c)
    c = ((c + 512) & 1023) - 512
    c = np.where(degenerate, 0, c)
    return c, degenerate


def trig_lookup(codes, quarter):
    """(cos, sin) amplitudes (+-256) from a 256-entry quarter-wave table."""
    codes = np.asarray(codes, dtype=np.int64) & 1023
    return _sin_q(codes + 256, quarter), _sin_q(codes, quarter)


def _sin_q(c, quarter):
    c = c & 1023
    quad = c >> 8
    j = c & 255
    mirror = (quad & 1) == 1
    idx = np.where(mirror, 256 - j, j)
    val = np.where(idx == 256, 256, quarter[np.minimum(idx, 255)].astype(np.int64))
    return np.where(quad >= 2, -val, val)


def weighted_trig_sums(codes, weights, quarter):
    """Per-row sums of w*cos(c) and w*sin(c); rows are windows."""
    cos_v, sin_v = trig_lookup(codes, quarter)
    w = np.asarray(weights, dtype=np.int64)
    return (cos_v * w).sum(axis=-1), (sin_v * w).sum(axis=-1)
