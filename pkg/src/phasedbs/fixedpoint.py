"""Integer helpers for Q1.15 datapaths and 10-bit phase codes."""

import numpy as np

Q15_ONE = 1 << 15
Q15_MAX = (1 << 15) - 1
Q15_MIN = -(1 << 15)

PHASE_BITS = 10
PHASE_CODES = 1 << PHASE_BITS  # 1024 codes per turn
PHASE_HALF = PHASE_CODES // 2

ACC_BITS = 40


def to_q15(x):
    """Round real values in [-1, 1) to saturated Q1.15 integers."""
    q = np.round(np.asarray(x, dtype=np.float64) * Q15_ONE).astype(np.int64)
    return np.clip(q, Q15_MIN, Q15_MAX)


def from_q15(q):
    return np.asarray(q, dtype=np.float64) / Q15_ONE


def saturate(v, lo=Q15_MIN, hi=Q15_MAX):
    """Clip to [lo, hi]; works on ints and arrays."""
    if isinstance(v, (int, np.integer)):
        return int(min(max(v, lo), hi))
    return np.clip(v, lo, hi)


def round_shift(acc, shift):
    """Arithmetic right shift with round-half-to-even, for Python ints."""
    if shift <= 0:
        return acc << -shift
    q = acc >> shift
    rem = acc - (q << shift)
    half = 1 << (shift - 1)
    if rem > half or (rem == half and q & 1):
        q += 1
    return q


def round_shift_array(acc, shift):
    """Vectorised :func:`round_shift` over int64 arrays."""
    acc = np.asarray(acc, dtype=np.int64)
    q = acc >> shift
    rem = acc - (q << shift)
    half = np.int64(1 << (shift - 1))
    up = (rem > half) | ((rem == half) & ((q & 1) == 1))
    return q + up


def wrap_phase(c):
    """Reinterpret an integer phase modulo 1024 as a signed code in [-512, 511]."""
    if isinstance(c, (int, np.integer)):
        return ((int(c) + PHASE_HALF) & (PHASE_CODES - 1)) - PHASE_HALF
    c = np.asarray(c, dtype=np.int64)
    return ((c + PHASE_HALF) & (PHASE_CODES - 1)) - PHASE_HALF


def circular_distance(a, b):
    """Absolute circular difference between phase codes, in codes."""
    return np.abs(wrap_phase(np.asarray(a, dtype=np.int64) - np.asarray(b, dtype=np.int64)))


def code_to_rad(c):
    return np.asarray(c, dtype=np.float64) * (2 * np.pi / PHASE_CODES)


def rad_to_code(phi):
    """Nearest phase code for an angle in radians, wrapped to [-512, 511]."""
    c = np.round(np.asarray(phi, dtype=np.float64) * (PHASE_CODES / (2 * np.pi))).astype(np.int64)
    return wrap_phase(c)
