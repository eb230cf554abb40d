"""Offline double-precision ground truth for instantaneous phase.

Zero-phase second-order Butterworth bandpass (forward-backward), then the
analytic signal from a frequency-domain Hilbert transform computed with an
in-package radix-2 FFT.
"""

import numpy as np
from scipy import signal as sps

from .errors import DataError


def _check_pow2(n):
    if n < 1 or n & (n - 1):
        raise ValueError(f"FFT length must be a power of two, got {n}")


def _bit_reverse(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


def fft(x):
    """Iterative radix-2 decimation-in-time FFT (length must be a power of two)."""
    a = np.asarray(x, dtype=np.complex128)
    n = a.size
    _check_pow2(n)
    a = a[_bit_reverse(n)]
    m = 1
    while m < n:
        w = np.exp(-1j * np.pi * np.arange(m) / m)
        blocks = a.reshape(-1, 2 * m)
        even = blocks[:, :m]
        odd = blocks[:, m:] * w
        a = np.concatenate([even + odd, even - odd], axis=1).ravel()
        m *= 2
    return a


def ifft(X):
    X = np.asarray(X, dtype=np.complex128)
    return np.conj(fft(np.conj(X))) / X.size


def next_pow2(n):
    return 1 << max(0, int(n - 1).bit_length())


def analytic_signal(x):
    """x + j*H{x}, zero-padding to a power of two and truncating back."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    N = next_pow2(n)
    X = fft(np.concatenate([x, np.zeros(N - n)]))
    h = np.zeros(N)
    h[0] = 1.0
    if N > 1:
        h[N // 2] = 1.0
        h[1:N // 2] = 2.0
    return ifft(X * h)[:n]


def butter_bandpass(band, rate_hz, order=2):
    """Butterworth bandpass sections (``order`` poles per band edge)."""
    return sps.butter(order, [band.f_lo_hz, band.f_hi_hz], btype="bandpass", fs=rate_hz, output="sos")


def zero_phase_bandpass(x, band, rate_hz, order=2):
    return sps.sosfiltfilt(butter_bandpass(band, rate_hz, order), np.asarray(x, dtype=np.float64))


def oracle_analytic(trace, band, rate_hz):
    """Complex analytic signal of the zero-phase bandpassed trace."""
    trace = np.asarray(trace, dtype=np.float64)
    if trace.size < 8 * rate_hz / band.f_lo_hz:
        raise DataError(f"trace of {trace.size} samples is shorter than 8 cycles of {band.f_lo_hz} Hz")
    return analytic_signal(zero_phase_bandpass(trace, band, rate_hz))


def oracle_ground_truth(trace, band, rate_hz=4000.0):
    """Per-sample phase in [-pi, pi) of the ground-truth analytic signal."""
    phi = np.angle(oracle_analytic(trace, band, rate_hz))
    return np.where(phi >= np.pi, -np.pi, phi)
