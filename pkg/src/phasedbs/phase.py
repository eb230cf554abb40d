"""Instantaneous phase extraction: LUT-based extractor, CORDIC reference, oracle.

Phase codes are signed 10-bit integers, ``c * 2*pi/1024`` radians, in
[-512, 511]; +pi maps to -512.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .fixedpoint import PHASE_CODES, rad_to_code

RECIP_BITS = 9
LIN_BITS = 7
LUT_SIZE = 256
CORDIC_ITERATIONS = 12
GUARD_BITS = 3  # fractional bits carried through the octant datapath


def _round_half_away(x):
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


@dataclass(frozen=True)
class LpeLuts:
    """Reciprocal (2^8 x 9 bit) and linearisation (2^8 x 7 bit) tables."""

    recip: np.ndarray
    lin: np.ndarray
    report: dict = field(default_factory=dict, compare=False)

    def to_json(self):
        return {
            "recip": [int(v) for v in self.recip],
            "lin": [int(v) for v in self.lin],
            "recip_bits": RECIP_BITS,
            "lin_bits": LIN_BITS,
            "sha256": self.digest(),
        }

    def digest(self):
        blob = json.dumps({"recip": [int(v) for v in self.recip],
                           "lin": [int(v) for v in self.lin]}, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_json(cls, doc):
        luts = cls(np.asarray(doc["recip"], dtype=np.int64), np.asarray(doc["lin"], dtype=np.int64))
        if "sha256" in doc and doc["sha256"] != luts.digest():
            raise ValueError("LUT content hash mismatch")
        return luts


def build_luts():
    """Generate both LPE tables plus a small generation report.

    ``recip[d] = round(2^17 / (256 + d)) - 256``: the stored 9-bit value, the
    reciprocal mantissa of a denominator whose 8 bits below the leading one
    are ``d`` being ``recip[d] + 256``.

    ``lin[x]`` is the first-octant correction ``atan(r) - (pi/4) r`` at
    ``r = x/256``, in eighths of a phase code.
    """
    recip = np.empty(LUT_SIZE, dtype=np.int64)
    lin = np.empty(LUT_SIZE, dtype=np.int64)
    for d in range(LUT_SIZE):
        den = 256 + d
        recip[d] = (2 * (1 << 17) + den) // (2 * den) - 256
    scale = PHASE_CODES / (2 * math.pi) * (1 << GUARD_BITS)
    for x in range(LUT_SIZE):
        r = x / LUT_SIZE
        lin[x] = _round_half_away((math.atan(r) - math.pi / 4 * r) * scale)
    if recip.max() >= 1 << RECIP_BITS or recip.min() < 0:
        raise AssertionError("reciprocal table exceeds 9 bits")
    if lin.max() >= 1 << LIN_BITS or lin.min() < 0:
        raise AssertionError("linearisation table exceeds 7 bits")
    peak = int(np.argmax(lin))
    report = {
        "recip_range": [int(recip.min()), int(recip.max())],
        "lin_range": [int(lin.min()), int(lin.max())],
        "lin_peak_index": peak,
        "lin_peak_deg": float(lin[peak]) / (1 << GUARD_BITS) * 360.0 / PHASE_CODES,
        "bits": {"recip": LUT_SIZE * RECIP_BITS, "lin": LUT_SIZE * LIN_BITS},
    }
    return LpeLuts(recip, lin, report)


_DEFAULT_LUTS = None


def default_luts():
    global _DEFAULT_LUTS
    if _DEFAULT_LUTS is None:
        _DEFAULT_LUTS = build_luts()
    return _DEFAULT_LUTS


def lpe_phase(re, im, luts=None, return_flags=False):
    """Phase code(s) of Q1.15 analytic pair(s) via the lightweight extractor.

    Accepts scalars or arrays. A zero pair yields code 0; pass
    ``return_flags=True`` to also get the degenerate-input mask.
    """
    luts = luts or default_luts()
    scalar = np.ndim(re) == 0 and np.ndim(im) == 0
    codes, flags = kernels.lpe_phase(np.atleast_1d(np.asarray(re, dtype=np.int64)),
                                     np.atleast_1d(np.asarray(im, dtype=np.int64)),
                                     luts.recip, luts.lin)
    if scalar:
        codes, flags = int(codes[0]), bool(flags[0])
    return (codes, flags) if return_flags else codes


def cordic_angles(iterations=CORDIC_ITERATIONS):
    scale = PHASE_CODES / (2 * math.pi) * (1 << GUARD_BITS)
    return np.array([_round_half_away(math.atan(2.0 ** -i) * scale) for i in range(iterations)],
                    dtype=np.int64)


_ANGLES = cordic_angles()


def cordic_phase(re, im, return_flags=False):
    """Phase code(s) from a 12-iteration vectoring CORDIC (16-bit datapath)."""
    scalar = np.ndim(re) == 0 and np.ndim(im) == 0
    codes, flags = kernels.cordic_phase(np.atleast_1d(np.asarray(re, dtype=np.int64)),
                                        np.atleast_1d(np.asarray(im, dtype=np.int64)),
                                        _ANGLES)
    if scalar:
        codes, flags = int(codes[0]), bool(flags[0])
    return (codes, flags) if return_flags else codes


def oracle_phase(re, im):
    """Double-precision four-quadrant angle in [-pi, pi); (0, 0) -> 0."""
    phi = np.arctan2(np.asarray(im, dtype=np.float64), np.asarray(re, dtype=np.float64))
    phi = np.where(phi >= np.pi, -np.pi, phi)
    if np.ndim(phi) == 0:
        return float(phi)
    return phi


def oracle_code(re, im):
    """Nearest phase code to the oracle angle."""
    return rad_to_code(oracle_phase(re, im))


def op_count_model(kind):
    """Static per-conversion operation counts of the two fixed datapaths.

    The LPE count follows the stages of :func:`kernels.lpe_phase`: two sign
    detections and one magnitude comparison, abs on both inputs, one shared
    normalising shift, two table reads, one multiply, the ``4x + lin[x]``
    add, the rounding add and up to two offset adds during reconstruction.
    """
    if kind == "lpe":
        return {"multiplies": 1, "table_lookups": 2, "comparisons": 3, "adds": 6,
                "shift_adds": 0, "angle_adds": 0, "shifts": 3, "output_bits": 10}
    if kind == "cordic":
        n = CORDIC_ITERATIONS
        return {"multiplies": 0, "table_lookups": 0, "comparisons": 2 + n, "adds": 5,
                "shift_adds": 2 * n, "angle_adds": n, "shifts": 1 + 2 * n, "output_bits": 10}
    raise ValueError(f"unknown kind {kind!r}")


def sweep_grid(bits=10):
    """Every signed ``bits``-bit (re, im) pair, flattened."""
    v = np.arange(-(1 << (bits - 1)), 1 << (bits - 1), dtype=np.int64)
    re, im = np.meshgrid(v, v, indexing="ij")
    return re.ravel(), im.ravel()


def sweep_errors(kind="lpe", bits=10):
    """Circular error in codes against the oracle over the exhaustive grid.

    The all-zero pair is excluded: its angle is undefined.
    """
    re, im = sweep_grid(bits)
    keep = (re != 0) | (im != 0)
    re, im = re[keep], im[keep]
    codes = lpe_phase(re, im) if kind == "lpe" else cordic_phase(re, im)
    exact = oracle_phase(re, im) * PHASE_CODES / (2 * math.pi)
    d = np.abs(codes - exact) % PHASE_CODES
    return np.minimum(d, PHASE_CODES - d)
