"""Circular summary statistics for phase-locking errors."""

from dataclasses import dataclass

import numpy as np

N_BINS = 36


@dataclass(frozen=True)
class CircularStats:
    n: int
    circular_mean_deg: float
    circular_resultant_r: float
    histogram: tuple

    def to_json(self):
        return {"n": self.n, "circular_mean_deg": self.circular_mean_deg,
                "circular_resultant_r": self.circular_resultant_r,
                "histogram": list(self.histogram)}


def wrap_deg(d):
    """Wrap degrees into [-180, 180)."""
    return (np.asarray(d, dtype=np.float64) + 180.0) % 360.0 - 180.0


def circular_stats(errors_deg, n_bins=N_BINS):
    """Mean direction, mean resultant length and a histogram over [-180, 180)."""
    e = wrap_deg(np.asarray(errors_deg, dtype=np.float64).ravel())
    if e.size == 0:
        return CircularStats(0, float("nan"), float("nan"), tuple([0] * n_bins))
    z = np.exp(1j * np.deg2rad(e)).mean()
    r = float(min(abs(z), 1.0))
    mean = float(wrap_deg(np.rad2deg(np.angle(z))))
    idx = np.clip(np.floor((e + 180.0) / (360.0 / n_bins)).astype(int), 0, n_bins - 1)
    hist = np.bincount(idx, minlength=n_bins)
    return CircularStats(int(e.size), mean, r, tuple(int(h) for h in hist))
