"""Kernels for the generalized stop.

The vegetation density is confined to a moving band ``[lo, hi]`` whose ends
depend on the prey and predator densities. Everything here is pointwise and
works on scalars or numpy arrays alike (``lo``/``hi`` broadcast against
``sigma``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Band:
    """Closed interval ``[lo, hi]`` with ``0 <= lo <= hi <= 1``."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (0.0 <= self.lo <= self.hi <= 1.0):
            raise ValueError(f"invalid band [{self.lo}, {self.hi}]")

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi


def _ends(band):
    if isinstance(band, Band):
        return band.lo, band.hi
    lo, hi = band
    return lo, hi


def yosida_force(sigma, band, mu):
    """Yosida regularization of the band indicator's subdifferential.

    ``(1/mu) * ([sigma - hi]^+ - [lo - sigma]^+)``: zero on the band,
    growing linearly with slope ``1/mu`` outside it.
    """
    if not np.all(np.asarray(mu) > 0):
        raise ValueError(f"mu must be positive, got {mu}")
    lo, hi = _ends(band)
    return (np.maximum(sigma - hi, 0.0) - np.maximum(lo - sigma, 0.0)) / mu


def project(sigma, band):
    """Nearest point of the band (the resolvent of the subdifferential)."""
    lo, hi = _ends(band)
    return np.minimum(np.maximum(sigma, lo), hi)


def subdiff_contains(sigma, band, force, tol=0.0):
    """Whether ``force`` lies in the subdifferential at ``sigma`` up to ``tol``.

    The tolerance is absolute and applied to both coordinates of the graph:
    ``sigma`` may leave the band by ``tol``, a strictly interior ``sigma``
    admits ``|force| <= tol``, the upper face admits ``force >= -tol`` and the
    lower face ``force <= tol``. On a degenerate band every force is admitted.
    """
    lo, hi = _ends(band)
    sigma = np.asarray(sigma, dtype=float)
    force = np.asarray(force, dtype=float)
    inside = (sigma >= lo - tol) & (sigma <= hi + tol)
    below_top = sigma < hi - tol
    above_bottom = sigma > lo + tol
    ok = inside & (~below_top | (force <= tol)) & (~above_bottom | (force >= -tol))
    if ok.ndim == 0:
        return bool(ok)
    return ok


def implicit_yosida_step(rhs, band, mu, dt):
    """Backward-Euler resolvent of the Yosida term.

    Solves ``s + (dt/mu) * ([s - hi]^+ - [lo - s]^+) = rhs`` for ``s``. The
    left side is piecewise linear and strictly increasing, so the inverse is
    explicit on each of the three branches.
    """
    if not (np.all(np.asarray(mu) > 0) and np.all(np.asarray(dt) > 0)):
        raise ValueError("mu and dt must be positive")
    lo, hi = _ends(band)
    c = 1.0 + dt / mu
    out = np.where(rhs > hi, hi + (rhs - hi) / c, rhs)
    out = np.where(rhs < lo, lo + (rhs - lo) / c, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def band_hausdorff(a, b):
    """Hausdorff distance between intervals: ``max(|lo_a-lo_b|, |hi_a-hi_b|)``."""
    lo_a, hi_a = _ends(a)
    lo_b, hi_b = _ends(b)
    return np.maximum(np.abs(lo_a - lo_b), np.abs(hi_a - hi_b))
