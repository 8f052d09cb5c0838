"""Peak transmission and propagation/taper loss regression."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from sawguide.rfdata.errors import DomainError, UnderdeterminedError


@dataclass(frozen=True)
class BandPeak:
    frequency: float
    value: float      # dB


def band_peak(sweep, band):
    """Maximum of 20 log10 |S21| in ``band``; ties go to the lowest frequency."""
    lo, hi = sorted(float(v) for v in band)
    f = sweep.frequency_grid
    m = (f >= lo) & (f <= hi)
    if not m.any():
        raise DomainError(f"band [{lo:.6g}, {hi:.6g}] Hz holds no grid points "
                          f"(grid spans [{f[0]:.6g}, {f[-1]:.6g}] Hz)")
    mag = np.abs(sweep.s21[m])
    with np.errstate(divide="ignore"):
        db = 20 * np.log10(mag)
    i = int(np.argmax(db))
    return BandPeak(float(f[m][i]), float(db[i]))


@dataclass
class LossFitResult:
    """OLS fit of peak transmission (dB) vs length (mm).

    ``exact_fit`` marks fits with no residual degrees of freedom (two
    points): the line is exact and the uncertainties are not estimable, so
    they are reported as zero.
    """

    slope: float            # dB/mm
    intercept: float        # dB
    covariance: np.ndarray  # 2x2, (slope, intercept)
    n_points: int
    exact_fit: bool = False

    @property
    def alpha(self):
        return -self.slope

    @property
    def alpha_stderr(self):
        return math.sqrt(max(self.covariance[0, 0], 0.0))

    @property
    def intercept_stderr(self):
        return math.sqrt(max(self.covariance[1, 1], 0.0))

    def to_dict(self):
        return {"slope_db_per_mm": self.slope, "intercept_db": self.intercept,
                "alpha_db_per_mm": self.alpha, "alpha_stderr": self.alpha_stderr,
                "intercept_stderr": self.intercept_stderr,
                "covariance": self.covariance.tolist(), "n_points": self.n_points,
                "exact_fit": self.exact_fit}


def fit_line(lengths_m, peaks_db):
    x = np.asarray(lengths_m, dtype=float) * 1e3
    y = np.asarray(peaks_db, dtype=float)
    if np.unique(x).size < 2:
        raise UnderdeterminedError(
            f"need at least 2 distinct lengths, got {np.unique(x).size}")
    a = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    n = len(x)
    dof = n - 2
    if dof > 0:
        r = y - a @ coef
        cov = float(r @ r) / dof * np.linalg.inv(a.T @ a)
    else:
        cov = np.zeros((2, 2))
    return LossFitResult(float(coef[0]), float(coef[1]), cov, n, exact_fit=dof == 0)


@dataclass
class PropagationLossResult:
    slab: LossFitResult
    waveguide: LossFitResult
    taper_loss_2x: float
    taper_loss_2x_stderr: float

    def to_dict(self):
        return {"slab": self.slab.to_dict(), "waveguide": self.waveguide.to_dict(),
                "taper_loss_2x_db": self.taper_loss_2x,
                "taper_loss_2x_stderr": self.taper_loss_2x_stderr}


def _point(p):
    if isinstance(p, dict):
        return p
    length, peak, *rest = p
    return {"length": length, "peak": peak, "kind": rest[0] if rest else None}


def fit_propagation_loss(points, groups=None):
    """Per-group line fits and the taper loss from the intercept difference.

    ``points`` are dicts with ``length`` (m) and ``peak`` (dB) plus either
    ``kind`` ("slab"/"waveguide") or a ``device_id`` listed in ``groups``
    (``{"slab": ids, "waveguide": ids}``). Assuming equal transducer loss in
    both groups, ``taper_loss_2x = intercept_slab - intercept_waveguide``.
    """
    pts = [_point(p) for p in points]
    buckets = {"slab": [], "waveguide": []}
    for p in pts:
        kind = p.get("kind")
        if groups is not None and p.get("device_id") is not None:
            for g, ids in groups.items():
                if p["device_id"] in ids:
                    kind = g
        if kind in buckets:
            buckets[kind].append(p)
    fits = {}
    for kind, bucket in buckets.items():
        if not bucket:
            raise UnderdeterminedError(f"no {kind} devices to fit")
        fits[kind] = fit_line([p["length"] for p in bucket], [p["peak"] for p in bucket])
    slab, wg = fits["slab"], fits["waveguide"]
    gap = slab.intercept - wg.intercept
    se = math.sqrt(slab.covariance[1, 1] + wg.covariance[1, 1])
    return PropagationLossResult(slab, wg, gap, se)
