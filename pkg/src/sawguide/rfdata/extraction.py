"""Parasitic fitting, de-embedding and k2 extraction from one-port data."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from sawguide.idt import AdmittanceSpectrum
from sawguide.rfdata.errors import (
    AmbiguousBandError,
    DomainError,
    PassivityError,
    UnderdeterminedError,
)

# relative RMS residual above which a fitting band is flagged as inconsistent
# with the series R-L-C model (e.g. it overlaps a resonance)
BAND_RESIDUAL_LIMIT = 0.05
MIN_BAND_POINTS = 10


@dataclass
class ParasiticModel:
    series_resistance: float = 0.0
    series_inductance: float = 0.0
    static_capacitance: float = 1e-12
    # fit diagnostics (zero for user-supplied models)
    static_capacitance_stderr: float = 0.0
    stderr: dict = field(default_factory=dict)
    residual: float = 0.0           # RMS |Z - model| over all fit points, ohm
    relative_residual: float = 0.0
    band_report: list = field(default_factory=list)

    def __post_init__(self):
        if self.series_resistance < 0 or self.series_inductance < 0:
            raise ValueError("R_s and L_s must be >= 0")
        if not self.static_capacitance > 0:
            raise ValueError("C_T must be > 0")

    @property
    def flagged_bands(self):
        return [b for b in self.band_report if b["flagged"]]

    def impedance(self, frequency):
        w = 2 * np.pi * np.asarray(frequency, dtype=float)
        return (self.series_resistance + 1j * w * self.series_inductance
                + 1.0 / (1j * w * self.static_capacitance))


def _impedance(sweep):
    s = sweep.s11
    mag = np.abs(s)
    bad = np.flatnonzero(mag >= 1.0)
    if bad.size:
        i = bad[0]
        raise PassivityError(sweep.frequency_grid[i], mag[i])
    return sweep.reference_impedance * (1 + s) / (1 - s)


def deembed(sweep, parasitics):
    """Admittance of the transducer after removing series R_s and L_s."""
    z = _impedance(sweep)
    w = 2 * np.pi * sweep.frequency_grid
    y = 1.0 / (z - parasitics.series_resistance - 1j * w * parasitics.series_inductance)
    return AdmittanceSpectrum(sweep.frequency_grid.copy(), y.real.copy(), y.imag.copy(),
                              parasitics.static_capacitance,
                              parasitics.static_capacitance_stderr)


def _band_mask(f, band):
    lo, hi = sorted(float(v) for v in band)
    return (f >= lo) & (f <= hi)


def fit_parasitics(sweep, off_resonance_bands, residual_limit=BAND_RESIDUAL_LIMIT):
    """Least-squares fit of Z = R_s + i w L_s + 1/(i w C_T) over the given bands.

    The model is linear in (R_s, L_s, 1/C_T); real and imaginary parts are
    stacked into one real system. Uncertainties come from the residual
    variance and the parameter covariance. Each band gets a relative RMS
    residual; bands above ``residual_limit`` (or with fewer than
    ``MIN_BAND_POINTS`` points) are flagged.
    """
    f = sweep.frequency_grid
    z = _impedance(sweep)
    masks = [_band_mask(f, b) for b in off_resonance_bands]
    sel = np.zeros(len(f), dtype=bool)
    for m in masks:
        sel |= m
    fs, zs = f[sel], z[sel]
    if np.unique(fs).size < 3:
        raise UnderdeterminedError(
            f"parasitic fit needs at least 3 distinct frequencies, got {np.unique(fs).size}")
    w = 2 * np.pi * fs
    n = len(fs)
    a = np.zeros((2 * n, 3))
    a[:n, 0] = 1.0
    a[n:, 1] = w
    a[n:, 2] = -1.0 / w
    rhs = np.concatenate([zs.real, zs.imag])
    scale = np.abs(a).max(axis=0)
    scale[scale == 0] = 1.0
    an = a / scale
    coef, _, rank, sv = np.linalg.lstsq(an, rhs, rcond=None)
    if rank < 3 or sv[-1] < 1e-12 * sv[0]:
        raise UnderdeterminedError("singular normal equations in parasitic fit "
                                   "(bands do not constrain R_s, L_s and C_T)")
    coef = coef / scale
    resid = rhs - a @ coef
    dof = max(2 * n - 3, 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(an.T @ an) / np.outer(scale, scale)
    r_s, l_s, d = coef
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    if not d > 0:
        raise UnderdeterminedError("fitted 1/C_T is not positive; check the fitting bands")
    c_t = 1.0 / d
    c_t_se = se[2] / d ** 2
    zfit = r_s + 1j * w * l_s + d / (1j * w)
    err = np.abs(zs - zfit)
    report = []
    for band, m in zip(off_resonance_bands, masks):
        mm = m[sel]
        npts = int(mm.sum())
        rel = float(np.sqrt(np.mean(err[mm] ** 2)) / np.mean(np.abs(zs[mm]))) if npts else math.nan
        flagged = npts < MIN_BAND_POINTS or not rel <= residual_limit
        report.append({"band": tuple(float(v) for v in band), "points": npts,
                       "relative_residual": rel, "flagged": flagged})
    rms = float(np.sqrt(np.mean(err ** 2)))
    # clip tiny negative estimates to the physical boundary
    model = ParasiticModel(max(r_s, 0.0), max(l_s, 0.0), c_t, c_t_se,
                           {"series_resistance": float(se[0]),
                            "series_inductance": float(se[1]),
                            "static_capacitance": float(c_t_se)},
                           rms, rms / float(np.mean(np.abs(zs))), report)
    return model


@dataclass
class K2Estimate:
    k2: float
    stderr: float
    center_frequency: float
    static_capacitance: float
    components: dict = field(default_factory=dict)


def _edge_tail(g, f, f0, side, frac=0.2):
    """Estimated conductance integral (S*Hz) beyond one band edge.

    For a sinc^2 response the envelope-averaged tail beyond an edge f_e is
    about mean(G near f_e) * |f_e - f0|.
    """
    n = max(int(frac * len(g)), 1)
    if side == "low":
        return float(np.mean(g[:n])) * abs(f[0] - f0)
    return float(np.mean(g[-n:])) * abs(f[-1] - f0)


def extract_k2(spectrum, band, static_capacitance=None, static_capacitance_stderr=None,
               peak_ratio=0.5):
    """k2 = (pi/4) * integral(G dw) / (w0^2 C_T) over ``band``.

    w0 is taken at the conductance maximum. The reported value is not
    corrected for the tails outside the band; their estimated size enters
    the uncertainty together with the C_T uncertainty. A second peak of at
    least ``peak_ratio`` times the maximum makes the band ambiguous.
    """
    c_t = spectrum.static_capacitance if static_capacitance is None else static_capacitance
    c_se = (spectrum.static_capacitance_stderr if static_capacitance_stderr is None
            else static_capacitance_stderr)
    if not c_t > 0:
        raise ValueError("C_T must be > 0")
    f = np.asarray(spectrum.frequency_grid, dtype=float)
    m = _band_mask(f, band)
    if m.sum() < 3:
        raise DomainError(f"band {tuple(band)} holds fewer than 3 grid points")
    fb = f[m]
    g = np.asarray(spectrum.conductance, dtype=float)[m]
    gmax = float(g.max())
    if gmax <= 0:
        return K2Estimate(0.0, 0.0, float("nan"), c_t, {"c_t": 0.0, "truncation": 0.0})
    peaks, _ = find_peaks(g, height=peak_ratio * gmax, prominence=0.5 * peak_ratio * gmax)
    if len(peaks) > 1:
        raise AmbiguousBandError(
            f"{len(peaks)} comparable conductance peaks in band at "
            + ", ".join(f"{fb[p]:.6g} Hz" for p in peaks))
    i0 = int(np.argmax(g))
    f0 = float(fb[i0])
    w0 = 2 * np.pi * f0
    integral_f = float(np.trapezoid(g, fb))
    k2 = math.pi / 4 * (2 * math.pi * integral_f) / (w0 ** 2 * c_t)
    tail = _edge_tail(np.clip(g, 0, None), fb, f0, "low") + _edge_tail(np.clip(g, 0, None),
                                                                      fb, f0, "high")
    s_trunc = abs(k2) * tail / integral_f if integral_f > 0 else 0.0
    s_c = abs(k2) * (c_se / c_t)
    return K2Estimate(k2, math.hypot(s_trunc, s_c), f0, c_t,
                      {"c_t": s_c, "truncation": s_trunc})
