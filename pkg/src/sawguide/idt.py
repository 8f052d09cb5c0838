"""Interdigital transducer admittance (crossed-field Mason model) and 50-ohm matching.

The transducer is treated as transversal (no electrode reflections or mass
loading). For a uniform IDT with ``N`` electrode pairs at center frequency
``f0`` the radiation conductance is

    G(f) = G0 * sinc(X)**2,   X = N*pi*(f - f0)/f0,   G0 = 8*k2*f0*Cs*W*N**2

and the radiation susceptance is its Hilbert pair, G0*(sin(2X) - 2X)/(2X**2).
The static capacitance C_T = N*Cs*W adds 2*pi*f*C_T to the susceptance.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from sawguide.materials import EPSILON_0


class GridSpanError(ValueError):
    pass


class InfiniteImpedanceError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class ModeParams:
    velocity: float
    k2: float

    def __post_init__(self):
        if not self.velocity > 0:
            raise ValueError("mode velocity must be > 0")
        if not 0 < self.k2 < 1:
            raise ValueError(f"k2 must lie in (0, 1), got {self.k2}")


@dataclass(frozen=True)
class IdtDesign:
    """Uniform IDT. ``pitch`` is the electrode-pair period (one wavelength is
    two pitches), ``static_capacitance_per_pair_per_length`` is C_s in F/m."""

    pairs: int
    aperture: float
    pitch: float
    static_capacitance_per_pair_per_length: float
    mode: ModeParams

    def __post_init__(self):
        if isinstance(self.mode, dict):
            object.__setattr__(self, "mode", ModeParams(**self.mode))
        if int(self.pairs) != self.pairs or self.pairs < 1:
            raise ValueError("pairs must be an integer >= 1")
        if not self.aperture > 0:
            raise ValueError("aperture must be > 0")
        if not self.pitch > 0:
            raise ValueError("pitch must be > 0")
        if not self.static_capacitance_per_pair_per_length > 0:
            raise ValueError("C_s must be > 0")

    @property
    def wavelength(self):
        return 2.0 * self.pitch

    @property
    def center_frequency(self):
        return self.mode.velocity / self.wavelength

    @property
    def static_capacitance(self):
        return self.pairs * self.static_capacitance_per_pair_per_length * self.aperture

    @property
    def peak_conductance(self):
        return (8.0 * self.mode.k2 * self.center_frequency
                * self.static_capacitance_per_pair_per_length * self.aperture * self.pairs ** 2)

    def required_span(self):
        f0 = self.center_frequency
        return f0 - 3 * f0 / self.pairs, f0 + 3 * f0 / self.pairs

    def to_dict(self):
        return asdict(self)


@dataclass
class AdmittanceSpectrum:
    frequency_grid: np.ndarray
    conductance: np.ndarray
    susceptance: np.ndarray
    static_capacitance: float
    static_capacitance_stderr: float = 0.0

    @property
    def admittance(self):
        return self.conductance + 1j * self.susceptance

    @property
    def impedance(self):
        return 1.0 / self.admittance

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        buf.write(f"# static_capacitance_F={self.static_capacitance!r}\n")
        w.writerow(["frequency_hz", "conductance_s", "susceptance_s"])
        for f, g, b in zip(self.frequency_grid, self.conductance, self.susceptance):
            w.writerow([repr(float(f)), repr(float(g)), repr(float(b))])
        return buf.getvalue()


def default_static_capacitance(film, substrate=None):
    """C_s (F/m) for 50 % metallization: eps0 + eps_p of the piezoelectric film,
    with eps_p = sqrt(eps11*eps33) (the film carries most of the electrode field)."""
    eps = np.asarray(film.permittivity)
    return EPSILON_0 + math.sqrt(eps[0, 0] * eps[2, 2])


def _radiation_susceptance_shape(x):
    """(sin 2X - 2X) / (2 X^2), with its series near X = 0."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-3
    xs = x[small]
    out[small] = -2.0 * xs / 3.0 + 2.0 * xs ** 3 / 15.0
    xl = x[~small]
    out[~small] = (np.sin(2 * xl) - 2 * xl) / (2 * xl ** 2)
    return out


def admittance_at(design, frequency):
    """Complex admittance at arbitrary frequencies (no grid checks)."""
    f = np.asarray(frequency, dtype=float)
    f0 = design.center_frequency
    x = design.pairs * np.pi * (f - f0) / f0
    g0 = design.peak_conductance
    g = g0 * np.sinc(x / np.pi) ** 2
    b = g0 * _radiation_susceptance_shape(x) + 2 * np.pi * f * design.static_capacitance
    return g + 1j * b


def synthesize_admittance(design, frequency_grid):
    f = np.asarray(frequency_grid, dtype=float)
    if f.ndim != 1 or f.size < 2 or np.any(np.diff(f) <= 0):
        raise GridSpanError("frequency grid must be 1-D and strictly increasing")
    lo, hi = design.required_span()
    if f[0] > lo or f[-1] < hi:
        raise GridSpanError(f"frequency grid must span at least [{lo:.6g}, {hi:.6g}] Hz "
                            f"(f0 +/- 3 f0/N); got [{f[0]:.6g}, {f[-1]:.6g}] Hz")
    y = admittance_at(design, f)
    return AdmittanceSpectrum(f, y.real.copy(), y.imag.copy(), design.static_capacitance)


def default_grid(design, lobes=3.0, points_per_lobe=200):
    """Uniform grid over f0 +/- lobes*f0/N."""
    f0 = design.center_frequency
    half = lobes * f0 / design.pairs
    n = int(2 * lobes * points_per_lobe) + 1
    return np.linspace(f0 - half, f0 + half, n)


def impedance_s11(z, z0=50.0):
    if not z0 > 0:
        raise ValueError("reference impedance must be > 0")
    z = np.asarray(z, dtype=complex)
    s = (z - z0) / (z + z0)
    return s if s.ndim else complex(s)


def s11_to_impedance(s11, z0=50.0):
    if not z0 > 0:
        raise ValueError("reference impedance must be > 0")
    s = np.asarray(s11, dtype=complex)
    if np.any(s == 1):
        raise InfiniteImpedanceError("S11 = 1 corresponds to an open circuit (infinite Z)")
    if np.any(np.abs(s) > 1):
        raise ValueError("|S11| > 1 is not a passive one-port")
    z = z0 * (1 + s) / (1 - s)
    return z if z.ndim else complex(z)


@dataclass
class MatchResult:
    design: IdtDesign
    impedance: complex      # Z(f0), ohm
    residual: float         # |Z(f0) - target|, ohm
    status: str = "ok"
    message: str = ""


def _as_pairs(spec):
    if isinstance(spec, (int, np.integer)):
        return [int(spec)]
    spec = list(spec)
    if len(spec) == 2 and all(float(v).is_integer() for v in spec):
        lo, hi = int(spec[0]), int(spec[1])
        return list(range(lo, hi + 1))
    return sorted(int(v) for v in spec)


def match_design(target_z0, mode, c_s, bounds, wavelength=1.6e-6):
    """Best (N, W) for |Z(f0) - target_z0|.

    ``bounds["pairs"]`` is an inclusive integer range ``(lo, hi)`` (or a list
    of values); ``bounds["aperture"]`` is ``(lo, hi)`` in metres. For each N
    the aperture optimum is found in closed form (Y is linear in W) and
    clipped to the bounds. Ties go to the lowest N, then the lowest W.
    When even the best residual exceeds the target impedance the result
    carries ``status="warning"`` and a warning is emitted.
    """
    if isinstance(mode, dict):
        mode = ModeParams(**mode)
    pairs = _as_pairs(bounds["pairs"])
    w_lo, w_hi = (float(v) for v in bounds["aperture"])
    if not pairs or not 0 < w_lo <= w_hi:
        raise ValueError("bounds must contain at least one design with aperture > 0")
    pitch = wavelength / 2
    f0 = mode.velocity / wavelength
    best = None
    for n in pairs:
        unit = IdtDesign(n, 1.0, pitch, c_s, mode)
        y1 = complex(admittance_at(unit, f0))        # admittance per metre of aperture
        zinv = 1.0 / y1                              # Z = zinv / W
        u = target_z0 * zinv.real / abs(zinv) ** 2   # optimal 1/W
        w = 1.0 / u if u > 0 else w_hi
        w = min(max(w, w_lo), w_hi)
        z = zinv / w
        res = abs(z - target_z0)
        if best is None or res < best[0]:
            best = (res, n, w, z)
    res, n, w, z = best
    design = IdtDesign(n, w, pitch, c_s, mode)
    out = MatchResult(design, z, res)
    if res > target_z0:
        out.status = "warning"
        out.message = (f"no reasonable match: best residual {res:.1f} ohm exceeds the "
                       f"{target_z0:g} ohm target")
        warnings.warn(out.message, RuntimeWarning, stacklevel=2)
    return out
