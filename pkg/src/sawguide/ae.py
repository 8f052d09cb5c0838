"""Acoustoelectric amplifier DC power and wave-mixing width scaling."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from importlib import resources

import numpy as np

from sawguide.materials import EPSILON_0

ELEMENTARY_CHARGE = 1.602176634e-19


@dataclass(frozen=True)
class AeDeviceParams:
    carrier_density: float     # 1/m^3
    mobility: float            # m^2/(V s)
    width: float               # m
    thickness: float           # m
    length: float              # m
    acoustic_velocity: float   # m/s
    permittivity_sum: float    # eps0 + eps_p, F/m
    elementary_charge: float = ELEMENTARY_CHARGE

    def __post_init__(self):
        for name in ("carrier_density", "mobility", "width", "thickness", "length",
                     "acoustic_velocity", "permittivity_sum", "elementary_charge"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")

    def with_changes(self, **kw):
        return replace(self, **kw)


def effective_permittivity_sum(film):
    """eps0 + eps_p with eps_p = sqrt(eps11 * eps33) of the piezoelectric film."""
    eps = np.asarray(film.permittivity)
    return EPSILON_0 + math.sqrt(eps[0, 0] * eps[2, 2])


def load_defaults(path=None):
    if path is None:
        text = resources.files("sawguide.data").joinpath("ae_defaults.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return json.loads(text)


def params_from_config(cfg, film=None, width=None):
    if "permittivity_sum" in cfg:
        eps = float(cfg["permittivity_sum"])
    else:
        if film is None:
            from sawguide.materials import lookup_material

            film = lookup_material(cfg.get("piezo_film", "AlScN-42"))
        eps = effective_permittivity_sum(film)
    return AeDeviceParams(
        carrier_density=float(cfg["carrier_density_cm3"]) * 1e6,
        mobility=float(cfg["mobility_cm2_per_Vs"]) * 1e-4,
        width=float(width if width is not None else cfg["slab_width_m"]),
        thickness=float(cfg["thickness_m"]),
        length=float(cfg["length_m"]),
        acoustic_velocity=float(cfg["acoustic_velocity_m_s"]),
        permittivity_sum=eps,
    )


def pdc_max(p):
    """DC power (W) dissipated at maximum AE gain:

        P = (q N mu w d / L0) * (v_a L0 / mu + N q d L0 / (eps0 + eps_p))**2
    """
    q, n, mu = p.elementary_charge, p.carrier_density, p.mobility
    prefactor = q * n * mu * p.width * p.thickness / p.length
    drift = (p.acoustic_velocity * p.length / mu
             + n * q * p.thickness * p.length / p.permittivity_sum)
    return prefactor * drift ** 2


def optimal_mobility(p):
    """Mobility minimizing pdc_max: mu* = v_a (eps0 + eps_p) / (N q d)."""
    return p.acoustic_velocity * p.permittivity_sum / (
        p.carrier_density * p.elementary_charge * p.thickness)


def pdc_map(template, widths, mobilities):
    """P_dc,Max on a (mobility, width) grid: rows are mobilities, columns widths."""
    widths = np.asarray(widths, dtype=float)
    mobilities = np.asarray(mobilities, dtype=float)
    if widths.size == 0 or mobilities.size == 0:
        raise ValueError("width and mobility ranges must be non-empty")
    out = np.empty((mobilities.size, widths.size))
    for i, mu in enumerate(mobilities):
        for j, w in enumerate(widths):
            out[i, j] = pdc_max(template.with_changes(mobility=float(mu), width=float(w)))
    return out


def power_reduction(slab_width, waveguide_width):
    """Fractional DC power saving of the narrow device at equal length (bare width ratio)."""
    return 1.0 - waveguide_width / slab_width


def loss_adjusted_power_reduction(slab_width, waveguide_width, alpha_slab, alpha_waveguide,
                                  electronic_gain):
    """Fractional power saving at equal net gain, including propagation loss.

    Net gain over length L is (g_e - alpha) L with electronic gain g_e and
    loss alpha in dB/mm; P_dc,Max is proportional to w L, so equal net gain
    needs L proportional to 1 / (g_e - alpha) and the power ratio is
    (w_wg / w_slab) * (g_e - alpha_slab) / (g_e - alpha_wg).
    """
    if not electronic_gain > max(alpha_slab, alpha_waveguide):
        raise ValueError("electronic gain must exceed both propagation losses")
    ratio = (waveguide_width / slab_width) * (electronic_gain - alpha_slab) / (
        electronic_gain - alpha_waveguide)
    return 1.0 - ratio


def mixing_enhancement(slab_width, waveguide_width):
    """Waveguide/slab ratio of |eta3 u1| at equal pump power.

    Scaling model: the acoustic amplitude at fixed power goes as
    1/sqrt(width), so the ratio is sqrt(slab_width / waveguide_width).
    """
    if not (slab_width > 0 and waveguide_width > 0):
        raise ValueError("widths must be > 0")
    return math.sqrt(slab_width / waveguide_width)


def scaled_mixing_coefficient(reference_value, reference_width, width):
    """Calibration hook: |eta3 u1| at ``width`` from a value known at ``reference_width``."""
    return reference_value * mixing_enhancement(reference_width, width)


def grid_from_range(spec, log=False):
    lo, hi, n = spec
    return np.geomspace(lo, hi, int(n)) if log else np.linspace(lo, hi, int(n))
