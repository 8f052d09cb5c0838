"""Synthetic measurement data with known ground truth (for tests and demos)."""
from __future__ import annotations

import numpy as np

from sawguide.idt import admittance_at, impedance_s11
from sawguide.rfdata.touchstone import TwoPortSweep


def multimode_admittance(designs, frequency):
    """Admittance of one transducer carrying several modes.

    All designs must share the static capacitance; it is counted once.
    """
    f = np.asarray(frequency, dtype=float)
    c_t = designs[0].static_capacitance
    y = np.zeros(len(f), dtype=complex)
    for d in designs:
        if not np.isclose(d.static_capacitance, c_t, rtol=1e-12):
            raise ValueError("designs must share the static capacitance")
        y += admittance_at(d, f) - 1j * 2 * np.pi * f * d.static_capacitance
    return y + 1j * 2 * np.pi * f * c_t


def one_port_sweep(frequency, admittance, parasitics=None, noise=0.0, rng=None,
                   z0=50.0, metadata=None):
    """S11 sweep of ``admittance`` behind series R_s, L_s.

    ``noise`` is the relative size of independent multiplicative Gaussian
    noise on the real and imaginary parts of the total impedance (applied
    per component so the noisy one-port stays passive).
    """
    f = np.asarray(frequency, dtype=float)
    z = 1.0 / np.asarray(admittance, dtype=complex)
    if parasitics is not None:
        w = 2 * np.pi * f
        z = z + parasitics.series_resistance + 1j * w * parasitics.series_inductance
    if noise:
        rng = np.random.default_rng(rng)
        z = (z.real * (1 + noise * rng.standard_normal(len(f)))
             + 1j * z.imag * (1 + noise * rng.standard_normal(len(f))))
    return TwoPortSweep.from_s11(f, impedance_s11(z, z0), z0, metadata)


def loss_points(alpha_slab, alpha_wg, intercept_gap, lengths, noise_db=0.0, rng=None,
                intercept_slab=-20.0):
    """Peak |S21| (dB) vs length for slab and waveguide groups."""
    rng = np.random.default_rng(rng)
    pts = []
    for kind, alpha, b in (("slab", alpha_slab, intercept_slab),
                           ("waveguide", alpha_wg, intercept_slab - intercept_gap)):
        for i, length in enumerate(lengths):
            peak = b - alpha * length * 1e3 + noise_db * rng.standard_normal()
            pts.append({"device_id": f"{kind}-{i}", "kind": kind, "length": float(length),
                        "peak": float(peak)})
    return pts


def two_port_sweep(frequency, designs, peaks_db, parasitics=None, noise=0.0, rng=None,
                   z0=50.0, metadata=None, delay=0.0):
    """Reciprocal two-port: S11 from the transducer model, S21 a sum of sinc^2
    passbands whose maxima sit at ``peaks_db`` (one per design).

    S22 mirrors S11. ``delay`` (s) adds a linear transmission phase.
    """
    f = np.asarray(frequency, dtype=float)
    one = one_port_sweep(f, multimode_admittance(designs, f), parasitics, noise, rng, z0)
    s21 = np.zeros(len(f), dtype=complex)
    for d, peak in zip(designs, peaks_db):
        x = d.pairs * np.pi * (f - d.center_frequency) / d.center_frequency
        s21 += 10.0 ** (peak / 20.0) * np.sinc(x / np.pi) ** 2
    s21 = s21 * np.exp(-2j * np.pi * f * delay)
    s = np.zeros((len(f), 2, 2), dtype=complex)
    s[:, 0, 0] = s[:, 1, 1] = one.s11
    s[:, 1, 0] = s[:, 0, 1] = s21
    return TwoPortSweep(f, s, z0, dict(metadata or {}), ports=2)


def write_device_set(directory, designs, alpha, intercept, lengths, frequency,
                     parasitics=None, noise=0.0, noise_db=0.0, seed=0):
    """Write a manifest plus one .s2p per device for a slab/waveguide device set.

    ``alpha`` and ``intercept`` map kind -> (dB/mm, dB) and shape the peak
    |S21| of every mode; the returned list holds the ground-truth rows.
    """
    from pathlib import Path

    from sawguide.rfdata.touchstone import serialize_touchstone

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    rows = ["device_id,kind,length_um,file"]
    truth = []
    for kind in ("slab", "waveguide"):
        for i, length in enumerate(lengths):
            dev = f"{kind}-{i:02d}"
            peak = intercept[kind] - alpha[kind] * length * 1e3 + noise_db * rng.standard_normal()
            sw = two_port_sweep(frequency, designs, [peak] * len(designs), parasitics, noise,
                                rng)
            (directory / f"{dev}.s2p").write_text(serialize_touchstone(sw, comment=dev))
            rows.append(f"{dev},{kind},{float(length) * 1e6!r},{dev}.s2p")
            truth.append({"device_id": dev, "kind": kind, "length": float(length),
                          "peak": float(peak)})
    (directory / "manifest.csv").write_text("\n".join(rows) + "\n")
    return truth
