"""Spin-strain coupling of divacancy spins to acoustic strain fields.

The strain-induced change of the zero-field tensor is dD = G . e with D
ordered (Dxx, Dyy, Dzz, Dyz, Dxz, Dxy) and e the engineering Voigt strain.
The two transition terms are

    omega1 = (Dxz - i Dxy) / sqrt(2)         (dm_s = +-1)
    omega2 = (Dxx - Dyy) / 2 - i Dxy          (dm_s = +-2)

Maps are reported in Hz for the normalization of the input strain (one
phonon per wavelength for profiles from the dispersion module).
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

D_ORDER = ("Dxx", "Dyy", "Dzz", "Dyz", "Dxz", "Dxy")
STRAIN_COLUMNS = ("exx", "eyy", "ezz", "eyz", "exz", "exy")


class NormalizationError(ValueError):
    """Input strain is not normalized per phonon."""


@dataclass(frozen=True)
class SpinStrainTensor:
    g: np.ndarray      # (6, 6) Hz per unit (engineering Voigt) strain
    source: str

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.shape != (6, 6):
            raise ValueError(f"g must be 6x6, got {g.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError("g must be finite")
        if not str(self.source).strip():
            raise ValueError("a source citation is required")
        object.__setattr__(self, "g", g)


def c3v_tensor(g11, g12, g13, g14, g31, g33, g41, g44, source):
    """6x6 spin-strain matrix with C3v structure (z along the symmetry axis)."""
    g66 = 0.5 * (g11 - g12)
    g = np.array([
        [g11, g12, g13, g14, 0.0, 0.0],
        [g12, g11, g13, -g14, 0.0, 0.0],
        [g31, g31, g33, 0.0, 0.0, 0.0],
        [g41, -g41, 0.0, g44, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, g44, g41],
        [0.0, 0.0, 0.0, 0.0, g14, g66],
    ])
    return SpinStrainTensor(g, source)


def load_spin_tensor(path=None):
    if path is None:
        text = resources.files("sawguide.data").joinpath("spin_strain_hh.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    d = json.loads(text)
    if "g" in d:
        return SpinStrainTensor(np.array(d["g"], dtype=float), d.get("source", ""))
    return c3v_tensor(source=d.get("source", ""), **{k: float(v) for k, v in
                                                      d["parameters_hz"].items()})


def zero_field_shift(strain, g):
    """dD = g . strain; works on a single 6-vector or an (n, 6) array."""
    e = np.asarray(strain, dtype=complex)
    if e.shape[-1] != 6:
        raise ValueError("strain must have 6 Voigt components in its last axis")
    if not np.all(np.isfinite(e)):
        raise ValueError("strain must be finite")
    return e @ g.g.T


def transition_couplings(dshift):
    d = np.asarray(dshift, dtype=complex)
    omega1 = (d[..., 4] - 1j * d[..., 5]) / math.sqrt(2.0)
    omega2 = 0.5 * (d[..., 0] - d[..., 1]) - 1j * d[..., 5]
    if d.ndim == 1:
        return {"omega1_term": complex(omega1), "omega2_term": complex(omega2)}
    return {"omega1_term": omega1, "omega2_term": omega2}


@dataclass
class StrainGrid:
    """Strain sampled on points (x lateral, y depth), engineering Voigt, per point."""

    x: np.ndarray
    y: np.ndarray
    strain: np.ndarray         # (n, 6) complex
    normalization: str = "per_phonon"
    phonon_energy: Optional[float] = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.strain = np.asarray(self.strain, dtype=complex)
        n = len(self.x)
        if self.y.shape != (n,) or self.strain.shape != (n, 6):
            raise ValueError("x, y and strain must describe the same number of points")


@dataclass
class SpinCouplingMap:
    x: np.ndarray
    y: np.ndarray
    omega1_term: np.ndarray
    omega2_term: np.ndarray
    normalization: str = "per_phonon"
    phonon_energy: Optional[float] = None
    metadata: dict = field(default_factory=dict)

    def _peak(self, values):
        if values.size == 0:
            return {"value": 0.0, "x": math.nan, "y": math.nan}
        i = int(np.argmax(np.abs(values)))
        return {"value": float(abs(values[i])), "x": float(self.x[i]), "y": float(self.y[i])}

    @property
    def max_omega1(self):
        return self._peak(self.omega1_term)

    @property
    def max_omega2(self):
        return self._peak(self.omega2_term)

    def summary(self):
        return {"normalization": self.normalization, "phonon_energy_j": self.phonon_energy,
                "points": int(self.x.size), "max_abs_omega1_hz": self.max_omega1,
                "max_abs_omega2_hz": self.max_omega2, **self.metadata}

    def to_csv(self):
        buf = io.StringIO()
        buf.write(f"# normalization={self.normalization} phonon_energy_J={self.phonon_energy!r}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x_m", "y_m", "omega1_re_hz", "omega1_im_hz", "omega2_re_hz",
                    "omega2_im_hz"])
        for row in zip(self.x, self.y, self.omega1_term, self.omega2_term):
            x, y, a, b = row
            w.writerow([repr(float(v)) for v in (x, y, a.real, a.imag, b.real, b.imag)])
        return buf.getvalue()


def _profile_grid(profile):
    sub = profile.region == profile.region.max()
    return (StrainGrid(np.zeros(int(sub.sum())), profile.depth_grid[sub], profile.strain[sub],
                       profile.normalization, profile.phonon_energy),
            {"source": "depth_profile", "frequency_hz": profile.frequency,
             "wavelength_m": profile.wavelength})


def coupling_map(fields, g, region=None):
    """Transition-term map for a FieldProfile (substrate points only) or a StrainGrid.

    ``region`` optionally restricts a StrainGrid to a boolean mask or a
    callable ``(x, y) -> mask`` selecting the substrate; profiles are
    always restricted to the substrate. Only points in the region appear
    in the map.
    """
    if getattr(fields, "normalization", None) != "per_phonon":
        raise NormalizationError(
            f"strain must be normalized per phonon, got {getattr(fields, 'normalization', None)!r}")
    if isinstance(fields, StrainGrid):
        grid, meta = fields, {"source": "strain_grid"}
        if region is not None:
            mask = region(grid.x, grid.y) if callable(region) else np.asarray(region, dtype=bool)
            grid = StrainGrid(grid.x[mask], grid.y[mask], grid.strain[mask],
                              grid.normalization, grid.phonon_energy)
    else:
        grid, meta = _profile_grid(fields)
    terms = transition_couplings(zero_field_shift(grid.strain, g)) if grid.x.size else {
        "omega1_term": np.zeros(0, complex), "omega2_term": np.zeros(0, complex)}
    return SpinCouplingMap(grid.x.copy(), grid.y.copy(), np.asarray(terms["omega1_term"]),
                           np.asarray(terms["omega2_term"]), grid.normalization,
                           grid.phonon_energy, meta)


# Strain grid file: '#' header lines with key=value pairs (normalization,
# phonon_energy_J), then a header row x_m,y_m,<comp>_re,<comp>_im for the
# tensor components exx..exy. Shear columns are tensor (not engineering)
# strains and are doubled on import.

def _grid_header():
    cols = ["x_m", "y_m"]
    for c in STRAIN_COLUMNS:
        cols += [f"{c}_re", f"{c}_im"]
    return cols


def read_strain_grid(text):
    meta = {}
    rows = []
    lines = text.splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    meta[k] = v
        elif line.strip():
            body.append(line)
    reader = csv.reader(body)
    header = next(reader, None)
    if header is None:
        raise ValueError("strain grid has no header row")
    header = [h.strip() for h in header]
    missing = [c for c in _grid_header() if c not in header]
    if missing:
        raise ValueError(f"strain grid is missing columns: {', '.join(missing)}")
    idx = {c: header.index(c) for c in _grid_header()}
    for lineno, r in enumerate(reader, start=2):
        try:
            rows.append([float(r[idx[c]]) for c in _grid_header()])
        except (ValueError, IndexError) as exc:
            raise ValueError(f"strain grid row {lineno}: {exc}") from None
    a = np.array(rows, dtype=float).reshape(-1, 14)
    tensor = a[:, 2::2] + 1j * a[:, 3::2]
    strain = tensor * np.array([1, 1, 1, 2, 2, 2])
    energy = meta.get("phonon_energy_J")
    return StrainGrid(a[:, 0], a[:, 1], strain, meta.get("normalization", "unspecified"),
                      float(energy) if energy not in (None, "None") else None)


def write_strain_grid(grid):
    buf = io.StringIO()
    buf.write(f"# normalization={grid.normalization} phonon_energy_J={grid.phonon_energy!r}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_grid_header())
    tensor = grid.strain / np.array([1, 1, 1, 2, 2, 2])
    for x, y, e in zip(grid.x, grid.y, tensor):
        vals = [x, y]
        for c in e:
            vals += [c.real, c.imag]
        w.writerow([repr(float(v)) for v in vals])
    return buf.getvalue()


def profile_to_grid(profile, lateral=None):
    """Extrude a substrate depth profile into x-invariant strips at ``lateral`` positions."""
    sub = profile.region == profile.region.max()
    xs = np.zeros(1) if lateral is None else np.asarray(lateral, dtype=float)
    y = profile.depth_grid[sub]
    e = profile.strain[sub]
    return StrainGrid(np.repeat(xs, len(y)), np.tile(y, len(xs)), np.tile(e, (len(xs), 1)),
                      profile.normalization, profile.phonon_energy)
