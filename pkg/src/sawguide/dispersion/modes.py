"""Guided-mode search, coupling coefficients and depth-resolved fields."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import minimize_scalar

from sawguide.dispersion.boundary import (
    boundary_matrix,
    family_indices,
    is_decoupled,
    layer_fields,
    secular_function,
    stack_waves,
    substrate_fields,
)
from sawguide.dispersion.stroh import (
    C_REF,
    PHI_SCALE,
    DegenerateStrohError,
    limiting_velocity,
    medium,
)

log = logging.getLogger(__name__)

PLANCK = 6.62607015e-34

LABELS = ("rayleigh_like", "sezawa_like", "other")
NORMALIZATIONS = ("unit_power", "per_phonon", "unnormalized")

# root acceptance: |det| at a candidate relative to |det| a small step away;
# a true zero gives a V-shaped dip, a spurious minimum a flat floor
_DET_RATIO = 1e-2
_PROBE = 1e4  # probe step in units of xtol
_MAX_BISECT = 200


class ConvergenceError(ArithmeticError):
    def __init__(self, bracket):
        self.bracket = bracket
        super().__init__(f"bisection did not converge in {_MAX_BISECT} iterations "
                         f"on bracket [{bracket[0]!r}, {bracket[1]!r}] m/s")


class ModeTrackingError(LookupError):
    pass


class DegenerateModeError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SearchRange:
    v_min: float
    v_max: float
    grid_points: int = 800

    def __post_init__(self):
        if not 0 < self.v_min < self.v_max:
            raise ValueError("need 0 < v_min < v_max")
        if self.grid_points < 3:
            raise ValueError("grid_points must be >= 3")


@dataclass
class FieldProfile:
    """Depth-resolved fields of one mode.

    ``depth_grid`` is 0 at the surface and positive downward; interface
    depths appear twice (once per side) and ``region`` gives the medium
    index of every point (layers first, substrate last). ``strain`` uses
    engineering shears. Energies refer to one wavelength of propagation
    over a lateral ``width``.
    """

    depth_grid: np.ndarray
    displacement: np.ndarray   # (n, 3) complex, m
    strain: np.ndarray         # (n, 6) complex
    potential: np.ndarray      # (n,) complex, V
    normalization: str
    phonon_energy: Optional[float]
    region: np.ndarray
    density: np.ndarray        # (n,) kg/m^3
    stiffness: np.ndarray      # (n_media, 6, 6) Pa
    frequency: float
    wavelength: float
    width: float
    total_thickness: float
    power: float = float("nan")     # W carried through the cross-section

    def scaled(self, factor, normalization="unnormalized"):
        return replace(self, displacement=self.displacement * factor,
                       strain=self.strain * factor, potential=self.potential * factor,
                       power=self.power * abs(factor) ** 2, normalization=normalization,
                       phonon_energy=None)

    def _integrate(self, density_line):
        total = 0.0
        for r in np.unique(self.region):
            sel = self.region == r
            if sel.sum() > 1:
                total += simpson(density_line[sel], x=self.depth_grid[sel])
        return total

    def kinetic_density(self):
        """Time-averaged kinetic energy density (J/m^3)."""
        omega = 2 * np.pi * self.frequency
        return 0.25 * self.density * omega ** 2 * np.sum(np.abs(self.displacement) ** 2, axis=1)

    def strain_energy_density(self):
        """Time-averaged elastic strain energy density (J/m^3)."""
        c = self.stiffness[self.region]
        s = self.strain
        return 0.25 * np.real(np.einsum("ni,nij,nj->n", s.conj(), c, s))

    def energy_per_wavelength(self):
        """Total (kinetic + potential) energy per wavelength over ``width``, J."""
        return 2.0 * self._integrate(self.kinetic_density()) * self.wavelength * self.width

    def energy_fraction_below(self, depth):
        dens = self.kinetic_density()
        total = self._integrate(dens)
        deep = self.depth_grid >= depth
        part = 0.0
        for r in np.unique(self.region):
            sel = (self.region == r) & deep
            if sel.sum() > 1:
                part += simpson(dens[sel], x=self.depth_grid[sel])
        return part / total

    def strain_maximum_depth(self):
        return float(self.depth_grid[int(np.argmax(self.strain_energy_density()))])


@dataclass
class ModeSolution:
    label: str
    phase_velocity: float
    wavelength: float
    frequency: float
    k2: float
    fields: Optional[FieldProfile]
    top_bc: str = "free_open"
    polarization: str = "sagittal"
    status: str = "ok"

    def summary(self):
        return {"label": self.label, "phase_velocity": self.phase_velocity,
                "wavelength": self.wavelength, "frequency": self.frequency,
                "k2": self.k2, "top_bc": self.top_bc, "polarization": self.polarization,
                "status": self.status}


# -- evaluation helpers -------------------------------------------------------------

def _waves(stack, velocity):
    v = velocity
    for attempt in range(4):
        try:
            return v, stack_waves(stack, v)
        except DegenerateStrohError:
            v = velocity * (1.0 + 1e-9 * 10 ** attempt)
    return v, stack_waves(stack, v)


def _evaluate(stack, velocity, wavelength, indices):
    v, w = _waves(stack, velocity)
    f, leaky = secular_function(stack, v, wavelength, indices, waves=w)
    m, _, _ = boundary_matrix(stack, v, wavelength, waves=w)
    return f, abs(np.linalg.det(m)), leaky


def _secular(stack, velocity, wavelength, indices):
    v, w = _waves(stack, velocity)
    return secular_function(stack, v, wavelength, indices, waves=w)[0]


def _absdet(stack, velocity, wavelength):
    v, w = _waves(stack, velocity)
    m, _, _ = boundary_matrix(stack, v, wavelength, waves=w)
    return abs(np.linalg.det(m))


def _bisect(fun, a, b, fa, xtol):
    for _ in range(_MAX_BISECT):
        if b - a <= xtol:
            return 0.5 * (a + b)
        m = 0.5 * (a + b)
        fm = fun(m)
        if fm == 0.0:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    raise ConvergenceError((a, b))


def default_search(stack, grid_points=800):
    v_lim = limiting_velocity(stack.substrate)
    v_low = min(limiting_velocity(m) for m in stack.media)
    return SearchRange(0.5 * v_low, v_lim * (1.0 - 1e-6), grid_points)


def find_roots(stack, wavelength, search, polarization="sagittal", xtol=1e-6):
    """Velocities (m/s, ascending) where the boundary problem is singular.

    Sign changes of the real secular function are bisected; roots are kept
    only where the global |det| also collapses in a V-shaped dip, which
    rejects the poles of the surface impedance. Local |det| minima not
    explained by a sign change (a root squeezed against a pole inside one
    scan cell) are zoomed into until the sign change shows up. A |det| zero
    without a secular sign change is an artefact of nearly coalescing
    partial waves and is not reported.
    """
    indices = family_indices(stack, polarization)
    vs = np.linspace(search.v_min, search.v_max, search.grid_points)
    vals = [_evaluate(stack, v, wavelength, indices) for v in vs]
    f = np.array([x[0] for x in vals])
    d = np.array([x[1] for x in vals])
    if any(x[2] for x in vals):
        raise ValueError("search range reaches the substrate bulk threshold; "
                         "lower v_max below the limiting velocity")
    sec = lambda v: _secular(stack, v, wavelength, indices)  # noqa: E731
    det = lambda v: _absdet(stack, v, wavelength)  # noqa: E731

    roots = []
    h = _PROBE * xtol

    def is_zero(r):
        return det(r) < _DET_RATIO * min(det(r - h), det(r + h))

    def try_bracket(a, b, fa, fb):
        r = a if fa == 0.0 else _bisect(sec, a, b, fa, xtol)
        if abs(sec(r)) <= min(abs(fa), abs(fb)) and is_zero(r):
            roots.append(r)

    for i in range(len(vs) - 1):
        if np.sign(f[i]) != np.sign(f[i + 1]):
            try_bracket(vs[i], vs[i + 1], f[i], f[i + 1])

    step = vs[1] - vs[0]
    for i in range(1, len(vs) - 1):
        if not (d[i] < d[i - 1] and d[i] < d[i + 1]):
            continue
        if any(abs(r - vs[i]) < 1.5 * step for r in roots):
            continue
        res = minimize_scalar(det, bounds=(vs[i - 1], vs[i + 1]), method="bounded",
                              options={"xatol": xtol})
        if not is_zero(res.x):
            continue
        # a root squeezed against a pole may show no sign change on a coarse
        # sub-grid; zoom in around the |det| minimum
        before = len(roots)
        half = step
        while len(roots) == before and half > 1e3 * xtol:
            lo, hi = max(res.x - half, search.v_min), min(res.x + half, search.v_max)
            fine = np.linspace(lo, hi, 41)
            ff = np.array([sec(v) for v in fine])
            for j in range(len(fine) - 1):
                if np.sign(ff[j]) != np.sign(ff[j + 1]):
                    try_bracket(fine[j], fine[j + 1], ff[j], ff[j + 1])
            half /= 20.0
    roots = sorted(set(float(r) for r in roots))
    merged = []
    for r in roots:
        if merged and r - merged[-1] <= 10 * xtol:
            continue
        merged.append(r)
    return merged


# -- fields --------------------------------------------------------------------------

def _depth_grids(stack, wavelength, extent, dz_layer, dz_sub):
    pieces = []
    z = 0.0
    for layer in stack.layers:
        n = max(int(math.ceil(layer.thickness / dz_layer)) + 1, 3)
        pieces.append(np.linspace(z, z + layer.thickness, n))
        z += layer.thickness
    n = max(int(math.ceil(extent / dz_sub)) + 1, 3)
    pieces.append(np.linspace(z, z + extent, n))
    return pieces


def _substrate_extent(sub, wavelength):
    k = 2 * np.pi / wavelength
    q = np.linalg.eigvals(sub.schur)
    slowest = max(q.imag.min(), 1e-6)
    # energy decays as exp(-2 k Im q z); go to exp(-30)
    return float(np.clip(15.0 / (k * slowest), 10 * wavelength, 400 * wavelength))


def mode_fields_at(stack, wavelength, velocity, normalization="per_phonon", width=None,
                   dz=None):
    """Fields of the mode at a known root ``velocity``.

    The partial-wave amplitudes are the null vector of the global boundary
    matrix. ``width`` (default three wavelengths) is the lateral extent used
    for energy and power bookkeeping of this laterally unbounded solution.
    """
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
    width = 3 * wavelength if width is None else width
    dz_layer = wavelength / 100 if dz is None else dz
    dz_sub = wavelength / 50 if dz is None else dz
    if dz_sub > wavelength / 50:
        raise ValueError("depth grid resolution must be <= wavelength/50")
    k = 2 * np.pi / wavelength
    omega = k * velocity
    v, w = _waves(stack, velocity)
    m, waves, sub = boundary_matrix(stack, v, wavelength, waves=w)
    _, s, vh = np.linalg.svd(m)
    if s[-2] < 1e-6 * s[0]:
        raise DegenerateModeError(
            f"null space of the boundary matrix is not one-dimensional at v = {velocity} m/s")
    amp = vh[-1].conj()

    grids = _depth_grids(stack, wavelength, _substrate_extent(sub, wavelength),
                         dz_layer, dz_sub)
    xis, regions = [], []
    for j, (g, wv) in enumerate(zip(grids[:-1], waves)):
        xis.append(layer_fields(wv, amp[8 * j:8 * j + 8], g, k))
        regions.append(np.full(len(g), j))
    xis.append(substrate_fields(sub, amp[8 * len(waves):], grids[-1], k))
    regions.append(np.full(len(grids[-1]), len(waves)))

    media = stack.media
    u_list, w_list, trac_list = [], [], []
    for j, xi in enumerate(xis):
        med = medium(media[j])
        nxi = med.stroh_matrix(v) @ xi          # d(xi)/dx3 = i k N xi
        a = xi[:4]
        wdz = nxi[:4]                            # dU/dx3 = i k W
        t1 = 1j * k * (med.Q @ a + med.R @ wdz)  # T1J (scaled): stress row 1 and D1
        u_list.append(a)
        w_list.append(wdz)
        trac_list.append(t1)
    a = np.concatenate(u_list, axis=1)
    wdz = np.concatenate(w_list, axis=1)
    t1 = np.concatenate(trac_list, axis=1)
    region = np.concatenate(regions)
    depth = np.concatenate(grids)

    u = a[:3].T.copy()
    phi = a[3] / PHI_SCALE
    strain = np.zeros((len(depth), 6), dtype=complex)
    strain[:, 0] = 1j * k * a[0]
    strain[:, 2] = 1j * k * wdz[2]
    strain[:, 3] = 1j * k * wdz[1]
    strain[:, 4] = 1j * k * (wdz[0] + a[2])
    strain[:, 5] = 1j * k * a[1]
    # time-averaged power flux along x1, W/m^2 (per unit amplitude scale)
    p1 = 0.5 * C_REF * np.real(1j * omega * (-np.sum(t1[:3] * a[:3].conj(), axis=0)
                                             + a[3] * t1[3].conj()))
    density = np.array([media[r].density for r in region], dtype=float)
    stiff = np.array([np.asarray(mm.stiffness) for mm in media])

    prof = FieldProfile(depth, u, strain, phi, "unnormalized", None, region, density, stiff,
                        velocity / wavelength, wavelength, width, stack.total_thickness)
    flux = 0.0
    for r in np.unique(region):
        sel = region == r
        flux += simpson(p1[sel], x=depth[sel])
    if stack.top_bc == "free_open":
        # quasi-static field in the vacuum half-space above the surface
        flux += -0.25 * omega * C_REF * abs(a[3, 0]) ** 2
    prof.power = flux * width
    return normalize_profile(prof, normalization)


def normalize_profile(prof, normalization):
    if normalization == "unnormalized":
        return prof
    if normalization == "per_phonon":
        e = prof.energy_per_wavelength()
        target = PLANCK * prof.frequency
        out = prof.scaled(math.sqrt(target / e), "per_phonon")
        out.phonon_energy = target
        return out
    if normalization == "unit_power":
        return prof.scaled(1.0 / math.sqrt(abs(prof.power)), "unit_power")
    raise ValueError(f"unknown normalization {normalization!r}")


# -- labelling and public operations -------------------------------------------------

def _polarization(prof):
    u = prof.displacement
    sh = np.sum(np.abs(u[:, 1]) ** 2)
    tot = np.sum(np.abs(u) ** 2)
    return "shear_horizontal" if sh > 0.5 * tot else "sagittal"


def _assign_labels(modes, total_thickness, top_fraction=0.1):
    """Label by the depth of the strain-energy maximum.

    The first sagittal mode peaking at the top surface (within
    ``top_fraction`` of the layer thickness) is Rayleigh-like; the first
    sagittal mode after it peaking deeper, toward the interface, is
    Sezawa-like. Everything else is ``other``.
    """
    top_zone = top_fraction * total_thickness
    if modes and total_thickness == 0:
        top_zone = top_fraction * modes[0].wavelength
    r_depth = None
    have_s = False
    for m in modes:
        m.label = "other"
        if m.polarization != "sagittal" or m.fields is None:
            continue
        zmax = m.fields.strain_maximum_depth()
        if r_depth is None and not have_s and zmax <= top_zone:
            m.label, r_depth = "rayleigh_like", zmax
        elif r_depth is not None and not have_s and zmax > max(r_depth, top_zone):
            m.label, have_s = "sezawa_like", True


def _solve_bc(stack, wavelength, search, polarization, normalization, width):
    roots = find_roots(stack, wavelength, search, polarization)
    modes = []
    for v in roots:
        prof = mode_fields_at(stack, wavelength, v, normalization, width)
        pol = _polarization(prof)
        if polarization != "all" and is_decoupled(stack) and pol != polarization:
            continue
        status = "ok"
        if prof.energy_fraction_below(5 * wavelength) >= 0.01:
            status = "weakly_bound"
        modes.append(ModeSolution("other", v, wavelength, v / wavelength, float("nan"), prof,
                                  stack.top_bc, pol, status))
    _assign_labels(modes, stack.total_thickness)
    return modes


def _resample(prof, region, depths):
    sel = prof.region == region
    z = prof.depth_grid[sel]
    u = prof.displacement[sel]
    return np.stack([np.interp(depths, z, u[:, i].real) + 1j * np.interp(depths, z, u[:, i].imag)
                     for i in range(3)], axis=1)


def _overlap(pa, pb):
    """Normalized displacement overlap of two profiles of the same stack."""
    ua, ub = [], []
    for r in np.unique(pa.region):
        za = pa.depth_grid[pa.region == r]
        zb = pb.depth_grid[pb.region == r]
        z = za[za <= zb.max()]
        ua.append(_resample(pa, r, z))
        ub.append(_resample(pb, r, z))
    ua, ub = np.concatenate(ua).ravel(), np.concatenate(ub).ravel()
    return abs(np.vdot(ua, ub)) / (np.linalg.norm(ua) * np.linalg.norm(ub))


def _match(mode, candidates, min_overlap=0.9):
    best = None
    for c in sorted(candidates, key=lambda c: abs(c.phase_velocity - mode.phase_velocity)):
        if _overlap(mode.fields, c.fields) > min_overlap:
            best = c
            break
    return best


def _k2(v_open, v_short, tol=1e-6):
    k2 = 2.0 * (v_open - v_short) / v_open
    if -tol <= k2 < 0:
        k2 = 0.0
    return k2


def solve_modes(stack, wavelength, search=None, polarization="sagittal",
                normalization="per_phonon", width=None, with_coupling=True,
                keep_weakly_bound=False):
    """Guided modes of ``stack`` at ``wavelength``, sorted by velocity.

    ``polarization`` selects the mode family when the shear-horizontal
    displacement decouples (``sagittal`` for the piezoelectrically active
    Rayleigh/Sezawa family, ``shear_horizontal``, or ``all``). With
    ``with_coupling`` each mode's k2 comes from the matching mode under the
    complementary electrical boundary condition (NaN if it cannot be
    tracked). Modes whose energy below 5 wavelengths exceeds 1% are
    near their cutoff and dropped unless ``keep_weakly_bound``.
    """
    if search is None:
        search = default_search(stack)
    v_lim = limiting_velocity(stack.substrate)
    if search.v_max >= v_lim:
        raise ValueError(f"v_max must stay below the substrate limiting velocity "
                         f"{v_lim:.2f} m/s")
    modes = _solve_bc(stack, wavelength, search, polarization, normalization, width)
    if not keep_weakly_bound:
        modes = [m for m in modes if m.status == "ok"]
    if with_coupling and modes:
        other_bc = "free_shorted" if stack.top_bc == "free_open" else "free_open"
        others = _solve_bc(stack.with_bc(other_bc), wavelength, search, polarization,
                           normalization, width)
        for m in modes:
            c = _match(m, others)
            if c is None:
                m.status = "k2_untracked"
                continue
            vo, vs = ((m.phase_velocity, c.phase_velocity) if stack.top_bc == "free_open"
                      else (c.phase_velocity, m.phase_velocity))
            m.k2 = _k2(vo, vs)
    return modes


def coupling_coefficient(stack, wavelength, mode_index, search=None, polarization="sagittal"):
    """k2 = 2 (v_open - v_short) / v_open for the ``mode_index``-th open-circuit mode."""
    open_stack = stack.with_bc("free_open")
    if search is None:
        search = default_search(stack)
    modes_o = _solve_bc(open_stack, wavelength, search, polarization, "unnormalized", None)
    modes_s = _solve_bc(open_stack.with_bc("free_shorted"), wavelength, search, polarization,
                        "unnormalized", None)
    modes_o = [m for m in modes_o if m.status == "ok"]
    if not 0 <= mode_index < len(modes_o):
        raise IndexError(f"mode_index {mode_index} out of range ({len(modes_o)} modes)")
    mo = modes_o[mode_index]
    ms = _match(mo, modes_s)
    if ms is None:
        raise ModeTrackingError(
            f"mode at {mo.phase_velocity:.3f} m/s has no shorted-surface partner "
            f"with field overlap > 0.9")
    return _k2(mo.phase_velocity, ms.phase_velocity)


def mode_fields(stack, wavelength, mode_index, normalization="per_phonon", search=None,
                width=None, dz=None, polarization="sagittal"):
    modes = solve_modes(stack, wavelength, search, polarization, "unnormalized",
                        width, with_coupling=False)
    if not 0 <= mode_index < len(modes):
        raise IndexError(f"mode_index {mode_index} out of range ({len(modes)} modes)")
    return mode_fields_at(stack, wavelength, modes[mode_index].phase_velocity,
                          normalization, width, dz)


# -- sweeps --------------------------------------------------------------------------

@dataclass
class SweepRow:
    h_over_lambda: float
    label: str
    velocity: float
    k2: float
    status: str = "ok"

    def as_tuple(self):
        return (self.h_over_lambda, self.label, self.velocity, self.k2, self.status)


def _sweep_point(args):
    stack_template, wavelength, ratio, search, polarization = args
    try:
        stack = stack_template.with_first_thickness(ratio * wavelength)
        modes = solve_modes(stack, wavelength, search, polarization,
                            normalization="unnormalized")
    except Exception as exc:  # row-level status; the sweep carries on
        return [SweepRow(ratio, "none", float("nan"), float("nan"),
                         f"error: {type(exc).__name__}: {exc}")]
    if not modes:
        return [SweepRow(ratio, "none", float("nan"), float("nan"), "no_modes")]
    return [SweepRow(ratio, m.label, m.phase_velocity, m.k2, m.status) for m in modes]


def dispersion_sweep(stack_template, wavelength, h_over_lambda, search=None,
                     polarization="sagittal", workers=1):
    """Velocity and k2 of every mode for each film thickness ratio.

    The first layer's thickness is set to ``ratio * wavelength``. Rows come
    back in input order whatever the number of workers.
    """
    ratios = [float(r) for r in h_over_lambda]
    if any(not r > 0 for r in ratios):
        raise ValueError("every h/lambda must be > 0")
    jobs = [(stack_template, wavelength, r, search, polarization) for r in ratios]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    return [row for rows in results for row in rows]
