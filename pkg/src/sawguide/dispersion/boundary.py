"""Boundary-value assembly for a layered piezoelectric half-space.

Two equivalent views of the same boundary problem are provided:

* the global matrix of partial-wave amplitudes (free surface, interface
  continuity, decay in the substrate), whose determinant vanishes at
  guided-mode velocities and is used for |det| scans and field recovery;
* the surface impedance ``Z`` with ``b = Z a`` at the top surface, built
  bottom-up from the substrate.  For lossless media below the substrate
  limiting velocity ``i Z`` is Hermitian, so the boundary condition
  determinant is real and changes sign at every simple root.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from sawguide.dispersion.stroh import ALL, SAGITTAL, SHEAR_HORIZONTAL, medium

# k*h*max|p| below which a layer is propagated with a plain transfer matrix
_THIN_LAYER = 1.0


@dataclass
class LayerWaves:
    p: np.ndarray          # (8,)
    vec: np.ndarray        # (8, 8) columns (a; b)
    zref: np.ndarray       # (8,) reference depth of each wave relative to the layer top
    top: float             # depth of the layer top
    thickness: float


@dataclass
class SubstrateWaves:
    basis: np.ndarray      # (8, 4) decaying-subspace basis at the substrate top
    schur: np.ndarray      # (4, 4) Schur block: d/dx3 of basis coordinates = i k schur
    top: float
    leaky: bool


def _layer_waves(mat, velocity, top, thickness):
    p, vec = medium(mat).partial_waves(velocity)
    zref = np.where(p.imag >= 0, 0.0, thickness)
    return LayerWaves(p, vec, zref, top, thickness)


def _substrate_waves(mat, velocity, top):
    basis, schur, leaky = medium(mat).decaying_subspace(velocity)
    return SubstrateWaves(basis, schur, top, leaky)


def stack_waves(stack, velocity):
    waves = []
    z = 0.0
    for layer in stack.layers:
        waves.append(_layer_waves(layer.material, velocity, z, layer.thickness))
        z += layer.thickness
    sub = _substrate_waves(stack.substrate, velocity, z)
    return waves, sub


def is_decoupled(stack):
    return all(medium(m).is_decoupled() for m in stack.media)


def family_indices(stack, polarization):
    """Generalized-displacement indices of the requested mode family."""
    if polarization == "all" or not is_decoupled(stack):
        return ALL
    if polarization == "sagittal":
        return SAGITTAL
    if polarization == "shear_horizontal":
        return SHEAR_HORIZONTAL
    raise ValueError(f"unknown polarization {polarization!r}")


# -- global matrix ---------------------------------------------------------------

def boundary_matrix(stack, velocity, wavelength, waves=None):
    """Global boundary matrix and the partial-wave data.

    Unknowns: eight amplitudes per layer (each wave referenced where it is
    largest, so no exponential exceeds one) followed by four substrate
    amplitudes. Rows: four surface conditions, then eight continuity
    conditions per interface.

    Every column is built from a unit-norm (nondimensional) state vector:
    unit eigenvectors in the layers, with repeated-eigenvalue clusters
    orthonormalized, and an orthonormal Schur basis in the substrate. This
    makes |det| independent of the arbitrary basis choice inside degenerate
    subspaces.
    """
    k = 2 * np.pi / wavelength
    waves, sub = waves or stack_waves(stack, velocity)
    nl = len(waves)
    n = 8 * nl + 4
    m = np.zeros((n, n), dtype=complex)

    def top_rows(cols_xi):
        rows = np.empty((4, cols_xi.shape[1]), dtype=complex)
        rows[:3] = cols_xi[4:7]
        if stack.top_bc == "free_open":
            rows[3] = cols_xi[7] - 1j * cols_xi[3]
        else:
            rows[3] = cols_xi[3]
        return rows

    if nl == 0:
        m[:, :] = top_rows(sub.basis)
    else:
        for j, w in enumerate(waves):
            e_top = np.exp(1j * k * w.p * (0.0 - w.zref))
            e_bot = np.exp(1j * k * w.p * (w.thickness - w.zref))
            xi_top = w.vec * e_top
            xi_bot = w.vec * e_bot
            cols = slice(8 * j, 8 * j + 8)
            if j == 0:
                m[0:4, cols] = top_rows(xi_top)
            else:
                m[4 + 8 * (j - 1):4 + 8 * j, cols] = -xi_top
            m[4 + 8 * j:12 + 8 * j, cols] = xi_bot
        m[4 + 8 * (nl - 1):12 + 8 * (nl - 1), 8 * nl:] = -sub.basis
    return m, waves, sub


@dataclass(frozen=True)
class DeterminantResult:
    value: complex
    leaky: bool

    def __abs__(self):
        return abs(self.value)


def boundary_determinant(stack, velocity, wavelength):
    """Determinant of the unit-column boundary matrix.

    ``leaky`` is True when the substrate does not supply four decaying
    partial waves at this velocity (above its limiting bulk velocity); the
    value is then computed with the least-growing waves and is not a
    surface-mode secular function.
    """
    if not velocity > 0 or not wavelength > 0:
        raise ValueError("velocity and wavelength must be positive")
    m, _, sub = boundary_matrix(stack, velocity, wavelength)
    return DeterminantResult(complex(np.linalg.det(m)), bool(sub.leaky))


# -- surface impedance ----------------------------------------------------------

def _layer_impedance_update(zb, w, k):
    """Impedance at the top of layer ``w`` given ``zb`` at its bottom."""
    kh = k * w.thickness
    if kh * np.abs(w.p).max() < _THIN_LAYER:
        # plain transfer over the layer: xi(top) = V exp(-i k p h) V^-1 xi(bottom)
        prop = (w.vec * np.exp(-1j * kh * w.p)) @ np.linalg.inv(w.vec)
        u = prop @ np.vstack([np.eye(4), zb])
        return np.linalg.solve(u[:4].T, u[4:].T).T
    e_top = np.exp(1j * k * w.p * (0.0 - w.zref))
    e_bot = np.exp(1j * k * w.p * (w.thickness - w.zref))
    a, b = w.vec[:4], w.vec[4:]
    pmat = np.vstack([a * e_top, a * e_bot])
    qmat = np.vstack([b * e_top, b * e_bot])
    kmat = np.linalg.solve(pmat.T, qmat.T).T
    k11, k12 = kmat[:4, :4], kmat[:4, 4:]
    k21, k22 = kmat[4:, :4], kmat[4:, 4:]
    return k11 + k12 @ np.linalg.solve(zb - k22, k21)


def surface_impedance(stack, velocity, wavelength, waves=None):
    """Return ``(Z, leaky)`` with ``b = Z a`` at the top surface."""
    k = 2 * np.pi / wavelength
    waves, sub = waves or stack_waves(stack, velocity)
    a, b = sub.basis[:4], sub.basis[4:]
    z = np.linalg.solve(a.T, b.T).T
    for w in reversed(waves):
        z = _layer_impedance_update(z, w, k)
    return z, sub.leaky


def secular_function(stack, velocity, wavelength, indices=ALL, waves=None):
    """Real secular function of the surface boundary condition.

    ``det(i (Z - Z_bc))`` restricted to the family ``indices``; with a
    shorted top the electrical index is removed (phi = 0 on the surface).
    """
    z, leaky = surface_impedance(stack, velocity, wavelength, waves)
    h = 1j * z
    if stack.top_bc == "free_open":
        h = h.copy()
        h[3, 3] += 1.0
        idx = list(indices)
    else:
        idx = [i for i in indices if i != 3]
    sub = h[np.ix_(idx, idx)]
    sub = 0.5 * (sub + sub.conj().T)
    return float(np.linalg.det(sub).real), leaky


def substrate_fields(sub, coeffs, depths, k):
    """State vectors xi (8, n) in the substrate at absolute ``depths``."""
    depths = np.asarray(depths, dtype=float)
    q, v = np.linalg.eig(sub.schur)
    if np.linalg.cond(v) < 1e8:
        w = np.linalg.solve(v, coeffs)
        phase = np.exp(1j * k * np.outer(q, depths - sub.top))
        return sub.basis @ (v @ (w[:, None] * phase))
    out = np.empty((8, len(depths)), dtype=complex)
    for i, z in enumerate(depths):
        out[:, i] = sub.basis @ (sla.expm(1j * k * (z - sub.top) * sub.schur) @ coeffs)
    return out


def layer_fields(w, coeffs, depths, k):
    """State vectors xi (8, n) inside layer ``w`` at absolute ``depths``."""
    local = np.asarray(depths, dtype=float) - w.top
    phase = np.exp(1j * k * np.outer(w.p, local) - 1j * k * (w.p * w.zref)[:, None])
    return w.vec @ (coeffs[:, None] * phase)
