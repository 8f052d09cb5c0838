"""Partial-wave (Stroh) machinery for piezoelectric media.

Coordinates: x1 is the propagation direction, x3 points into the solid
(depth), the top surface is x3 = 0. Generalized displacement is
``U = (u1, u2, u3, phi)`` and the generalized traction on x3-planes is
``t = (T31, T32, T33, D3)``. A partial wave is
``U = a exp(i k (x1 + p x3 - v t))`` with traction ``i k b exp(...)`` and
``b = (R^T + p T) a``; ``(a, b)`` is an eigenvector of the 8x8 Stroh
matrix ``N`` with eigenvalue ``p``.

Internally everything is nondimensionalised: stiffness by ``C_REF``,
permittivity by the vacuum permittivity, and piezoelectric stress by
``sqrt(C_REF * EPSILON_0)``. In these units the open-circuit vacuum
condition at the surface reads ``b4 = i a4``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from sawguide.materials import EPSILON_0, voigt_to_tensor3, voigt_to_tensor4

C_REF = 1e11
E_REF = np.sqrt(C_REF * EPSILON_0)
PHI_SCALE = np.sqrt(EPSILON_0 / C_REF)  # phi_scaled = phi_SI * PHI_SCALE

# relative imaginary part of p below which a partial wave counts as bulk (non-decaying)
DECAY_TOL = 1e-9
# eigenvector condition number above which the Stroh eigenbasis is considered degenerate
DEGENERATE_COND = 1e10
REPEAT_TOL = 1e-9

SAGITTAL = (0, 2, 3)
SHEAR_HORIZONTAL = (1,)
ALL = (0, 1, 2, 3)


class DegenerateStrohError(ArithmeticError):
    """Stroh eigenbasis collapsed (repeated, defective eigenvalues).

    Retry with a slightly perturbed velocity.
    """

    def __init__(self, velocity, cond):
        self.velocity = velocity
        self.cond = cond
        super().__init__(f"degenerate Stroh eigenproblem at v = {velocity!r} m/s "
                         f"(eigenvector condition {cond:.3g}); perturb the velocity")


class Medium:
    """Nondimensional generalized stiffness blocks for one material."""

    def __init__(self, mat):
        self.material = mat
        c = voigt_to_tensor4(mat.stiffness) / C_REF
        e = voigt_to_tensor3(mat.piezo_stress) / E_REF
        eps = np.asarray(mat.permittivity) / EPSILON_0
        g = np.zeros((3, 4, 4, 3))
        g[:, :3, :3, :] = c
        g[:, :3, 3, :] = np.einsum("lij->ijl", e)
        g[:, 3, :3, :] = e
        g[:, 3, 3, :] = -eps
        self.gamma = g
        self.Q = g[0, :, :, 0].copy()
        self.R = g[0, :, :, 2].copy()
        self.T = g[2, :, :, 2].copy()
        self.Tinv = np.linalg.inv(self.T)
        self.rho = mat.density / C_REF
        self._inertia = np.diag([1.0, 1.0, 1.0, 0.0])

    def stroh_matrix(self, velocity):
        qv = self.Q - self.rho * velocity ** 2 * self._inertia
        ti = self.Tinv
        n = np.empty((8, 8))
        n[:4, :4] = -ti @ self.R.T
        n[:4, 4:] = ti
        n[4:, :4] = self.R @ ti @ self.R.T - qv
        n[4:, 4:] = -self.R @ ti
        return n

    def is_decoupled(self, tol=1e-12):
        """True when u2 does not couple to (u1, u3, phi) for propagation along x1."""
        scale = max(np.abs(self.Q).max(), np.abs(self.T).max())
        others = [0, 2, 3]
        for m in (self.Q, self.R, self.T):
            if np.abs(m[1, others]).max() > tol * scale or np.abs(m[others, 1]).max() > tol * scale:
                return False
        return True

    def partial_waves(self, velocity):
        """Eigenvalues ``p`` (8,) and eigenvectors (8, 8) of the Stroh matrix."""
        p, vec = np.linalg.eig(self.stroh_matrix(velocity))
        order = np.lexsort((p.real, -np.round(p.imag, 12)))
        p, vec = p[order], vec[:, order]
        cond = np.linalg.cond(vec)
        if not np.isfinite(cond) or cond > DEGENERATE_COND:
            raise DegenerateStrohError(velocity, cond)
        # orthonormalize clusters of repeated eigenvalues (e.g. isotropic shear)
        used = np.zeros(8, dtype=bool)
        for i in range(8):
            if used[i]:
                continue
            cluster = np.flatnonzero(np.abs(p - p[i]) <= REPEAT_TOL * max(1.0, abs(p[i])))
            used[cluster] = True
            if len(cluster) > 1:
                q, _ = np.linalg.qr(vec[:, cluster])
                vec[:, cluster] = q
                p[cluster] = p[cluster].mean()
        vec = vec / np.linalg.norm(vec, axis=0)
        return p, vec

    def decaying_subspace(self, velocity):
        """Orthonormal basis (8, 4) of the waves decaying into +x3, its 4x4
        upper-triangular Schur block, and a leaky flag.

        ``leaky`` is set when fewer than four partial waves decay, i.e. the
        velocity lies above the limiting (bulk) velocity of the medium.
        """
        n = self.stroh_matrix(velocity)
        scale = max(1.0, np.abs(n).max())
        t, z, sdim = sla.schur(n.astype(complex), output="complex",
                               sort=lambda x: x.imag > DECAY_TOL * scale)
        leaky = sdim != 4
        if sdim < 4:
            # take the least-growing remaining waves to complete the basis
            t, z, sdim = sla.schur(n.astype(complex), output="complex",
                                   sort=lambda x: x.imag > -DECAY_TOL * scale)
        if sdim != 4:
            p = np.linalg.eigvals(n)
            idx = np.argsort(-p.imag)[:4]
            thresh = p[idx[-1]].imag
            t, z, sdim = sla.schur(n.astype(complex), output="complex",
                                   sort=lambda x: x.imag >= thresh - 1e-14)
            z = z[:, :4]
            t = t[:4, :4]
            return z, t, True
        return z[:, :4], t[:4, :4], leaky

    def bulk_velocities(self, direction):
        """Bulk phase velocities (piezoelectrically stiffened) along a unit direction."""
        n = np.asarray(direction, dtype=float)
        c = voigt_to_tensor4(self.material.stiffness)
        e = voigt_to_tensor3(self.material.piezo_stress)
        eps = np.asarray(self.material.permittivity)
        gam = np.einsum("ijkl,i,l->jk", c, n, n)
        en = np.einsum("kij,k,i->j", e, n, n)
        gam = gam + np.outer(en, en) / (n @ eps @ n)
        w = np.linalg.eigvalsh(gam)
        return np.sqrt(np.clip(w, 0.0, None) / self.material.density)


@lru_cache(maxsize=64)
def _medium_cached(key, mat):
    return Medium(mat)


def medium(mat):
    return _medium_cached(id(mat), mat)


def limiting_velocity(mat, n_angles=721):
    """Lowest velocity along x1 at which a bulk wave stops decaying with depth.

    Geometrically, the smallest ``v_bulk(theta) / cos(theta)`` over
    directions in the sagittal plane (x1, x3), refined by a bounded search.
    """
    from scipy.optimize import minimize_scalar

    med = medium(mat)

    def vtrace(theta):
        d = np.array([np.cos(theta), 0.0, np.sin(theta)])
        return med.bulk_velocities(d).min() / np.cos(theta)

    thetas = np.linspace(-np.pi / 2 * 0.98, np.pi / 2 * 0.98, n_angles)
    vals = np.array([vtrace(t) for t in thetas])
    i = int(np.argmin(vals))
    lo = thetas[max(i - 1, 0)]
    hi = thetas[min(i + 1, n_angles - 1)]
    res = minimize_scalar(vtrace, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    return float(min(res.fun, vals[i]))
