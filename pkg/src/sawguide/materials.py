"""Elastic, piezoelectric and dielectric constants for one material.

Conventions
-----------
All quantities are SI. Tensors use Voigt notation with the index map
``11->1, 22->2, 33->3, 23->4, 13->5, 12->6``. The strain vector carries
engineering shears (``2*S23``, ``2*S13``, ``2*S12``), so that
``T = c @ S - e.T @ E`` and ``D = e @ S + eps @ E`` hold with the 6x6
stiffness ``c``, the 3x6 piezoelectric stress matrix ``e`` and the 3x3
absolute permittivity ``eps``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

EPSILON_0 = 8.8541878128e-12

SYMMETRY_CLASSES = ("isotropic", "hexagonal_6mm", "trigonal", "cubic", "triclinic")

VOIGT_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))
_VOIGT_INDEX = np.array([[0, 5, 4], [5, 1, 3], [4, 3, 2]])

FIELDS = ("id", "density", "stiffness", "piezo_stress", "permittivity",
          "symmetry_class", "source")


class MaterialError(Exception):
    """Base class for material database problems."""


class MaterialNotFoundError(MaterialError, KeyError):
    def __init__(self, material_id, available):
        self.material_id = material_id
        self.available = sorted(available)
        super().__init__(
            f"unknown material {material_id!r}; available: {', '.join(self.available)}")

    def __str__(self):
        return self.args[0]


class MaterialParseError(MaterialError, ValueError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class RotationError(MaterialError, ValueError):
    pass


def _frozen(a, shape, dtype=float):
    arr = np.array(a, dtype=dtype)
    if arr.shape != shape:
        raise ValueError(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MaterialTensors:
    id: str
    density: float
    stiffness: np.ndarray
    piezo_stress: np.ndarray
    permittivity: np.ndarray
    symmetry_class: str = "triclinic"
    source: str = ""

    def __post_init__(self):
        object.__setattr__(self, "density", float(self.density))
        object.__setattr__(self, "stiffness", _frozen(self.stiffness, (6, 6)))
        object.__setattr__(self, "piezo_stress", _frozen(self.piezo_stress, (3, 6)))
        object.__setattr__(self, "permittivity", _frozen(self.permittivity, (3, 3)))
        if self.symmetry_class not in SYMMETRY_CLASSES:
            raise ValueError(f"symmetry_class must be one of {SYMMETRY_CLASSES}")

    def with_changes(self, **changes):
        return replace(self, **changes)

    def to_record(self):
        return {
            "id": self.id,
            "density": self.density,
            "stiffness": self.stiffness.tolist(),
            "piezo_stress": self.piezo_stress.tolist(),
            "permittivity": self.permittivity.tolist(),
            "symmetry_class": self.symmetry_class,
            "source": self.source,
        }

    @property
    def relative_permittivity(self):
        return self.permittivity / EPSILON_0


# -- constructors -----------------------------------------------------------

def isotropic(id, density, lame_lambda, shear_modulus, eps_r=1.0, source=""):
    c = np.zeros((6, 6))
    c[:3, :3] = lame_lambda
    c[np.arange(3), np.arange(3)] = lame_lambda + 2 * shear_modulus
    c[3, 3] = c[4, 4] = c[5, 5] = shear_modulus
    return MaterialTensors(id, density, c, np.zeros((3, 6)),
                           eps_r * EPSILON_0 * np.eye(3), "isotropic", source)


def isotropic_from_velocities(id, density, v_longitudinal, v_shear, eps_r=1.0, source=""):
    mu = density * v_shear ** 2
    lam = density * v_longitudinal ** 2 - 2 * mu
    return isotropic(id, density, lam, mu, eps_r, source)


def hexagonal_6mm(id, density, c11, c12, c13, c33, c44, e15=0.0, e31=0.0, e33=0.0,
                  eps11_r=1.0, eps33_r=1.0, source=""):
    """Build a 6mm (wurtzite-type) material with the c-axis along x3.

    Permittivities are given relative to vacuum and stored absolute.
    """
    c = np.zeros((6, 6))
    c[0, 0] = c[1, 1] = c11
    c[0, 1] = c[1, 0] = c12
    c[0, 2] = c[2, 0] = c[1, 2] = c[2, 1] = c13
    c[2, 2] = c33
    c[3, 3] = c[4, 4] = c44
    c[5, 5] = 0.5 * (c11 - c12)
    e = np.zeros((3, 6))
    e[0, 4] = e[1, 3] = e15
    e[2, 0] = e[2, 1] = e31
    e[2, 2] = e33
    eps = EPSILON_0 * np.diag([eps11_r, eps11_r, eps33_r])
    return MaterialTensors(id, density, c, e, eps, "hexagonal_6mm", source)


# -- tensor conversions ------------------------------------------------------

def voigt_to_tensor4(c):
    c = np.asarray(c)
    return c[_VOIGT_INDEX[:, :, None, None], _VOIGT_INDEX[None, None, :, :]]


def tensor4_to_voigt(t):
    out = np.empty((6, 6), dtype=t.dtype)
    for a, (i, j) in enumerate(VOIGT_PAIRS):
        for b, (k, l) in enumerate(VOIGT_PAIRS):
            out[a, b] = t[i, j, k, l]
    return out


def voigt_to_tensor3(e):
    e = np.asarray(e)
    return e[:, _VOIGT_INDEX]


def tensor3_to_voigt(t):
    out = np.empty((3, 6), dtype=t.dtype)
    for b, (k, l) in enumerate(VOIGT_PAIRS):
        out[:, b] = t[:, k, l]
    return out


def bond_stress_matrix(rot):
    """6x6 matrix M with ``T' = M @ T`` for stress in Voigt form.

    ``rot`` maps old coordinates to new (``x' = rot @ x``). Stiffness
    transforms as ``M c M^T`` because strain, with engineering shears,
    transforms with ``inv(M).T``.
    """
    r = np.asarray(rot, dtype=float)
    m = np.empty((6, 6))
    for a, (i, j) in enumerate(VOIGT_PAIRS):
        for b, (k, l) in enumerate(VOIGT_PAIRS):
            if k == l:
                m[a, b] = r[i, k] * r[j, l]
            else:
                m[a, b] = r[i, k] * r[j, l] + r[i, l] * r[j, k]
    return m


def check_rotation(rot, tol=1e-10):
    r = np.asarray(rot, dtype=float)
    if r.shape != (3, 3):
        raise RotationError(f"rotation must be 3x3, got {r.shape}")
    if not np.allclose(r @ r.T, np.eye(3), atol=tol, rtol=0):
        raise RotationError("rotation matrix is not orthogonal")
    if abs(np.linalg.det(r) - 1.0) > tol:
        raise RotationError("rotation matrix has determinant != +1")
    return r


def rotate_tensors(mat, rotation):
    """Express ``mat`` in coordinates rotated by ``rotation`` (``x' = R x``).

    The rotated material is declared triclinic unless the rotation leaves
    every tensor unchanged, in which case the original class is kept.
    """
    r = check_rotation(rotation)
    m = bond_stress_matrix(r)
    c = m @ mat.stiffness @ m.T
    e = r @ mat.piezo_stress @ m.T
    eps = r @ mat.permittivity @ r.T
    c = 0.5 * (c + c.T)
    eps = 0.5 * (eps + eps.T)
    unchanged = (np.allclose(c, mat.stiffness, rtol=0, atol=1e-10 * np.abs(mat.stiffness).max())
                 and np.allclose(e, mat.piezo_stress, rtol=0,
                                 atol=1e-10 * max(np.abs(mat.piezo_stress).max(), 1e-30))
                 and np.allclose(eps, mat.permittivity, rtol=0,
                                 atol=1e-10 * np.abs(mat.permittivity).max()))
    sym = mat.symmetry_class if unchanged else "triclinic"
    return replace(mat, stiffness=c, piezo_stress=e, permittivity=eps, symmetry_class=sym)


def rotation_about_axis(axis, angle):
    """Passive rotation of coordinates by ``angle`` (rad) about x1/x2/x3 (0/1/2)."""
    c, s = np.cos(angle), np.sin(angle)
    i, j = [(1, 2), (2, 0), (0, 1)][axis]
    r = np.eye(3)
    r[i, i] = r[j, j] = c
    r[i, j] = s
    r[j, i] = -s
    return r


# -- validation ----------------------------------------------------------------

def _stiffness_pattern(sym, c):
    """Return (zero index list, equality list) implied by the symmetry class."""
    zeros, equal = [], []
    if sym == "triclinic":
        return zeros, equal
    if sym in ("isotropic", "cubic", "hexagonal_6mm"):
        zeros = [(i, j) for i in range(6) for j in range(6)
                 if not (i < 3 and j < 3) and i != j]
    if sym in ("isotropic", "cubic"):
        equal = [((0, 0), (1, 1)), ((0, 0), (2, 2)), ((0, 1), (0, 2)), ((0, 1), (1, 2)),
                 ((3, 3), (4, 4)), ((3, 3), (5, 5))]
    elif sym == "hexagonal_6mm":
        equal = [((0, 0), (1, 1)), ((0, 2), (1, 2)), ((3, 3), (4, 4))]
    elif sym == "trigonal":
        allowed = {(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2), (3, 3), (4, 4),
                   (5, 5), (0, 3), (1, 3), (4, 5)}
        allowed |= {(j, i) for i, j in allowed}
        zeros = [(i, j) for i in range(6) for j in range(6) if (i, j) not in allowed]
        equal = [((0, 0), (1, 1)), ((0, 2), (1, 2)), ((3, 3), (4, 4)), ((0, 3), (4, 5))]
    return zeros, equal


def _piezo_pattern(sym):
    if sym == "isotropic":
        return [(i, j) for i in range(3) for j in range(6)], [], []
    if sym == "cubic":
        keep = {(0, 3), (1, 4), (2, 5)}
        return ([(i, j) for i in range(3) for j in range(6) if (i, j) not in keep],
                [((0, 3), (1, 4)), ((0, 3), (2, 5))], [])
    if sym == "hexagonal_6mm":
        keep = {(0, 4), (1, 3), (2, 0), (2, 1), (2, 2)}
        return ([(i, j) for i in range(3) for j in range(6) if (i, j) not in keep],
                [((0, 4), (1, 3)), ((2, 0), (2, 1))], [])
    if sym == "trigonal":
        keep = {(0, 4), (0, 5), (1, 0), (1, 1), (1, 3), (2, 0), (2, 1), (2, 2)}
        return ([(i, j) for i in range(3) for j in range(6) if (i, j) not in keep],
                [((0, 4), (1, 3)), ((2, 0), (2, 1))],
                [((1, 1), (1, 0)), ((1, 1), (0, 5))])
    return [], [], []


def validate_tensors(mat, rtol=1e-6):
    """List every violated invariant of ``mat``; an empty list means valid."""
    problems = []
    c = np.asarray(mat.stiffness)
    e = np.asarray(mat.piezo_stress)
    eps = np.asarray(mat.permittivity)

    if not np.isfinite(mat.density) or mat.density <= 0:
        problems.append(f"density must be > 0 (got {mat.density})")
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(e)) and np.all(np.isfinite(eps))):
        problems.append("tensors contain non-finite entries")
        return problems

    cscale = max(np.abs(c).max(), 1e-300)
    if not np.allclose(c, c.T, rtol=0, atol=rtol * cscale):
        problems.append("stiffness is not symmetric")
    w = np.linalg.eigvalsh(0.5 * (c + c.T))
    if w.min() <= 0:
        problems.append(f"stiffness is not positive definite (min eigenvalue {w.min():.4g} Pa)")

    escale = max(np.abs(eps).max(), 1e-300)
    if not np.allclose(eps, eps.T, rtol=0, atol=rtol * escale):
        problems.append("permittivity is not symmetric")
    we = np.linalg.eigvalsh(0.5 * (eps + eps.T))
    if we.min() <= EPSILON_0:
        problems.append(
            f"permittivity eigenvalue {we.min():.4g} F/m is not above vacuum permittivity")

    sym = mat.symmetry_class
    zeros, equal = _stiffness_pattern(sym, c)
    for i, j in zeros:
        if abs(c[i, j]) > rtol * cscale:
            problems.append(f"symmetry pattern ({sym}): c{i+1}{j+1} should be 0, got {c[i, j]:.4g}")
    for (a, b) in equal:
        if abs(c[a] - c[b]) > rtol * cscale:
            problems.append(
                f"symmetry pattern ({sym}): c{a[0]+1}{a[1]+1} != c{b[0]+1}{b[1]+1}")
    if sym in ("hexagonal_6mm", "trigonal", "isotropic"):
        if abs(c[5, 5] - 0.5 * (c[0, 0] - c[0, 1])) > rtol * cscale:
            problems.append(f"symmetry pattern ({sym}): c66 != (c11 - c12)/2")

    pscale = max(np.abs(e).max(), 1.0)
    ezeros, eequal, eneg = _piezo_pattern(sym)
    for i, j in ezeros:
        if abs(e[i, j]) > rtol * pscale:
            problems.append(f"symmetry pattern ({sym}): e{i+1}{j+1} should be 0, got {e[i, j]:.4g}")
    for a, b in eequal:
        if abs(e[a] - e[b]) > rtol * pscale:
            problems.append(f"symmetry pattern ({sym}): e{a[0]+1}{a[1]+1} != e{b[0]+1}{b[1]+1}")
    for a, b in eneg:
        if abs(e[a] + e[b]) > rtol * pscale:
            problems.append(f"symmetry pattern ({sym}): e{a[0]+1}{a[1]+1} != -e{b[0]+1}{b[1]+1}")

    if sym in ("isotropic", "cubic"):
        if not np.allclose(eps, eps[0, 0] * np.eye(3), rtol=0, atol=rtol * escale):
            problems.append(f"symmetry pattern ({sym}): permittivity must be scalar")
    elif sym in ("hexagonal_6mm", "trigonal"):
        off = eps - np.diag(np.diag(eps))
        if np.abs(off).max() > rtol * escale or abs(eps[0, 0] - eps[1, 1]) > rtol * escale:
            problems.append(f"symmetry pattern ({sym}): permittivity must be diag(e11, e11, e33)")
    return problems


# -- database ------------------------------------------------------------------

def _record_to_material(rec, line):
    missing = [f for f in FIELDS if f not in rec]
    if missing:
        raise MaterialParseError("missing key", line=line, field=missing[0])
    extra = sorted(set(rec) - set(FIELDS))
    if extra:
        raise MaterialParseError("unknown key", line=line, field=extra[0])
    shapes = {"stiffness": (6, 6), "piezo_stress": (3, 6), "permittivity": (3, 3)}
    for key, shape in shapes.items():
        try:
            arr = np.array(rec[key], dtype=float)
        except (TypeError, ValueError) as exc:
            raise MaterialParseError(f"not numeric ({exc})", line=line, field=key) from None
        if arr.shape != shape:
            raise MaterialParseError(f"expected shape {shape}, got {arr.shape}",
                                     line=line, field=key)
    if not isinstance(rec["density"], (int, float)) or isinstance(rec["density"], bool):
        raise MaterialParseError("must be a number", line=line, field="density")
    if rec["symmetry_class"] not in SYMMETRY_CLASSES:
        raise MaterialParseError(f"must be one of {SYMMETRY_CLASSES}", line=line,
                                 field="symmetry_class")
    if not isinstance(rec["source"], str) or not rec["source"].strip():
        raise MaterialParseError("source citation must be a non-empty string",
                                 line=line, field="source")
    mat = MaterialTensors(**{k: rec[k] for k in FIELDS})
    problems = validate_tensors(mat)
    if problems:
        raise MaterialParseError("; ".join(problems), line=line, field="id")
    return mat


def parse_database(text):
    """Parse a material database: one JSON object per line.

    Blank lines and lines starting with ``#`` are ignored.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MaterialParseError(f"invalid JSON ({exc.msg})", line=lineno) from None
        if not isinstance(rec, dict):
            raise MaterialParseError("record must be a JSON object", line=lineno)
        mat = _record_to_material(rec, lineno)
        if mat.id in out:
            raise MaterialParseError(f"duplicate id {mat.id!r}", line=lineno, field="id")
        out[mat.id] = mat
    return out


def default_database_text():
    return resources.files("sawguide.data").joinpath("materials.jsonl").read_text()


_default_cache = {}


def load_database(path=None):
    if path is None:
        if "default" not in _default_cache:
            _default_cache["default"] = parse_database(default_database_text())
        return dict(_default_cache["default"])
    return parse_database(Path(path).read_text())


def lookup_material(id, database=None):
    """Fetch one material from a database (path, parsed dict, or the built-in one)."""
    if database is None or isinstance(database, (str, Path)):
        database = load_database(database)
    try:
        return database[id]
    except KeyError:
        raise MaterialNotFoundError(id, database.keys()) from None


def dump_database(materials):
    return "".join(json.dumps(m.to_record()) + "\n" for m in materials)
