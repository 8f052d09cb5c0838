import itertools

import numpy as np
import pytest

from sawguide.materials import (
    EPSILON_0,
    MaterialNotFoundError,
    MaterialParseError,
    MaterialTensors,
    RotationError,
    dump_database,
    hexagonal_6mm,
    isotropic_from_velocities,
    load_database,
    lookup_material,
    parse_database,
    rotate_tensors,
    rotation_about_axis,
    tensor3_to_voigt,
    tensor4_to_voigt,
    validate_tensors,
    voigt_to_tensor3,
    voigt_to_tensor4,
)


def random_triclinic(rng):
    a = rng.normal(size=(6, 6))
    c = (a @ a.T + 6 * np.eye(6)) * 1e10
    e = rng.normal(size=(3, 6))
    b = rng.normal(size=(3, 3))
    eps = (b @ b.T + 3 * np.eye(3)) * 5 * EPSILON_0
    return MaterialTensors("tri", 3000.0, c, e, eps, "triclinic", "random test tensor")


def brute_force_rotation(mat, r):
    """Rotate the full rank-4/rank-3/rank-2 tensors index by index."""
    c4 = voigt_to_tensor4(mat.stiffness)
    e3 = voigt_to_tensor3(mat.piezo_stress)
    c4r = np.zeros_like(c4)
    for i, j, k, l in itertools.product(range(3), repeat=4):
        s = 0.0
        for p, q, m, n in itertools.product(range(3), repeat=4):
            s += r[i, p] * r[j, q] * r[k, m] * r[l, n] * c4[p, q, m, n]
        c4r[i, j, k, l] = s
    e3r = np.zeros_like(e3)
    for i, j, k in itertools.product(range(3), repeat=3):
        e3r[i, j, k] = sum(r[i, p] * r[j, q] * r[k, m] * e3[p, q, m]
                           for p, q, m in itertools.product(range(3), repeat=3))
    return tensor4_to_voigt(c4r), tensor3_to_voigt(e3r), r @ mat.permittivity @ r.T


def test_database_entries_validate(db):
    assert {"4H-SiC", "AlScN-42"} <= set(db)
    for mat in db.values():
        assert validate_tensors(mat) == []
        assert mat.source.strip()


def test_sic_has_6mm_pattern(sic):
    assert sic.symmetry_class == "hexagonal_6mm"
    assert sic.stiffness[0, 3] == 0
    e = sic.piezo_stress
    mask = np.zeros((3, 6), bool)
    mask[0, 4] = mask[1, 3] = mask[2, 0] = mask[2, 1] = mask[2, 2] = True
    assert np.all(e[~mask] == 0)


def test_alscn_piezo_entries_nonzero(alscn):
    e = alscn.piezo_stress
    assert e[0, 4] != 0 and e[2, 0] != 0 and e[2, 2] != 0


def test_unknown_material_lists_available(db):
    with pytest.raises(MaterialNotFoundError) as exc:
        lookup_material("unobtanium", db)
    assert "4H-SiC" in str(exc.value)


def test_parse_error_reports_line_and_field(sic):
    good = dump_database([sic])
    with pytest.raises(MaterialParseError) as exc:
        parse_database("# header\n" + good + '{"id": "x", "density": 1}\n')
    assert exc.value.line == 3
    broken = good.replace('"density": 3211.0', '"density": "heavy"')
    with pytest.raises(MaterialParseError) as exc:
        parse_database(broken)
    assert exc.value.field == "density"


def test_database_round_trip(db, tmp_path):
    p = tmp_path / "m.jsonl"
    p.write_text(dump_database(db.values()))
    back = load_database(p)
    for k, m in db.items():
        assert np.array_equal(back[k].stiffness, m.stiffness)
        assert np.array_equal(back[k].permittivity, m.permittivity)


def test_identity_rotation_unchanged(sic):
    r = rotate_tensors(sic, np.eye(3))
    assert np.allclose(r.stiffness, sic.stiffness, rtol=1e-12, atol=0)
    assert r.symmetry_class == sic.symmetry_class


@pytest.mark.parametrize("angle", [0.3, 1.1, 2.5])
def test_hexagonal_invariant_about_c_axis(sic, alscn, angle):
    for mat in (sic, alscn):
        r = rotate_tensors(mat, rotation_about_axis(2, angle))
        scale = np.abs(mat.stiffness).max()
        assert np.allclose(r.stiffness, mat.stiffness, atol=1e-10 * scale, rtol=0)
        assert np.allclose(r.piezo_stress, mat.piezo_stress,
                           atol=1e-10 * np.abs(mat.piezo_stress).max(), rtol=0)


def test_rotation_matches_brute_force_oracle(rng):
    mat = random_triclinic(rng)
    for r in (rotation_about_axis(0, np.pi / 2),
              rotation_about_axis(1, 0.7) @ rotation_about_axis(2, -1.3)):
        c, e, eps = brute_force_rotation(mat, r)
        out = rotate_tensors(mat, r)
        assert np.allclose(out.stiffness, c, rtol=1e-12, atol=1e-12 * np.abs(c).max())
        assert np.allclose(out.piezo_stress, e, rtol=1e-12, atol=1e-12)
        assert np.allclose(out.permittivity, eps, rtol=1e-12, atol=1e-24)


def test_rotation_composition_and_spectrum(rng):
    mat = random_triclinic(rng)
    r1 = rotation_about_axis(0, 0.4)
    r2 = rotation_about_axis(2, 1.9) @ rotation_about_axis(1, -0.2)
    a = rotate_tensors(rotate_tensors(mat, r1), r2)
    b = rotate_tensors(mat, r2 @ r1)
    scale = np.abs(mat.stiffness).max()
    assert np.allclose(a.stiffness, b.stiffness, atol=1e-10 * scale, rtol=0)
    # the invariant spectrum is that of the Kelvin (Mandel) form of c
    k = np.diag([1, 1, 1, np.sqrt(2), np.sqrt(2), np.sqrt(2)])
    w0 = np.linalg.eigvalsh(k @ mat.stiffness @ k)
    w1 = np.linalg.eigvalsh(k @ b.stiffness @ k)
    assert np.allclose(w0, w1, rtol=1e-9)
    assert a.density == mat.density


def test_non_orthogonal_rotation_rejected(sic):
    with pytest.raises(RotationError):
        rotate_tensors(sic, np.diag([1.0, 1.0, 1.001]))
    with pytest.raises(RotationError):
        rotate_tensors(sic, np.diag([1.0, 1.0, -1.0]))


def test_validate_reports_violations(sic):
    c = np.array(sic.stiffness)
    c[5, 5] = -c[5, 5]
    bad = sic.with_changes(stiffness=c)
    assert any("positive definite" in p for p in validate_tensors(bad))
    c = np.array(sic.stiffness)
    c[0, 3] = c[3, 0] = 1e9
    bad = sic.with_changes(stiffness=c)
    assert any("symmetry pattern" in p and "c14" in p for p in validate_tensors(bad))
    bad = sic.with_changes(permittivity=0.5 * EPSILON_0 * np.eye(3))
    assert any("vacuum" in p for p in validate_tensors(bad))


def test_constructors_are_consistent():
    iso = isotropic_from_velocities("iso", 2000.0, 6000.0, 3500.0, 4.0, "test")
    assert validate_tensors(iso) == []
    c = iso.stiffness
    assert np.isclose(np.sqrt(c[0, 0] / 2000.0), 6000.0)
    assert np.isclose(np.sqrt(c[3, 3] / 2000.0), 3500.0)
    hx = hexagonal_6mm("h", 3000, 4e11, 1e11, 1e11, 4e11, 1.2e11, e15=-0.3, e31=-0.5,
                       e33=1.5, eps11_r=9, eps33_r=10, source="test")
    assert validate_tensors(hx) == []
    assert np.isclose(hx.permittivity[2, 2], 10 * EPSILON_0)


def test_tensors_are_immutable(sic):
    with pytest.raises(ValueError):
        sic.stiffness[0, 0] = 1.0
