import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sawguide.idt import IdtDesign, ModeParams, admittance_at, impedance_s11, synthesize_admittance
from sawguide.rfdata import (
    AmbiguousBandError,
    DomainError,
    ParasiticModel,
    PassivityError,
    RfDataError,
    TouchstoneParseError,
    TwoPortSweep,
    UnderdeterminedError,
    band_peak,
    deembed,
    extract_k2,
    fit_line,
    fit_parasitics,
    fit_propagation_loss,
    load_devices,
    load_manifest,
    parse_touchstone,
    read_touchstone,
    serialize_touchstone,
)
from sawguide.rfdata.synthetic import loss_points, one_port_sweep, write_device_set

CS = 1.696e-10


def design(k2=0.0608, v=6480.0):
    return IdtDesign(40, 123e-6, 0.8e-6, CS, ModeParams(v, k2))


# -- touchstone ---------------------------------------------------------------

def test_parse_two_port_example():
    sw = parse_touchstone(b"! c\n# GHz S RI R 50\n4.05 0.1 0.0 0.01 0.0 0.01 0.0 0.1 0.0\n")
    assert sw.frequency_grid[0] == 4.05e9
    assert sw.s21[0] == 0.01 + 0j
    assert sw.reference_impedance == 50
    assert sw.ports == 2


def test_ma_and_db_conversions():
    sw = parse_touchstone("# MHz S MA R 75\n100 1 90\n200 0.5 -30\n", ports=1)
    assert abs(sw.s11[0] - 1j) < 1e-12
    assert abs(sw.s11[1] - 0.5 * np.exp(-1j * np.pi / 6)) < 1e-12
    assert sw.frequency_grid[1] == 2e8 and sw.reference_impedance == 75
    sw = parse_touchstone("# kHz S DB R 50\n1 -6 45\n")
    expect = 10 ** (-6 / 20) * np.exp(1j * np.pi / 4)
    assert abs(sw.s11[0] - expect) < 1e-12


@pytest.mark.parametrize("text,line,needle", [
    ("1 0 0\n", 1, "option"),
    ("# GHz S RI R 50\n2 0 0\n2 0 0\n", 3, "increasing"),
    ("# GHz S RI R 50\n2 0 0\n3 0 0 0\n", 3, "columns"),
    ("# GHz S RI R 50\n2 0 x\n", 2, "non-numeric"),
    ("[Version] 2.0\n# GHz S RI R 50\n", 1, "v2"),
    ("# GHz Y RI R 50\n", 1, "S-parameters"),
    ("# GHz S RI R 50\n# GHz S RI R 50\n", 2, "duplicate"),
])
def test_parse_errors_carry_line(text, line, needle):
    with pytest.raises(TouchstoneParseError) as exc:
        parse_touchstone(text)
    assert exc.value.line == line
    assert needle in str(exc.value)


def test_missing_data_rows():
    with pytest.raises(TouchstoneParseError):
        parse_touchstone("# GHz S RI R 50\n")


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(*[finite] * 8), min_size=1, max_size=20),
       st.floats(1.0, 1e12))
def test_round_trip_bit_identical(rows, f0):
    f = f0 + np.arange(len(rows)) * 1e3
    s = np.array([[[r[0] + 1j * r[1], r[4] + 1j * r[5]],
                   [r[2] + 1j * r[3], r[6] + 1j * r[7]]] for r in rows])
    sw = TwoPortSweep(f, s, 50.0)
    back = parse_touchstone(serialize_touchstone(sw, comment="fixture"))
    again = parse_touchstone(serialize_touchstone(back))
    assert np.array_equal(back.frequency_grid, f)
    assert np.array_equal(back.s_matrix, s)
    assert np.array_equal(again.s_matrix, back.s_matrix)


def test_read_touchstone_uses_extension(tmp_path):
    p = tmp_path / "d.s1p"
    p.write_text("# GHz S RI R 50\n1 0.1 0.2\n")
    sw = read_touchstone(p, metadata={"device_kind": "slab"})
    assert sw.ports == 1 and sw.metadata["device_kind"] == "slab"
    with pytest.raises(ValueError):
        sw.s21
    with pytest.raises(ValueError):
        TwoPortSweep([1.0], np.zeros((1, 2, 2)), metadata={"device_kind": "ridge"})


# -- de-embedding and parasitic fit --------------------------------------------------

def test_deembed_without_parasitics_is_inverse_impedance():
    f = np.linspace(1e9, 2e9, 11)
    z = 20 + 1j * np.linspace(-80, 40, 11)
    sw = TwoPortSweep.from_s11(f, impedance_s11(z))
    y = deembed(sw, ParasiticModel(0.0, 0.0, 1e-12)).admittance
    zb = 50 * (1 + sw.s11) / (1 - sw.s11)
    assert np.array_equal(y, 1 / zb)


def test_deembed_forward_oracle():
    d = design()
    f = np.linspace(3.0e9, 5.0e9, 2001)
    y = admittance_at(d, f)
    sw = one_port_sweep(f, y, ParasiticModel(5.0, 0.5e-9, d.static_capacitance))
    spec = deembed(sw, ParasiticModel(5.0, 0.5e-9, d.static_capacitance))
    g = y.real
    assert np.allclose(spec.conductance, g, rtol=1e-3, atol=1e-3 * g.max())
    assert spec.conductance.min() >= -1e-6


def test_passivity_error_names_frequency():
    f = np.array([1e9, 2e9, 3e9])
    sw = TwoPortSweep.from_s11(f, np.array([0.1, 1.2, 0.1]))
    with pytest.raises(PassivityError) as exc:
        deembed(sw, ParasiticModel())
    assert exc.value.frequency == 2e9


def rlc_sweep(f, r, l, c):
    w = 2 * np.pi * f
    return TwoPortSweep.from_s11(f, impedance_s11(r + 1j * w * l + 1 / (1j * w * c)))


def test_parasitic_fit_exact_recovery():
    f = np.linspace(1e9, 6e9, 501)
    bands = [(1e9, 2.5e9), (4.5e9, 6e9)]
    m = fit_parasitics(rlc_sweep(f, 3.0, 0.3e-9, 1.2e-12), bands)
    assert m.series_resistance == pytest.approx(3.0, rel=1e-9)
    assert m.series_inductance == pytest.approx(0.3e-9, rel=1e-9)
    assert m.static_capacitance == pytest.approx(1.2e-12, rel=1e-9)
    assert m.flagged_bands == []


def test_parasitic_fit_noise_monte_carlo():
    f = np.linspace(1e9, 6e9, 501)
    bands = [(1e9, 2.5e9), (4.5e9, 6e9)]
    w = 2 * np.pi * f
    z0 = 3.0 + 1j * w * 0.3e-9 + 1 / (1j * w * 1.2e-12)
    est = []
    for seed in range(50):
        rng = np.random.default_rng(seed)
        noise = 0.01 * np.abs(z0) * (rng.standard_normal(len(f))
                                     + 1j * rng.standard_normal(len(f))) / np.sqrt(2)
        sw = TwoPortSweep.from_s11(f, impedance_s11(z0 + noise))
        m = fit_parasitics(sw, bands)
        est.append((m.series_resistance, m.series_inductance, m.static_capacitance))
    med = np.median(np.array(est), axis=0)
    assert med == pytest.approx([3.0, 0.3e-9, 1.2e-12], rel=0.05)


def test_parasitic_fit_flags_resonant_band():
    d = design()
    f = np.linspace(1.5e9, 5.5e9, 4001)
    sw = one_port_sweep(f, admittance_at(d, f), ParasiticModel(3.0, 0.3e-9, 1e-12))
    m = fit_parasitics(sw, [(1.5e9, 2.5e9), (3.9e9, 4.2e9), (4.7e9, 5.5e9), (5.49e9, 5.5e9)])
    flagged = [tuple(b["band"]) for b in m.flagged_bands]
    assert (3.9e9, 4.2e9) in flagged
    assert (5.49e9, 5.5e9) in flagged          # too few points
    assert (1.5e9, 2.5e9) not in flagged


def test_parasitic_fit_underdetermined():
    f = np.linspace(1e9, 2e9, 11)
    sw = rlc_sweep(f, 3.0, 0.3e-9, 1.2e-12)
    with pytest.raises(UnderdeterminedError):
        fit_parasitics(sw, [(1.5e9 - 1, 1.5e9 + 1)])


# -- k2 extraction -------------------------------------------------------------

def test_extract_k2_round_trip_and_scaling():
    d = design()
    f = np.linspace(3.0e9, 5.1e9, 8001)
    spec = synthesize_admittance(d, f)
    est = extract_k2(spec, (f[0], f[-1]))
    assert est.k2 == pytest.approx(0.0608, rel=0.02)
    assert est.center_frequency == pytest.approx(d.center_frequency, rel=1e-3)
    assert est.stderr > 0
    spec.conductance = spec.conductance * 3.0
    scaled = extract_k2(spec, (f[0], f[-1]), static_capacitance=3 * spec.static_capacitance)
    assert scaled.k2 == pytest.approx(est.k2, rel=1e-12)


def test_extract_k2_zero_conductance():
    d = design()
    f = np.linspace(3.5e9, 4.5e9, 101)
    spec = synthesize_admittance(d, f)
    spec.conductance = np.zeros_like(f)
    assert extract_k2(spec, (3.5e9, 4.5e9)).k2 == 0.0


def test_extract_k2_ambiguous_band():
    a, b = design(0.05, 6480.0), design(0.05, 6000.0)
    f = np.linspace(3.3e9, 4.5e9, 4001)
    y = admittance_at(a, f) + admittance_at(b, f)
    from sawguide.idt import AdmittanceSpectrum

    spec = AdmittanceSpectrum(f, y.real, y.imag, a.static_capacitance)
    with pytest.raises(AmbiguousBandError):
        extract_k2(spec, (3.5e9, 4.3e9))


def test_extract_k2_uncertainty_includes_capacitance():
    d = design()
    f = np.linspace(3.0e9, 5.1e9, 4001)
    spec = synthesize_admittance(d, f)
    base = extract_k2(spec, (3.8e9, 4.3e9))
    wide = extract_k2(spec, (3.8e9, 4.3e9), static_capacitance_stderr=0.1 * d.static_capacitance)
    assert wide.components["c_t"] == pytest.approx(0.1 * base.k2)
    assert wide.stderr > base.stderr


# -- band peak and loss fits ---------------------------------------------------

def two_port(f, s21):
    s = np.zeros((len(f), 2, 2), complex)
    s[:, 1, 0] = s21
    return TwoPortSweep(f, s)


def test_band_peak_rules():
    f = np.linspace(1e9, 2e9, 11)
    sw = two_port(f, np.full(len(f), 0.1))
    pk = band_peak(sw, (1.2e9, 1.8e9))
    assert pk.value == pytest.approx(-20.0) and pk.frequency == f[2]
    pk = band_peak(sw, (1.5e9, 1.5e9))
    assert pk.frequency == 1.5e9
    mag = np.exp(-((f - 1.3e9) / 2e8) ** 2)
    assert band_peak(two_port(f, mag), (1e9, 2e9)).value == 20 * np.log10(mag.max())
    with pytest.raises(DomainError):
        band_peak(sw, (3e9, 4e9))


def test_loss_fit_noiseless_exact():
    pts = loss_points(5.3, 10.7, 19.8, np.linspace(200e-6, 2000e-6, 7))
    res = fit_propagation_loss(pts)
    assert res.slab.alpha == pytest.approx(5.3, abs=1e-9)
    assert res.waveguide.alpha == pytest.approx(10.7, abs=1e-9)
    assert res.taper_loss_2x == pytest.approx(19.8, abs=1e-9)
    shifted = [dict(p, peak=p["peak"] - 7.5) for p in pts]
    res2 = fit_propagation_loss(shifted)
    assert res2.slab.alpha == pytest.approx(res.slab.alpha, abs=1e-12)
    assert res2.taper_loss_2x == pytest.approx(res.taper_loss_2x, abs=1e-9)


def test_loss_fit_covariance_matches_polyfit(rng):
    x = np.linspace(200e-6, 2000e-6, 12)
    y = -5.3 * x * 1e3 - 20 + rng.normal(0, 1, len(x))
    res = fit_line(x, y)
    coef, cov = np.polyfit(x * 1e3, y, 1, cov=True)
    assert res.slope == pytest.approx(coef[0], rel=1e-10)
    assert res.intercept == pytest.approx(coef[1], rel=1e-10)
    assert np.allclose(res.covariance, cov, rtol=1e-8)
    assert res.alpha_stderr >= 0


def test_loss_fit_two_points_and_underdetermined():
    res = fit_line([200e-6, 1000e-6], [-21.0, -25.0])
    assert res.exact_fit and res.alpha_stderr == 0.0
    assert res.alpha == pytest.approx(5.0)
    with pytest.raises(UnderdeterminedError):
        fit_line([200e-6, 200e-6], [-21.0, -22.0])
    with pytest.raises(UnderdeterminedError):
        fit_propagation_loss([(200e-6, -20.0, "slab"), (400e-6, -21.0, "slab")])


def test_loss_fit_groups_by_device_id():
    pts = loss_points(5.3, 10.7, 19.8, [200e-6, 800e-6, 1400e-6])
    for p in pts:
        p["kind"] = None
    groups = {"slab": {p["device_id"] for p in pts if p["device_id"].startswith("slab")},
              "waveguide": {p["device_id"] for p in pts if p["device_id"].startswith("wave")}}
    res = fit_propagation_loss(pts, groups)
    assert res.waveguide.alpha == pytest.approx(10.7)


# -- manifests -------------------------------------------------------------------

def test_manifest_and_device_set(tmp_path):
    d = design()
    f = np.linspace(3.5e9, 4.5e9, 201)
    truth = write_device_set(tmp_path / "set", [d], {"slab": 5.3, "waveguide": 10.7},
                             {"slab": -20.0, "waveguide": -39.8}, [200e-6, 600e-6], f)
    entries = load_manifest(tmp_path / "set" / "manifest.csv")
    assert [e.device_id for e in entries] == [t["device_id"] for t in truth]
    assert entries[0].length == pytest.approx(200e-6)
    devs = load_devices(entries, exclude={"slab-00"})
    assert len(devs) == 3
    pk = band_peak(devs[0][1], (3.5e9, 4.5e9))
    assert pk.value == pytest.approx(truth[1]["peak"], abs=0.01)
    assert devs[0][1].metadata["device_kind"] == "slab"


@pytest.mark.parametrize("row,needle", [
    ("a,ridge,100,a.s2p", "kind"),
    ("a,slab,,a.s2p", "missing"),
    ("a,slab,abc,a.s2p", "number"),
])
def test_manifest_errors(tmp_path, row, needle):
    p = tmp_path / "m.csv"
    p.write_text("device_id,kind,length_um,file\n" + row + "\n")
    with pytest.raises(RfDataError, match=needle):
        load_manifest(p)


def test_manifest_duplicate_ids(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("device_id,kind,length_um,file\na,slab,1,a\na,slab,2,b\n")
    with pytest.raises(RfDataError, match="duplicate"):
        load_manifest(p)
