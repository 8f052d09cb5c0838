"""Command-line front end.

Every command writes plot-ready CSV tables and a ``report.json`` into the
output directory. Reports embed the tool version and a hash of the resolved
configuration (input file contents included, output location and worker
count excluded); wall-clock data goes to ``run_metadata.json`` so reports
are byte-identical across re-runs.

Exit codes: 0 success, 2 usage, 3 data or I/O, 4 numerical non-convergence.
Set SAWGUIDE_LOG_LEVEL (e.g. DEBUG) for more logging.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from sawguide import __version__

log = logging.getLogger("sawguide")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
DEFAULT_BANDS = {"rayleigh": (2.7e9, 3.2e9), "sezawa": (3.8e9, 4.3e9)}
DEFAULT_FIT_BANDS = [(1.5e9, 2.5e9), (3.4e9, 3.55e9), (4.7e9, 5.5e9)]


class UsageError(Exception):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class DataError(Exception):
    pass


# ---------------------------------------------------------------- helpers

def _sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)


def _clean(obj):
    """Make a structure JSON-safe: NaN/inf -> None, numpy scalars -> float."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class Run:
    """Collects the resolved config and writes artifacts for one command."""

    def __init__(self, command, config, output_dir):
        self.command = command
        self.config = config
        self.output_dir = Path(output_dir)
        self.files = []
        self.config_hash = hashlib.sha256(_canonical(config).encode()).hexdigest()

    def write_text(self, name, text):
        self.output_dir.mkdir(parents=True, exist_ok=True)
        (self.output_dir / name).write_text(text)
        self.files.append(name)

    def write_report(self, payload):
        report = {"tool": "sawguide", "version": __version__, "command": self.command,
                  "config_hash": self.config_hash, "config": self.config}
        report.update(payload)
        self.write_text("report.json", json.dumps(_clean(report), indent=2, sort_keys=True)
                        + "\n")

    def write_metadata(self, started, status):
        meta = {"started_unix": started, "elapsed_s": time.time() - started,
                "exit_status": status, "config_hash": self.config_hash,
                "files": sorted(self.files), "argv": sys.argv[1:]}
        self.output_dir.mkdir(parents=True, exist_ok=True)
        (self.output_dir / "run_metadata.json").write_text(json.dumps(meta, indent=2) + "\n")


def _existing(path, field):
    if path is None:
        return None
    p = Path(path)
    if not p.exists():
        raise UsageError(field, f"path does not exist: {p}")
    return p


def _parse_range(text, field):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(field, f"expected LO:HI, got {text!r}") from None
    if not lo < hi:
        raise UsageError(field, f"empty range {text!r}")
    return lo, hi


def _parse_bands(items, defaults, field="--band"):
    bands = dict(defaults)
    for item in items or []:
        if "=" not in item:
            raise UsageError(field, f"expected NAME=LO:HI, got {item!r}")
        name, rng = item.split("=", 1)
        bands[name.strip()] = _parse_range(rng, field)
    ordered = sorted(bands.items(), key=lambda kv: kv[1][0])
    for (n1, b1), (n2, b2) in zip(ordered, ordered[1:]):
        if b2[0] < b1[1]:
            raise UsageError(field, f"bands {n1} and {n2} overlap")
    return bands


def _material_db(args):
    from sawguide.materials import load_database

    path = _existing(args.materials, "--materials")
    return load_database(path), (_sha256_file(path) if path else "builtin")


def _load_stack(args, db):
    from sawguide.dispersion import stack_from_dict

    if args.stack is None:
        from importlib import resources

        text = resources.files("sawguide.data").joinpath("stack_alscn_sic.json").read_text()
        digest = "builtin"
    else:
        p = _existing(args.stack, "--stack")
        text = p.read_text()
        digest = _sha256_file(p)
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"stack file: {exc}") from None
    return stack_from_dict(d, db), d, digest


def _rows_to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


# ---------------------------------------------------------------- commands

def cmd_dispersion(args):
    from sawguide.dispersion import SearchRange, dispersion_sweep, solve_modes
    from sawguide.dispersion.export import mode_to_dict, profile_to_csv, sweep_to_csv

    db, db_hash = _material_db(args)
    stack, stack_dict, stack_hash = _load_stack(args, db)
    search = None
    if args.velocity_range:
        lo, hi = _parse_range(args.velocity_range, "--velocity-range")
        search = SearchRange(lo, hi, args.grid_points)
    cfg = {"materials": db_hash, "stack": stack_dict, "stack_sha256": stack_hash,
           "wavelength": args.wavelength, "polarization": args.polarization,
           "velocity_range": args.velocity_range, "grid_points": args.grid_points,
           "sweep": args.sweep}
    run = Run("dispersion", cfg, args.output_dir)
    if args.sweep:
        try:
            lo, hi, n = args.sweep.split(":")
            h = [float(v) for v in np.linspace(float(lo), float(hi), int(n))]
        except ValueError:
            raise UsageError("--sweep", f"expected START:STOP:N, got {args.sweep!r}") from None
        rows = dispersion_sweep(stack, args.wavelength, h, search, args.polarization,
                                workers=args.workers)
        run.write_text("sweep.csv", sweep_to_csv(rows))
        failed = [r for r in rows if r.status not in ("ok", "weakly_bound")]
        run.write_report({"rows": [list(r.as_tuple()) for r in rows],
                          "failed_points": len(failed)})
        return run, (EXIT_NUMERIC if rows and len(failed) == len(rows) else EXIT_OK)
    modes = solve_modes(stack, args.wavelength, search, args.polarization)
    rows = [(m.label, m.phase_velocity, m.frequency, m.k2, m.status) for m in modes]
    run.write_text("modes.csv", _rows_to_csv(
        ["label", "velocity_m_s", "frequency_hz", "k2", "status"], rows))
    if args.fields:
        for i, m in enumerate(modes):
            run.write_text(f"fields_{i}_{m.label}.csv", profile_to_csv(m.fields))
    run.write_report({"modes": [mode_to_dict(m) for m in modes]})
    return run, EXIT_OK


def _mode_from_args(args):
    from sawguide.idt import ModeParams

    if args.mode_velocity is None or args.mode_k2 is None:
        raise UsageError("--mode-velocity/--mode-k2", "both are required without --design")
    return ModeParams(args.mode_velocity, args.mode_k2)


def cmd_idt(args):
    from sawguide.idt import (
        IdtDesign,
        default_grid,
        default_static_capacitance,
        match_design,
        synthesize_admittance,
    )
    from sawguide.materials import lookup_material

    db, db_hash = _material_db(args)
    c_s = args.cs if args.cs else default_static_capacitance(lookup_material(args.film, db))
    if args.match:
        mode = _mode_from_args(args)
        bounds = {"pairs": tuple(args.pairs), "aperture": tuple(args.aperture)}
        cfg = {"materials": db_hash, "match": True, "mode": [mode.velocity, mode.k2],
               "bounds": bounds, "target": args.target, "cs": c_s,
               "wavelength": args.wavelength}
        run = Run("idt", cfg, args.output_dir)
        res = match_design(args.target, mode, c_s, bounds, args.wavelength)
        design = res.design
        extra = {"match": {"pairs": design.pairs, "aperture": design.aperture,
                           "impedance_re": res.impedance.real,
                           "impedance_im": res.impedance.imag,
                           "residual": res.residual, "status": res.status,
                           "message": res.message}}
    else:
        p = _existing(args.design, "--design")
        if p is None:
            raise UsageError("--design", "give a design file or use --match")
        try:
            d = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"design file: {exc}") from None
        d.setdefault("static_capacitance_per_pair_per_length", c_s)
        design = IdtDesign(**d)
        cfg = {"materials": db_hash, "design": design.to_dict()}
        run = Run("idt", cfg, args.output_dir)
        extra = {}
    spec = synthesize_admittance(design, default_grid(design))
    run.write_text("admittance.csv", spec.to_csv())
    run.write_report({"design": design.to_dict(), "center_frequency": design.center_frequency,
                      "static_capacitance": design.static_capacitance,
                      "peak_conductance": design.peak_conductance, **extra})
    return run, EXIT_OK


def _analyze_device(job):
    """k2 per band from S11 and band peaks from S21 for one device (picklable)."""
    from sawguide.rfdata import band_peak, deembed, extract_k2, fit_parasitics, read_touchstone

    entry, bands, fit_bands = job
    out = {"device_id": entry["device_id"], "kind": entry["kind"],
           "length_m": entry["length"], "status": "ok", "errors": []}
    try:
        sweep = read_touchstone(entry["path"])
    except Exception as exc:  # record and continue with the other devices
        out["status"] = "error"
        out["errors"].append(f"{type(exc).__name__}: {exc}")
        return out
    try:
        par = fit_parasitics(sweep, fit_bands)
        out["parasitics"] = {"series_resistance": par.series_resistance,
                             "series_inductance": par.series_inductance,
                             "static_capacitance": par.static_capacitance,
                             "stderr": par.stderr, "relative_residual": par.relative_residual,
                             "flagged_bands": [b["band"] for b in par.flagged_bands]}
        spec = deembed(sweep, par)
        out["k2"] = {}
        for name, band in bands.items():
            try:
                est = extract_k2(spec, band)
                out["k2"][name] = {"k2": est.k2, "stderr": est.stderr,
                                   "center_frequency": est.center_frequency}
            except Exception as exc:
                out["errors"].append(f"k2[{name}] {type(exc).__name__}: {exc}")
    except Exception as exc:
        out["errors"].append(f"parasitics {type(exc).__name__}: {exc}")
    if sweep.ports == 2:
        out["peak_db"] = {}
        for name, band in bands.items():
            try:
                pk = band_peak(sweep, band)
                out["peak_db"][name] = {"value": pk.value, "frequency": pk.frequency}
            except Exception as exc:
                out["errors"].append(f"peak[{name}] {type(exc).__name__}: {exc}")
    if out["errors"]:
        out["status"] = "partial" if ("k2" in out or "peak_db" in out) else "error"
    return out


def _map(fn, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, jobs))
    return [fn(j) for j in jobs]


def cmd_analyze(args):
    from sawguide.rfdata import fit_propagation_loss, load_manifest
    from sawguide.rfdata.errors import RfDataError

    bands = _parse_bands(args.band, DEFAULT_BANDS)
    fit_bands = ([_parse_range(b, "--fit-band") for b in args.fit_band]
                 if args.fit_band else DEFAULT_FIT_BANDS)
    src = _existing(args.input, "--input")
    manifest = src / "manifest.csv" if src.is_dir() else src
    if src.is_dir() and not manifest.exists():
        raise DataError(f"no devices: {src} has no manifest.csv")
    try:
        entries = load_manifest(manifest)
    except RfDataError as exc:
        raise DataError(str(exc)) from None
    exclude = set(args.exclude or [])
    entries = [e for e in entries if e.device_id not in exclude]
    if not entries:
        raise DataError(f"no devices to analyze in {manifest}")
    digests = {}
    for e in entries:
        if not e.path.exists():
            digests[e.device_id] = None
        else:
            digests[e.device_id] = _sha256_file(e.path)
    cfg = {"bands": {k: list(v) for k, v in bands.items()},
           "fit_bands": [list(b) for b in fit_bands], "exclude": sorted(exclude),
           "loss_band": args.loss_band,
           "devices": [[e.device_id, e.kind, e.length, digests[e.device_id]] for e in entries]}
    run = Run("analyze", cfg, args.output_dir)
    jobs = [({"device_id": e.device_id, "kind": e.kind, "length": e.length,
              "path": str(e.path)}, bands, fit_bands) for e in entries]
    results = _map(_analyze_device, jobs, args.workers)
    rows = []
    for r in results:
        for name in bands:
            k = (r.get("k2") or {}).get(name, {})
            pk = (r.get("peak_db") or {}).get(name, {})
            rows.append((r["device_id"], r["kind"], r["length_m"], name,
                         k.get("k2", float("nan")), k.get("stderr", float("nan")),
                         pk.get("value", float("nan")), r["status"]))
    run.write_text("devices.csv", _rows_to_csv(
        ["device_id", "kind", "length_m", "band", "k2", "k2_stderr", "peak_db", "status"], rows))
    loss = {}
    loss_names = [args.loss_band] if args.loss_band else list(bands)
    for name in loss_names:
        pts = [{"kind": r["kind"], "length": r["length_m"], "peak": r["peak_db"][name]["value"]}
               for r in results if name in (r.get("peak_db") or {})]
        try:
            loss[name] = fit_propagation_loss(pts).to_dict()
        except Exception as exc:
            loss[name] = {"error": f"{type(exc).__name__}: {exc}"}
    ok = [r for r in results if r["status"] != "error"]
    run.write_report({"devices": results, "loss_fit": loss,
                      "summary": {"devices": len(results), "failed": len(results) - len(ok)}})
    if not ok:
        log.error("every device failed")
        return run, EXIT_DATA
    return run, EXIT_OK


def cmd_lossfit(args):
    from sawguide.rfdata import fit_propagation_loss

    p = _existing(args.points, "--points")
    pts = []
    with p.open(newline="") as fh:
        reader = csv.DictReader(l for l in fh if l.strip() and not l.startswith("#"))
        for i, row in enumerate(reader, start=2):
            try:
                if row["device_id"] in (args.exclude or []):
                    continue
                pts.append({"device_id": row["device_id"], "kind": row["kind"].strip(),
                            "length": float(row["length_um"]) * 1e-6,
                            "peak": float(row["peak_db"])})
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"{p}: row {i}: {exc!r}") from None
    if not pts:
        raise DataError(f"no devices in {p}")
    cfg = {"points_sha256": _sha256_file(p), "exclude": sorted(args.exclude or [])}
    run = Run("lossfit", cfg, args.output_dir)
    res = fit_propagation_loss(pts)
    run.write_report({"loss_fit": res.to_dict(), "points": len(pts)})
    return run, EXIT_OK


def cmd_ae(args):
    from sawguide import ae

    cfgd = ae.load_defaults(_existing(args.ae_config, "--ae-config"))
    db, db_hash = _material_db(args)
    film = None
    if "permittivity_sum" not in cfgd:
        from sawguide.materials import lookup_material

        film = lookup_material(cfgd.get("piezo_film", "AlScN-42"), db)
    base = ae.params_from_config(cfgd, film)
    widths = ae.grid_from_range(cfgd["map_width_range_m"], log=False)
    mobilities = ae.grid_from_range(cfgd["map_mobility_range_cm2_per_Vs"], log=True) * 1e-4
    run = Run("ae", {"materials": db_hash, "ae": cfgd}, args.output_dir)
    grid = ae.pdc_map(base, widths, mobilities)
    rows = [(w, mu, grid[i, j]) for i, mu in enumerate(mobilities) for j, w in enumerate(widths)]
    run.write_text("pdc_map.csv", _rows_to_csv(["width_m", "mobility_m2_per_Vs", "pdc_max_w"],
                                               rows))
    ws, ww = cfgd["slab_width_m"], cfgd["waveguide_width_m"]
    mu_opt = ae.optimal_mobility(base)
    run.write_report({
        "pdc_max_slab_w": ae.pdc_max(base.with_changes(width=ws)),
        "pdc_max_waveguide_w": ae.pdc_max(base.with_changes(width=ww)),
        "optimal_mobility_m2_per_Vs": mu_opt,
        "pdc_at_optimal_mobility_slab_w": ae.pdc_max(base.with_changes(width=ws,
                                                                       mobility=mu_opt)),
        "power_reduction": ae.power_reduction(ws, ww),
        "loss_adjusted_power_reduction": ae.loss_adjusted_power_reduction(
            ws, ww, cfgd["alpha_slab_db_per_mm"], cfgd["alpha_waveguide_db_per_mm"],
            cfgd["electronic_gain_db_per_mm"]),
        "mixing_enhancement": ae.mixing_enhancement(ws, ww),
        "mixing_model": "amplitude scaling |eta3 u1| ~ 1/sqrt(width) at fixed pump power",
    })
    return run, EXIT_OK


def cmd_spinmap(args):
    from sawguide import spin

    g_path = _existing(args.spin_tensor, "--spin-tensor")
    g = spin.load_spin_tensor(g_path)
    g_hash = _sha256_file(g_path) if g_path else "builtin"
    if args.grid:
        p = _existing(args.grid, "--grid")
        try:
            grid = spin.read_strain_grid(p.read_text())
        except ValueError as exc:
            raise DataError(f"{p}: {exc}") from None
        run = Run("spinmap", {"spin_tensor": g_hash, "grid_sha256": _sha256_file(p),
                              "depth_min": args.depth_min}, args.output_dir)
        region = None
        if args.depth_min is not None:
            region = grid.y >= args.depth_min
        try:
            cmap = spin.coupling_map(grid, g, region)
        except spin.NormalizationError as exc:
            raise DataError(str(exc)) from None
        run.write_text("spin_map.csv", cmap.to_csv())
        run.write_report({"maps": {"grid": cmap.summary()}})
        return run, EXIT_OK
    from sawguide.dispersion import solve_modes

    db, db_hash = _material_db(args)
    stack, stack_dict, stack_hash = _load_stack(args, db)
    run = Run("spinmap", {"materials": db_hash, "stack": stack_dict, "stack_sha256": stack_hash,
                          "wavelength": args.wavelength, "spin_tensor": g_hash},
              args.output_dir)
    modes = solve_modes(stack, args.wavelength, with_coupling=False)
    maps = {}
    for i, m in enumerate(modes):
        cmap = spin.coupling_map(m.fields, g)
        key = f"{i}_{m.label}"
        run.write_text(f"spin_{key}.csv", cmap.to_csv())
        maps[key] = {"velocity": m.phase_velocity, **cmap.summary()}
    run.write_report({"maps": maps, "spin_tensor_source": g.source})
    return run, EXIT_OK


COMMANDS = {"dispersion": cmd_dispersion, "idt": cmd_idt, "analyze": cmd_analyze,
            "lossfit": cmd_lossfit, "ae": cmd_ae, "spinmap": cmd_spinmap}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--materials", help="material database (JSONL); default: built-in")
    common.add_argument("-o", "--output-dir", default="out", help="output directory")
    common.add_argument("--workers", type=int, default=1, help="worker processes")

    p = argparse.ArgumentParser(prog="sawguide", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"sawguide {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("dispersion", parents=[common], help="guided modes of a layer stack")
    d.add_argument("--stack", help="stack JSON; default: 1 um AlScN-42 on 4H-SiC")
    d.add_argument("--wavelength", type=float, default=1.6e-6)
    d.add_argument("--polarization", default="sagittal",
                   choices=("sagittal", "shear_horizontal", "all"))
    d.add_argument("--velocity-range", help="LO:HI search range in m/s")
    d.add_argument("--grid-points", type=int, default=800)
    d.add_argument("--sweep", help="h/lambda sweep as START:STOP:N (film thickness varies)")
    d.add_argument("--fields", action="store_true", help="also write per-mode field CSVs")

    i = sub.add_parser("idt", parents=[common], help="IDT admittance and 50-ohm matching")
    i.add_argument("--design", help="design JSON (pairs, aperture, pitch, mode)")
    i.add_argument("--match", action="store_true", help="search (N, W) for the target impedance")
    i.add_argument("--mode-velocity", type=float)
    i.add_argument("--mode-k2", type=float)
    i.add_argument("--pairs", type=int, nargs=2, default=(10, 60), metavar=("LO", "HI"))
    i.add_argument("--aperture", type=float, nargs=2, default=(10e-6, 200e-6),
                   metavar=("LO", "HI"))
    i.add_argument("--target", type=float, default=50.0)
    i.add_argument("--wavelength", type=float, default=1.6e-6)
    i.add_argument("--film", default="AlScN-42", help="film used for the default C_s")
    i.add_argument("--cs", type=float, help="C_s override in F/m")

    a = sub.add_parser("analyze", parents=[common],
                       help="k2 and loss fits from a directory of Touchstone files")
    a.add_argument("input", help="directory with manifest.csv, or a manifest file")
    a.add_argument("--band", action="append", metavar="NAME=LO:HI",
                   help="extraction band in Hz (defaults: rayleigh 2.7e9:3.2e9, "
                        "sezawa 3.8e9:4.3e9)")
    a.add_argument("--fit-band", action="append", metavar="LO:HI",
                   help="off-resonance band for the parasitic fit (repeatable)")
    a.add_argument("--loss-band", help="band used for the loss fit (default: all bands)")
    a.add_argument("--exclude", nargs="*", default=[], help="device ids to skip")

    lf = sub.add_parser("lossfit", parents=[common], help="propagation/taper loss from peaks")
    lf.add_argument("--points", required=True,
                    help="CSV with device_id, kind, length_um, peak_db")
    lf.add_argument("--exclude", nargs="*", default=[])

    e = sub.add_parser("ae", parents=[common], help="acoustoelectric DC power map")
    e.add_argument("--ae-config", help="AE parameter JSON; default: built-in")

    s = sub.add_parser("spinmap", parents=[common], help="spin-strain coupling maps")
    s.add_argument("--stack")
    s.add_argument("--wavelength", type=float, default=1.6e-6)
    s.add_argument("--spin-tensor", help="spin-strain tensor JSON; default: built-in")
    s.add_argument("--grid", help="imported per-phonon strain grid CSV")
    s.add_argument("--depth-min", type=float,
                   help="keep grid points with y >= this depth (substrate mask)")
    return p


def main(argv=None):
    logging.basicConfig(level=os.environ.get("SAWGUIDE_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    started = time.time()
    run = None
    from sawguide.dispersion import ConvergenceError
    from sawguide.materials import MaterialError
    from sawguide.rfdata.errors import RfDataError

    try:
        run, status = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"sawguide {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"sawguide {args.command}: no convergence: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, MaterialError, RfDataError, OSError, ValueError, KeyError) as exc:
        print(f"sawguide {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    run.write_metadata(started, status)
    return status


if __name__ == "__main__":
    sys.exit(main())
