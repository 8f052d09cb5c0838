"""CSV/JSON writers for mode tables, sweeps and field profiles."""
from __future__ import annotations

import csv
import io
import json
import math

import numpy as np


def _num(x):
    x = float(x)
    return None if math.isnan(x) else x


def mode_to_dict(mode, include_fields=False):
    d = mode.summary()
    d["k2"] = _num(d["k2"])
    if include_fields and mode.fields is not None:
        d["fields"] = profile_to_dict(mode.fields)
    return d


def profile_to_dict(prof):
    def cplx(a):
        a = np.asarray(a)
        return {"re": a.real.tolist(), "im": a.imag.tolist()}

    return {
        "depth_grid": prof.depth_grid.tolist(),
        "displacement": cplx(prof.displacement),
        "strain": cplx(prof.strain),
        "potential": cplx(prof.potential),
        "normalization": prof.normalization,
        "phonon_energy": prof.phonon_energy,
        "frequency": prof.frequency,
        "wavelength": prof.wavelength,
        "width": prof.width,
    }


def modes_to_json(modes, include_fields=False):
    return json.dumps([mode_to_dict(m, include_fields) for m in modes], indent=2,
                      sort_keys=True) + "\n"


def sweep_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["h_over_lambda", "label", "velocity_m_s", "k2", "status"])
    for r in rows:
        w.writerow([repr(r.h_over_lambda), r.label, repr(float(r.velocity)), repr(float(r.k2)),
                    r.status])
    return buf.getvalue()


def profile_to_csv(prof):
    """One row per depth point; complex columns split into real and imaginary parts."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ["depth_m", "region"]
    for name in ("u1", "u2", "u3"):
        cols += [f"{name}_re", f"{name}_im"]
    for name in ("S1", "S2", "S3", "S4", "S5", "S6"):
        cols += [f"{name}_re", f"{name}_im"]
    cols += ["phi_re", "phi_im"]
    buf.write(f"# normalization={prof.normalization} frequency_hz={prof.frequency!r} "
              f"phonon_energy_j={prof.phonon_energy!r}\n")
    w.writerow(cols)
    for i, z in enumerate(prof.depth_grid):
        row = [repr(float(z)), int(prof.region[i])]
        for v in list(prof.displacement[i]) + list(prof.strain[i]) + [prof.potential[i]]:
            row += [repr(float(v.real)), repr(float(v.imag))]
        w.writerow(row)
    return buf.getvalue()
