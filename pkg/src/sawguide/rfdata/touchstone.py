"""Touchstone v1 (.s1p/.s2p) reader and writer."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from sawguide.rfdata.errors import TouchstoneParseError

FREQ_UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}
FORMATS = ("RI", "MA", "DB")
DEVICE_KINDS = ("slab", "waveguide")

# two-port v1 column order is S11 S21 S12 S22
_ORDER_2P = ((0, 0), (1, 0), (0, 1), (1, 1))


@dataclass
class TwoPortSweep:
    """S-parameters vs frequency. One-port files fill only ``s_matrix[:, 0, 0]``
    (the rest is zero) and set ``ports = 1``."""

    frequency_grid: np.ndarray
    s_matrix: np.ndarray           # (n, 2, 2) complex
    reference_impedance: float = 50.0
    metadata: dict = field(default_factory=dict)
    ports: int = 2

    def __post_init__(self):
        self.frequency_grid = np.asarray(self.frequency_grid, dtype=float)
        self.s_matrix = np.asarray(self.s_matrix, dtype=complex)
        if self.s_matrix.shape != (len(self.frequency_grid), 2, 2):
            raise ValueError("s_matrix must have shape (n, 2, 2)")
        if np.any(np.diff(self.frequency_grid) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if not np.all(np.isfinite(self.s_matrix)):
            raise ValueError("S-parameters must be finite")
        kind = self.metadata.get("device_kind")
        if kind is not None and kind not in DEVICE_KINDS:
            raise ValueError(f"device_kind must be one of {DEVICE_KINDS}")

    @property
    def s11(self):
        return self.s_matrix[:, 0, 0]

    @property
    def s21(self):
        if self.ports < 2:
            raise ValueError("one-port sweep has no S21")
        return self.s_matrix[:, 1, 0]

    @classmethod
    def from_s11(cls, frequency_grid, s11, reference_impedance=50.0, metadata=None):
        f = np.asarray(frequency_grid, dtype=float)
        s = np.zeros((len(f), 2, 2), dtype=complex)
        s[:, 0, 0] = s11
        return cls(f, s, reference_impedance, dict(metadata or {}), ports=1)


def _to_complex(a, b, fmt):
    if fmt == "RI":
        return complex(a, b)
    mag = a if fmt == "MA" else 10.0 ** (a / 20.0)
    ang = np.deg2rad(b)
    return complex(mag * np.cos(ang), mag * np.sin(ang))


def _parse_option(tokens, lineno):
    unit, param, fmt, z0 = "GHZ", "S", "MA", 50.0
    i = 0
    while i < len(tokens):
        t = tokens[i].upper()
        if t in FREQ_UNITS:
            unit = t
        elif t in FORMATS:
            fmt = t
        elif t in ("S", "Y", "Z", "H", "G"):
            param = t
        elif t == "R":
            if i + 1 >= len(tokens):
                raise TouchstoneParseError("option line: R needs a value", lineno)
            try:
                z0 = float(tokens[i + 1])
            except ValueError:
                raise TouchstoneParseError(f"option line: bad reference impedance "
                                           f"{tokens[i + 1]!r}", lineno) from None
            i += 1
        else:
            raise TouchstoneParseError(f"option line: unknown token {tokens[i]!r}", lineno)
        i += 1
    if param != "S":
        raise TouchstoneParseError(f"only S-parameters are supported, got {param}", lineno)
    if not z0 > 0:
        raise TouchstoneParseError("reference impedance must be > 0", lineno)
    return unit, fmt, z0


def parse_touchstone(data, ports=None, metadata=None):
    """Parse Touchstone v1 content (bytes or str) into a :class:`TwoPortSweep`.

    ``ports`` may be given (1 or 2, e.g. from the file extension); otherwise it
    is inferred from the first data row (3 columns: one-port, 9: two-port).
    """
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else str(data)
    option = None
    freqs, rows = [], []
    ncol = {1: 3, 2: 9}.get(ports)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            raise TouchstoneParseError("Touchstone v2 keywords are not supported", lineno)
        if line.startswith("#"):
            if option is not None:
                raise TouchstoneParseError("duplicate option line", lineno)
            option = _parse_option(line[1:].split(), lineno)
            continue
        if option is None:
            raise TouchstoneParseError("data before the option line (# <unit> S <fmt> R <z0>)",
                                       lineno)
        tokens = line.split()
        if ncol is None:
            if len(tokens) not in (3, 9):
                raise TouchstoneParseError(f"expected 3 or 9 columns, got {len(tokens)}", lineno)
            ncol = len(tokens)
        if len(tokens) != ncol:
            raise TouchstoneParseError(f"expected {ncol} columns, got {len(tokens)}", lineno)
        try:
            vals = [float(t) for t in tokens]
        except ValueError as exc:
            raise TouchstoneParseError(f"non-numeric value ({exc})", lineno) from None
        f = vals[0] * FREQ_UNITS[option[0]]
        if freqs and f <= freqs[-1][0]:
            raise TouchstoneParseError(f"frequencies must be strictly increasing "
                                       f"({vals[0]!r} after previous point)", lineno)
        freqs.append((f, lineno))
        rows.append(vals[1:])
    if option is None:
        raise TouchstoneParseError("missing option line (# <unit> S <fmt> R <z0>)")
    if not rows:
        raise TouchstoneParseError("no data rows")
    unit, fmt, z0 = option
    n = len(rows)
    s = np.zeros((n, 2, 2), dtype=complex)
    nports = 1 if ncol == 3 else 2
    for i, r in enumerate(rows):
        if nports == 1:
            s[i, 0, 0] = _to_complex(r[0], r[1], fmt)
        else:
            for k, (a, b) in enumerate(_ORDER_2P):
                s[i, a, b] = _to_complex(r[2 * k], r[2 * k + 1], fmt)
    meta = {"source_format": fmt, "source_unit": unit}
    meta.update(metadata or {})
    return TwoPortSweep(np.array([f for f, _ in freqs]), s, z0, meta, nports)


def serialize_touchstone(sweep, comment=None):
    """Write RI-format Touchstone v1 with frequencies in Hz; floats use ``repr``
    so parse -> serialize -> parse is bit-identical."""
    lines = []
    if comment:
        lines += ["! " + c for c in str(comment).splitlines()]
    lines.append(f"# HZ S RI R {sweep.reference_impedance!r}")
    for f, s in zip(sweep.frequency_grid, sweep.s_matrix):
        vals = [float(f)]
        entries = [(0, 0)] if sweep.ports == 1 else _ORDER_2P
        for a, b in entries:
            vals += [s[a, b].real, s[a, b].imag]
        lines.append(" ".join(repr(float(v)) for v in vals))
    return "\n".join(lines) + "\n"


def read_touchstone(path, metadata=None):
    from pathlib import Path

    p = Path(path)
    ports = {".s1p": 1, ".s2p": 2}.get(p.suffix.lower())
    return parse_touchstone(p.read_bytes(), ports=ports, metadata=metadata)
