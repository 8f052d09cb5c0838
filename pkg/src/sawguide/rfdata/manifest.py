"""Device manifests: which Touchstone file belongs to which device."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from sawguide.rfdata.errors import RfDataError
from sawguide.rfdata.touchstone import DEVICE_KINDS, read_touchstone

REQUIRED = ("device_id", "kind", "length_um", "file")


@dataclass(frozen=True)
class DeviceEntry:
    device_id: str
    kind: str
    length: float     # m
    path: Path


def load_manifest(path):
    """Read a CSV manifest with columns device_id, kind, length_um, file.

    Relative file paths are resolved against the manifest's directory.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.DictReader(
            line for line in fh if line.strip() and not line.lstrip().startswith("#"))]
    entries = []
    seen = set()
    for i, row in enumerate(rows, start=2):
        missing = [k for k in REQUIRED if not (row.get(k) or "").strip()]
        if missing:
            raise RfDataError(f"{path}: row {i}: missing {', '.join(missing)}")
        kind = row["kind"].strip()
        if kind not in DEVICE_KINDS:
            raise RfDataError(f"{path}: row {i}: kind must be one of {DEVICE_KINDS}")
        dev = row["device_id"].strip()
        if dev in seen:
            raise RfDataError(f"{path}: row {i}: duplicate device_id {dev!r}")
        seen.add(dev)
        try:
            length = float(row["length_um"]) * 1e-6
        except ValueError:
            raise RfDataError(f"{path}: row {i}: length_um is not a number") from None
        f = Path(row["file"].strip())
        entries.append(DeviceEntry(dev, kind, length, f if f.is_absolute() else path.parent / f))
    return entries


def load_devices(entries, exclude=()):
    """Parse every non-excluded device; returns ``[(entry, sweep)]`` in manifest order."""
    exclude = set(exclude)
    out = []
    for e in entries:
        if e.device_id in exclude:
            continue
        meta = {"device_id": e.device_id, "device_kind": e.kind, "propagation_length": e.length}
        out.append((e, read_touchstone(e.path, metadata=meta)))
    return out
