"""Measured S-parameter ingestion, de-embedding, k2 extraction and loss fitting."""
from sawguide.rfdata.errors import (
    AmbiguousBandError,
    DomainError,
    PassivityError,
    RfDataError,
    TouchstoneParseError,
    UnderdeterminedError,
)
from sawguide.rfdata.extraction import (
    K2Estimate,
    ParasiticModel,
    deembed,
    extract_k2,
    fit_parasitics,
)
from sawguide.rfdata.losses import (
    BandPeak,
    LossFitResult,
    PropagationLossResult,
    band_peak,
    fit_line,
    fit_propagation_loss,
)
from sawguide.rfdata.manifest import DeviceEntry, load_devices, load_manifest
from sawguide.rfdata.touchstone import (
    TwoPortSweep,
    parse_touchstone,
    read_touchstone,
    serialize_touchstone,
)

__all__ = [
    "AmbiguousBandError", "BandPeak", "DeviceEntry", "DomainError", "K2Estimate",
    "LossFitResult", "ParasiticModel", "PassivityError", "PropagationLossResult",
    "RfDataError", "TouchstoneParseError", "TwoPortSweep", "UnderdeterminedError",
    "band_peak", "deembed", "extract_k2", "fit_line", "fit_parasitics",
    "fit_propagation_loss", "load_devices", "load_manifest", "parse_touchstone",
    "read_touchstone", "serialize_touchstone",
]
